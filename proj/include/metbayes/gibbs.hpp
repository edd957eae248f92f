#pragma once

// Gibbs sampler over the full conditionals of the MET mixed model:
//
//   beta      | .  ~ N((X'R^-1X)^-1 X'R^-1 y*, (X'R^-1X)^-1)      flat prior
//   b_k       | .  ~ N(Omega Z_k'R^-1 y_k, Omega),  Omega^-1 = Z_k'R^-1Z_k + G_k^-1
//   sigma2_k  | .  ~ Inv-Gamma(a_k + Q_k/2, b_k + b_k'b_k/2)
//   Sigma_Z   | .  ~ Inv-Wishart(v + M, S + sum_g b_g b_g')
//   sigma2_e  | .  ~ Inv-Gamma(a_e + N_e/2, b_e + |y_e - fit_e|^2/2)
//
// One sweep updates the blocks in exactly that order.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metbayes/distributions.hpp"
#include "metbayes/model_build.hpp"

namespace metbayes::gibbs {

using dist::Rng;

struct ParameterState {
  Eigen::VectorXd beta;                                // p
  Eigen::VectorXd b;                                   // stacked, layout offsets
  std::array<double, model::kScalarEffectCount> sigma2{};
  Eigen::MatrixXd sigma_z;                             // Z x Z
  Eigen::VectorXd sigma2_e;                            // E

  /// Zero effects, unit variances, identity Sigma_Z sized for `m`.
  static ParameterState zeros(const model::ModelMatrices& m);
  Eigen::VectorXd effect(const model::ModelMatrices& m, int k) const;
};

struct PriorSet {
  std::array<dist::InvGammaParams, model::kScalarEffectCount> scalar;
  dist::InvWishartParams wishart;
  std::vector<dist::InvGammaParams> residual;  // one per environment

  void validate(const model::ModelMatrices& m) const;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_iter = 7000;   // total sweeps T, burn-in included
  int burn_in = 2000;  // B
  int thin = 2;
  std::uint64_t seed = 20240601;
  int threads = 0;     // 0: one per chain, capped at hardware concurrency
  bool store_random_effects = false;
  double init_min = 1e-6;  // clamp for initial variance draws
  double init_max = 1e3;

  void validate() const;
  /// ceil((T - B) / thin)
  int retained_per_chain() const;
};

/// Retained draws of one chain; one row per retained sweep.
struct Chain {
  int chain_id = 0;
  Eigen::MatrixXd beta;      // R x p
  Eigen::MatrixXd sigma2;    // R x K
  Eigen::MatrixXd sigma_z;   // R x Z*Z, row-major flattening
  Eigen::MatrixXd sigma2_e;  // R x E
  Eigen::MatrixXd b;         // R x sum(Q_k) when stored, else empty
  Eigen::VectorXd b_mean;    // posterior mean of b over retained draws

  Eigen::Index draws() const { return sigma2.rows(); }
  Eigen::MatrixXd sigma_z_draw(Eigen::Index r) const;
};

struct PosteriorSample {
  std::vector<Chain> chains;
  std::vector<std::string> fixed_names;
  std::vector<std::string> zones;
  std::vector<std::string> environments;
  model::EffectLayout layout;

  std::size_t total_draws() const;
  /// Chains concatenated in chain order.
  std::vector<double> merged_sigma2(int k) const;
  std::vector<double> merged_sigma2_e(std::size_t e) const;
  std::vector<Eigen::MatrixXd> merged_sigma_z() const;
  /// Scalar columns in output order with their labels: beta, var_*,
  /// Sigma_gen_zone[i,j], var_resid_env[...].
  std::vector<std::string> column_names() const;
  Eigen::MatrixXd chain_columns(std::size_t c) const;
};

// Conjugate parameter updates, exposed for exact checks.
dist::InvGammaParams scalar_posterior(const dist::InvGammaParams& prior,
                                      const Eigen::VectorXd& effect);
dist::InvWishartParams sigma_z_posterior(const dist::InvWishartParams& prior,
                                         const Eigen::VectorXd& gen_zone_effect,
                                         Eigen::Index zones);
dist::InvGammaParams residual_posterior(const dist::InvGammaParams& prior, std::size_t count,
                                        double sum_squares);

/// y - X beta - sum_k Z_k b_k in model-row order.
Eigen::VectorXd residuals(const ParameterState& s, const model::ModelMatrices& m,
                          const Eigen::VectorXd& y);

// Single full-conditional draws. They recompute residuals from scratch and
// are meant for tests and diagnostics; run_chain uses an incremental sweep
// with the same arithmetic.
Eigen::VectorXd cond_fixed_effects(const ParameterState& s, const model::ModelMatrices& m,
                                   const Eigen::VectorXd& y, Rng& rng,
                                   Eigen::VectorXd* mean_out = nullptr);
Eigen::VectorXd cond_random_effect(int k, const ParameterState& s, const model::ModelMatrices& m,
                                   const Eigen::VectorXd& y, Rng& rng,
                                   Eigen::VectorXd* mean_out = nullptr);
double cond_variance_scalar(int k, const ParameterState& s, const model::ModelMatrices& m,
                            const dist::InvGammaParams& prior, Rng& rng);
dist::SpdMatrix cond_sigma_z(const ParameterState& s, const model::ModelMatrices& m,
                             const dist::InvWishartParams& prior, Rng& rng);
double cond_residual_env(std::size_t e, const ParameterState& s, const model::ModelMatrices& m,
                         const Eigen::VectorXd& y, const dist::InvGammaParams& prior, Rng& rng);

/// Initial state drawn from the priors (variances clamped to
/// [init_min, init_max]); fixed effects start at zero.
ParameterState initial_state(const model::ModelMatrices& m, const PriorSet& priors,
                             const SamplerConfig& cfg, Rng& rng);

/// Per-chain generator derived from (seed, chain_id).
Rng chain_rng(std::uint64_t seed, int chain_id);

Chain run_chain(const model::ModelMatrices& m, const Eigen::VectorXd& y, const PriorSet& priors,
                const SamplerConfig& cfg, int chain_id);

PosteriorSample run_chains(const model::ModelMatrices& m, const Eigen::VectorXd& y,
                           const PriorSet& priors, const SamplerConfig& cfg);

/// Columnar CSV: chain, draw, then one column per scalar parameter.
void write_posterior_csv(const PosteriorSample& s, std::ostream& out);

}  // namespace metbayes::gibbs
