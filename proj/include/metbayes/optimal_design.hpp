#pragma once

// A-optimal allocation of trials to zones.
//
//   Phi*_A(w) = tr[(diag(w) + Q^-1)^-1 B^-1 K K B^-1]
//   K = Sigma_Z,  B = K + (s2_gen_year / H) I,
//   kappa = (s2_gen_zone_year + s2_gen_zone_loc_year + mean s2_e / n_rep) / H,
//   Q = (J / kappa) B.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "metbayes/bayes_update.hpp"
#include "metbayes/distributions.hpp"

namespace metbayes::design {

/// The variance components the criterion depends on.
struct VarianceComponents {
  Eigen::MatrixXd sigma_z;
  double gen_year = 0.0;           // omega
  double gen_zone_year = 0.0;      // tau
  double gen_zone_loc_year = 0.0;  // phi
  double env_mean_var_resid = 0.0; // mean over environments of sigma2_e
};

/// Arithmetic mean of per-environment residual variances.
double env_mean_var_resid(const std::vector<double>& sigma2_e);

struct DesignInputs {
  Eigen::MatrixXd K;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;
  double kappa = 1.0;
  int H = 1;
  int J = 1;
  int n_rep = 1;

  Eigen::Index zones() const { return K.rows(); }
};

/// Throws DomainError when Sigma_Z is not SPD, ParameterError for H, J or
/// n_rep < 1 or a negative component.
DesignInputs build_design_inputs(const VarianceComponents& vc, int H, int J, int n_rep);

/// Throws ParameterError unless w >= 0 and sums to one within 1e-9.
void validate_weights(const Eigen::VectorXd& w);

double phi_a_multi_year(const Eigen::VectorXd& w, const DesignInputs& in);
/// d Phi*_A / d w_z.
Eigen::VectorXd phi_a_gradient(const Eigen::VectorXd& w, const DesignInputs& in);

/// tr[(diag(w) + Delta^-1)^-1]; Delta must be SPD.
double phi_a_single_year(const Eigen::VectorXd& w, const Eigen::MatrixXd& delta);

struct OptimizerOptions {
  double gap_tol = 1e-8;
  int max_iter = 10000;
};

struct ApproximateDesign {
  Eigen::VectorXd weights;
  double criterion = 0.0;
  int iterations = 0;
  bool converged = false;  // false: best point after max_iter
};

/// Pairwise exchange on the simplex from equal weights: each step moves mass
/// from the support point with the largest partial derivative to the one
/// with the smallest, with an exact line search. Stops when the derivative
/// gap falls below gap_tol * (1 + max|d|).
ApproximateDesign optimize_approximate_design(const DesignInputs& in,
                                              const OptimizerOptions& opt = {});

/// Integer trial counts summing to J: every zone with positive weight gets
/// one trial, the rest is spread by largest remainder and the leftover units
/// go to the candidate subset with the lowest criterion. Requires J >= Z.
std::vector<int> round_to_exact(const Eigen::VectorXd& w, const DesignInputs& in);

/// All largest-remainder candidates round_to_exact chooses from.
std::vector<std::vector<int>> exact_candidates(const Eigen::VectorXd& w, int J);

/// Phi*_A(w) / Phi*_A(equal weights).
double efficiency(const Eigen::VectorXd& w, const DesignInputs& in);

/// Constant the criterion drops: MSE_Tr = (kappa / J) Phi*_A.
double mse_scale(const DesignInputs& in);
/// Phi*_A(w) * scale; scale must be positive.
double mse_trace(const Eigen::VectorXd& w, const DesignInputs& in, double scale);

struct DesignResult {
  ApproximateDesign design;
  std::vector<int> exact;
  double eff_a = 1.0;
  double mse_tr = 0.0;
};

/// Optimize, round, and evaluate one component set.
DesignResult evaluate_design(const DesignInputs& in, const OptimizerOptions& opt = {});

struct DesignSummary {
  int H = 0;
  int J = 0;
  int n_draws = 0;
  Eigen::VectorXd weight_mean;
  Eigen::VectorXd weight_sd;
  Eigen::VectorXd weight_min;
  Eigen::VectorXd weight_max;
  double eff_mean = 0.0;
  double eff_sd = 0.0;
  double mse_mean = 0.0;
  double mse_sd = 0.0;
  int unconverged = 0;
  int redraws = 0;
  std::vector<DesignResult> draws;
};

/// One component set drawn from the fitted priors. Residual variances are
/// drawn per location (default prior when none are fitted) and averaged.
VarianceComponents draw_components(const update::WindowPriors& priors, dist::Rng& rng);

/// Plug-in set of prior means (mode when a mean does not exist).
VarianceComponents mean_components(const update::WindowPriors& priors);

/// Draws n_draws component sets, optimizes each, and averages. Draws are
/// generated sequentially from `rng`; optimization may use `threads` workers
/// and the reduction is in draw order, so the result does not depend on it.
DesignSummary posterior_design_summary(const update::WindowPriors& priors, int H, int J,
                                       int n_rep, int n_draws, dist::Rng& rng, int threads = 1,
                                       const OptimizerOptions& opt = {});

}  // namespace metbayes::design
