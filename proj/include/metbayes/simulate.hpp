#pragma once

// Synthetic MET data from the additive model
//
//   y = mu + zeta_z + eta_h + beta_zh + delta_zch + b_zchv
//         + alpha_zg + omega_hg + tau_zhg + phi_zchg + eps,
//   eps ~ N(0, sigma2_e(h, c)),  (alpha_1g..alpha_Zg) ~ N(0, Sigma_Z).

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "metbayes/distributions.hpp"
#include "metbayes/met_data.hpp"
#include "metbayes/model_build.hpp"

namespace metbayes::sim {

struct SimSpec {
  int years = 6;
  int zones = 4;
  int locations_per_zone = 2;
  int genotypes = 20;
  int replicates = 3;
  int first_year = 2001;

  double mu = 5.0;
  std::vector<double> zeta;  // per zone; empty means all zero
  // Scalar variances in stacking order (var_year ... var_gen_zone_loc_year).
  std::array<double, model::kScalarEffectCount> sigma2{0.3, 0.2, 0.15, 0.05, 0.1, 0.08, 0.12};
  Eigen::MatrixXd sigma_z;  // empty means 0.2 on the diagonal, 0.1 off it
  // Residual variance per environment: a constant, or drawn from this prior.
  double residual = 0.25;
  std::optional<dist::InvGammaParams> residual_prior;
  std::uint64_t seed = 1;

  /// Throws ParameterError on counts < 1, negative variances, non-PSD Sigma_Z.
  void validate() const;
  Eigen::MatrixXd sigma_z_or_default() const;

  nlohmann::json to_json() const;
  static SimSpec from_json(const nlohmann::json& j);
};

struct Truth {
  SimSpec spec;
  // Drawn effects keyed by effect name, then level label.
  std::array<std::map<std::string, double>, model::kEffectCount> effects;
  std::map<std::string, double> sigma2_e;  // by "year:location"

  /// Mean of the drawn per-environment residual variances.
  double env_mean_var_resid() const;
  nlohmann::json to_json() const;
};

struct Simulated {
  data::MetDataset data;
  Truth truth;
};

Simulated simulate_dataset(const SimSpec& spec, dist::Rng& rng);
/// Same, with the generator seeded from spec.seed.
Simulated simulate_dataset(const SimSpec& spec);

}  // namespace metbayes::sim
