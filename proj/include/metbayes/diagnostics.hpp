#pragma once

// MCMC convergence diagnostics. A diagnostic that cannot be computed (zero
// variance) is returned as std::nullopt and serialized as "undefined".

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace metbayes::gibbs {
struct PosteriorSample;
}

namespace metbayes::diag {

using Series = std::span<const double>;

/// Split-chain potential scale reduction. Needs >= 2 chains of equal length >= 4.
std::optional<double> r_hat(const std::vector<Series>& chains);

/// Effective sample size of one chain (n >= 8), Geyer initial positive
/// sequence truncation, clipped to (0, n].
std::optional<double> ess(Series chain);

/// Sum of per-chain ESS.
std::optional<double> ess(const std::vector<Series>& chains);

/// Geweke z: first 10% against last 50%, batch-means variances. n >= 100.
std::optional<double> geweke_z(Series chain);

struct Thresholds {
  double r_hat_max = 1.01;
  double ess_min = 400.0;
  double geweke_abs_max = 2.0;
};

struct ParameterDiagnostics {
  std::string name;
  std::optional<double> r_hat;
  std::optional<double> ess;
  std::vector<std::optional<double>> geweke_z;  // one per chain
  bool flag_r_hat = false;
  bool flag_ess = false;
  bool flag_geweke = false;

  bool flagged() const { return flag_r_hat || flag_ess || flag_geweke; }
};

struct DiagnosticsReport {
  Thresholds thresholds;
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  std::vector<ParameterDiagnostics> parameters;

  std::size_t flagged_count() const;
  nlohmann::json to_json() const;
  /// Fixed-width table, one row per parameter, PASS or FLAG in the last column.
  void print_table(std::ostream& out) const;
};

/// Diagnostics for columns of per-chain draw matrices (rows are draws). All
/// chains must share the column layout given by `names`.
DiagnosticsReport diagnose(const std::vector<std::string>& names,
                           const std::vector<Eigen::MatrixXd>& chains,
                           const Thresholds& thresholds = {});

DiagnosticsReport diagnose(const gibbs::PosteriorSample& sample, const Thresholds& thresholds = {});

}  // namespace metbayes::diag
