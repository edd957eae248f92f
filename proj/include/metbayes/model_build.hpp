#pragma once

// Design matrices of the MET mixed model
//
//   y = mu + zone + year + zone:year + zone:loc:year + rep(zone:loc:year)
//         + gen:zone + gen:year + gen:zone:year + gen:zone:loc:year + e
//
// with heterogeneous residual variances per year-location environment.
// The fixed part uses treatment coding (first zone is the reference level).
// Random-effect incidence matrices are stored as one level index per row.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "metbayes/met_data.hpp"

namespace metbayes::model {

/// Stacking order of the random effects. The genotype-by-zone effect is last
/// and carries the unstructured zone covariance; all others are scalar.
enum class Effect : int {
  year = 0,
  zone_year,
  zone_loc_year,
  zone_loc_rep_year,
  gen_year,
  gen_zone_year,
  gen_zone_loc_year,
  gen_zone,
};

inline constexpr int kEffectCount = 8;
/// Effects with a scalar variance component (all but gen_zone).
inline constexpr int kScalarEffectCount = 7;
inline constexpr int kGenZone = static_cast<int>(Effect::gen_zone);

/// Variance-component short name, e.g. "var_zone_loc_year".
std::string_view variance_name(int effect);
/// Effect short name used in column labels, e.g. "zone_loc_year".
std::string_view effect_name(int effect);

/// One-hot incidence matrix in compressed form: row i has its single 1 in
/// column level_of_row[i].
struct Incidence {
  std::size_t levels = 0;
  std::vector<std::int32_t> level_of_row;

  std::size_t rows() const { return level_of_row.size(); }
  Eigen::MatrixXd dense() const;
};

struct EffectLayout {
  std::array<std::vector<std::string>, kEffectCount> level_labels;
  std::array<std::size_t, kEffectCount + 1> offsets{};

  std::size_t levels(int k) const { return offsets[k + 1] - offsets[k]; }
  std::size_t total() const { return offsets[kEffectCount]; }
};

nlohmann::json layout_to_json(const EffectLayout& layout);

struct ModelMatrices {
  Eigen::MatrixXd X;                      // n x p
  std::vector<std::string> fixed_names;   // "mu", "zone[<label>]"...
  std::array<Incidence, kEffectCount> Z;  // ordered as Effect
  EffectLayout layout;
  data::EnvironmentIndex env_index;
  std::vector<std::int32_t> row_env;      // environment of each model row
  std::vector<std::size_t> source_row;    // dataset row of each model row
  Eigen::VectorXd y;                      // observed yields in model-row order
  std::vector<std::string> genotypes;
  std::vector<std::string> zones;
  std::vector<std::string> warnings;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t genotype_count() const { return genotypes.size(); }
  std::size_t zone_count() const { return zones.size(); }
  std::size_t environment_count() const { return env_index.size(); }
};

/// Builds X, Z_1..Z_8 and the environment index from the observed rows of
/// `data` (rows with a missing yield are skipped). Only observed factor-level
/// combinations become columns, except gen_zone which always spans
/// genotypes x zones (genotype-major) so its covariance is I_M (x) Sigma_Z.
ModelMatrices build_design(const data::MetDataset& data);

}  // namespace metbayes::model
