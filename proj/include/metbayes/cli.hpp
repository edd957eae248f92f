#pragma once

// Run configuration and the four commands behind the metbayes executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "metbayes/bayes_update.hpp"
#include "metbayes/diagnostics.hpp"
#include "metbayes/gibbs.hpp"
#include "metbayes/met_data.hpp"
#include "metbayes/simulate.hpp"

namespace metbayes::cli {

inline constexpr const char* kConfigSchema = "metbayes.config/1";

struct DesignConfig {
  std::vector<std::pair<int, int>> grid{{3, 10}, {3, 20}, {3, 40}, {3, 100}, {3, 200}};  // (H, J)
  int n_rep = 3;
  int n_draws = 100;
  std::uint64_t seed = 20240601;
  std::filesystem::path priors;  // empty: <output_dir>/final_priors.json
};

struct RunConfig {
  std::filesystem::path data_csv;
  data::CsvSchema csv;
  std::filesystem::path output_dir = "metbayes_run";
  data::WindowPlan plan = data::default_window_plan();
  gibbs::SamplerConfig sampler;
  update::InitialPriorSpec priors;
  DesignConfig design;
  diag::Thresholds thresholds;
  sim::SimSpec simulate;

  /// Throws ConfigError on any invalid nested value.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults. Relative paths are resolved against
  /// `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

RunConfig load_config(const std::filesystem::path& path);

/// Command-line overrides shared by all commands.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;

  void apply(RunConfig& cfg) const;
};

/// Loads the data, partitions it into windows and runs the updating chain,
/// writing window_NN/{priors_in.json, posterior.csv, priors_out.json,
/// diagnostics.json}, final_priors.json and manifest.json. Returns the run
/// directory.
std::filesystem::path cmd_fit(const RunConfig& cfg, std::ostream& log);

/// Design table for every (H, J) in the grid: one point-estimate row from
/// the prior means and one posterior-averaged row. Writes design.csv and
/// design.json into the output directory and returns the CSV path.
std::filesystem::path cmd_design(const RunConfig& cfg, std::ostream& log);

/// Writes data.csv and truth.json into the output directory.
std::filesystem::path cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// Diagnostics of a run directory (every window) or a single posterior CSV.
/// Prints the table and returns the number of flagged parameters.
std::size_t cmd_diagnose(const std::filesystem::path& target, const diag::Thresholds& thresholds,
                         std::ostream& out);

struct PosteriorTable {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;
};

/// Parses a posterior CSV written by write_posterior_csv.
PosteriorTable read_posterior_csv(const std::filesystem::path& path);

}  // namespace metbayes::cli
