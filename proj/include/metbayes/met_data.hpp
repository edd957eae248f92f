#pragma once

// Multi-environment trial (MET) observations: loading, validation,
// environment indexing and historical-window partitioning.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace metbayes::data {

struct ObservationRow {
  std::string year;
  std::string zone;
  std::string location;
  std::string genotype;
  int replicate = 1;
  std::optional<double> yield;  // t/ha; nullopt when missing

  bool operator==(const ObservationRow&) const = default;
};

/// Header names for each logical column. `season` is optional; when
/// non-empty it is only carried through, filtering is done via `filters`.
struct CsvSchema {
  std::string year = "year";
  std::string season = "season";
  std::string zone = "zone";
  std::string location = "location";
  std::string genotype = "genotype";
  std::string replicate = "replicate";
  std::string yield = "yield";
  // Rows are kept only when every listed column equals the given value.
  std::vector<std::pair<std::string, std::string>> filters;
  // Loading fails when the missing-yield share exceeds this.
  double max_missing_fraction = 0.05;
};

/// One CSV record split into trimmed fields (double-quote escaping).
std::vector<std::string> split_csv_record(const std::string& line);
/// Quotes a field when it contains a comma, quote or newline.
std::string csv_quote(const std::string& field);

/// Orders year labels numerically when they all parse as numbers,
/// lexicographically otherwise.
std::vector<std::string> sort_years(std::vector<std::string> years);

class MetDataset {
 public:
  MetDataset() = default;

  /// Validates rows and derives the zone and year sets. `zones` overrides the
  /// derived zone set (used by windows to keep the parent's zones).
  explicit MetDataset(std::vector<ObservationRow> rows,
                      std::optional<std::vector<std::string>> zones = std::nullopt);

  const std::vector<ObservationRow>& rows() const { return rows_; }
  const std::vector<std::string>& zones() const { return zones_; }
  const std::vector<std::string>& years() const { return years_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t missing_count() const;
  std::size_t observed_count() const { return size() - missing_count(); }

  /// Zone of a location (locations map to exactly one zone).
  const std::string& zone_of(const std::string& location) const;

  /// Rows of the given years, keeping this dataset's zone set.
  MetDataset subset_years(const std::vector<std::string>& years) const;

 private:
  std::vector<ObservationRow> rows_;
  std::vector<std::string> zones_;
  std::vector<std::string> years_;
  std::map<std::string, std::string> location_zone_;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_filtered = 0;
  std::size_t missing_yield = 0;
};

MetDataset load_met_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                        LoadReport* report = nullptr);

/// Writes the canonical schema (year,zone,location,genotype,replicate,yield).
void write_met_csv(const MetDataset& data, const std::filesystem::path& path);

struct Environment {
  std::string year;
  std::string location;
  bool operator==(const Environment&) const = default;
};

/// Year-by-location environments of the observed (non-missing) rows, in
/// year-major order then location label.
struct EnvironmentIndex {
  std::vector<Environment> environments;
  // Per dataset row; -1 for rows with missing yield.
  std::vector<std::int32_t> row_env;
  std::vector<std::size_t> counts;

  std::size_t size() const { return environments.size(); }
  std::string label(std::size_t e) const;
};

EnvironmentIndex index_environments(const MetDataset& data);

/// Consecutive year counts per window, oldest first.
struct WindowPlan {
  std::vector<int> window_year_counts;
};

/// Default multi-year plan: 8, 5, 3, 3, 3 years.
WindowPlan default_window_plan();

std::vector<MetDataset> partition_windows(const MetDataset& data, const WindowPlan& plan);

}  // namespace metbayes::data
