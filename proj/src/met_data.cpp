#include "metbayes/met_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "metbayes/errors.hpp"

namespace metbayes::data {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// RFC-4180 style field splitting with double-quote escaping.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "." || s == "null";
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<std::string> split_csv_record(const std::string& line) { return split_csv_line(line); }
std::string csv_quote(const std::string& field) { return csv_escape(field); }

std::vector<std::string> sort_years(std::vector<std::string> years) {
  const bool numeric = std::all_of(years.begin(), years.end(),
                                   [](const std::string& y) { return parse_double(y).has_value(); });
  if (numeric) {
    std::stable_sort(years.begin(), years.end(), [](const std::string& a, const std::string& b) {
      return *parse_double(a) < *parse_double(b);
    });
  } else {
    std::sort(years.begin(), years.end());
  }
  years.erase(std::unique(years.begin(), years.end()), years.end());
  return years;
}

MetDataset::MetDataset(std::vector<ObservationRow> rows,
                       std::optional<std::vector<std::string>> zones)
    : rows_(std::move(rows)) {
  std::set<std::string> zone_set;
  std::vector<std::string> years;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.year.empty() || r.zone.empty() || r.location.empty() || r.genotype.empty()) {
      throw ConsistencyError("row " + std::to_string(i + 1) + ": empty label");
    }
    if (r.replicate < 1) {
      throw ConsistencyError("row " + std::to_string(i + 1) + ": replicate must be >= 1");
    }
    if (r.yield && !std::isfinite(*r.yield)) {
      throw ConsistencyError("row " + std::to_string(i + 1) + ": non-finite yield");
    }
    auto [it, inserted] = location_zone_.emplace(r.location, r.zone);
    if (!inserted && it->second != r.zone) {
      throw ConsistencyError("location '" + r.location + "' appears under zones '" + it->second +
                             "' and '" + r.zone + "'");
    }
    zone_set.insert(r.zone);
    years.push_back(r.year);
  }
  if (zones) {
    for (const auto& z : zone_set) {
      if (std::find(zones->begin(), zones->end(), z) == zones->end()) {
        throw ConsistencyError("zone '" + z + "' not in the declared zone set");
      }
    }
    zones_ = std::move(*zones);
  } else {
    zones_.assign(zone_set.begin(), zone_set.end());
  }
  years_ = sort_years(std::move(years));
}

std::size_t MetDataset::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(rows_.begin(), rows_.end(), [](const auto& r) { return !r.yield; }));
}

const std::string& MetDataset::zone_of(const std::string& location) const {
  auto it = location_zone_.find(location);
  if (it == location_zone_.end()) throw Error("unknown location '" + location + "'");
  return it->second;
}

MetDataset MetDataset::subset_years(const std::vector<std::string>& years) const {
  std::set<std::string> keep(years.begin(), years.end());
  std::vector<ObservationRow> rows;
  for (const auto& r : rows_) {
    if (keep.count(r.year)) rows.push_back(r);
  }
  return MetDataset(std::move(rows), zones_);
}

MetDataset load_met_csv(const std::filesystem::path& path, const CsvSchema& schema,
                        LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name, bool required) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw SchemaError(path.string() + ": missing column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int c_year = column(schema.year, true);
  const int c_zone = column(schema.zone, true);
  const int c_loc = column(schema.location, true);
  const int c_gen = column(schema.genotype, true);
  const int c_rep = column(schema.replicate, true);
  const int c_yield = column(schema.yield, true);
  std::vector<std::pair<int, std::string>> filters;
  for (const auto& [col, value] : schema.filters) filters.emplace_back(column(col, true), value);

  LoadReport rep;
  std::vector<ObservationRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    ++rep.rows_read;
    bool keep = true;
    for (const auto& [col, value] : filters) keep = keep && f[col] == value;
    if (!keep) {
      ++rep.rows_filtered;
      continue;
    }
    ObservationRow r;
    r.year = f[c_year];
    r.zone = f[c_zone];
    r.location = f[c_loc];
    r.genotype = f[c_gen];
    const auto rep_v = parse_double(f[c_rep]);
    if (!rep_v || *rep_v != std::floor(*rep_v)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad replicate '" +
                       f[c_rep] + "'");
    }
    r.replicate = static_cast<int>(*rep_v);
    if (!is_missing_token(f[c_yield])) {
      const auto y = parse_double(f[c_yield]);
      if (!y || !std::isfinite(*y)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric yield '" +
                         f[c_yield] + "'");
      }
      r.yield = *y;
    } else {
      ++rep.missing_yield;
    }
    rows.push_back(std::move(r));
  }
  if (!rows.empty() &&
      static_cast<double>(rep.missing_yield) > schema.max_missing_fraction * rows.size()) {
    throw ConsistencyError(path.string() + ": " + std::to_string(rep.missing_yield) +
                           " missing yields exceed the allowed fraction");
  }
  if (report) *report = rep;
  return MetDataset(std::move(rows));
}

void write_met_csv(const MetDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "year,zone,location,genotype,replicate,yield\n";
  char buf[64];
  for (const auto& r : data.rows()) {
    out << csv_escape(r.year) << ',' << csv_escape(r.zone) << ',' << csv_escape(r.location) << ','
        << csv_escape(r.genotype) << ',' << r.replicate << ',';
    if (r.yield) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), *r.yield);
      out.write(buf, p - buf);
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

std::string EnvironmentIndex::label(std::size_t e) const {
  return environments.at(e).year + ":" + environments.at(e).location;
}

EnvironmentIndex index_environments(const MetDataset& data) {
  const auto& years = data.years();
  std::map<std::string, std::size_t> year_rank;
  for (std::size_t i = 0; i < years.size(); ++i) year_rank[years[i]] = i;

  std::set<std::pair<std::size_t, std::string>> keys;
  for (const auto& r : data.rows()) {
    if (r.yield) keys.emplace(year_rank.at(r.year), r.location);
  }
  EnvironmentIndex idx;
  std::map<std::pair<std::size_t, std::string>, std::int32_t> pos;
  for (const auto& k : keys) {
    pos[k] = static_cast<std::int32_t>(idx.environments.size());
    idx.environments.push_back({years[k.first], k.second});
  }
  idx.counts.assign(idx.environments.size(), 0);
  idx.row_env.reserve(data.size());
  for (const auto& r : data.rows()) {
    if (!r.yield) {
      idx.row_env.push_back(-1);
      continue;
    }
    const auto e = pos.at({year_rank.at(r.year), r.location});
    idx.row_env.push_back(e);
    ++idx.counts[e];
  }
  return idx;
}

WindowPlan default_window_plan() { return WindowPlan{{8, 5, 3, 3, 3}}; }

std::vector<MetDataset> partition_windows(const MetDataset& data, const WindowPlan& plan) {
  const auto& counts = plan.window_year_counts;
  if (counts.empty()) throw PlanError("window plan is empty");
  long total = 0;
  for (int c : counts) {
    if (c < 2) throw PlanError("each window needs at least two years");
    total += c;
  }
  if (total != static_cast<long>(data.years().size())) {
    throw PlanError("window plan covers " + std::to_string(total) + " years but the dataset has " +
                    std::to_string(data.years().size()));
  }
  std::vector<MetDataset> windows;
  std::size_t offset = 0;
  for (int c : counts) {
    std::vector<std::string> ys(data.years().begin() + offset, data.years().begin() + offset + c);
    offset += c;
    windows.push_back(data.subset_years(ys));
  }
  return windows;
}

}  // namespace metbayes::data
