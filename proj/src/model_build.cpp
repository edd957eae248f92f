#include "metbayes/model_build.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "json.hpp"

#include "metbayes/errors.hpp"

namespace metbayes::model {
namespace {

constexpr std::array<std::string_view, kEffectCount> kVarNames = {
    "var_year",           "var_zone_year",         "var_zone_loc_year",
    "var_zone_loc_rep_year", "var_gen_year",       "var_gen_zone_year",
    "var_gen_zone_loc_year", "var_gen_zone",
};

constexpr std::array<std::string_view, kEffectCount> kEffectNames = {
    "year",     "zone_year",     "zone_loc_year",     "zone_loc_rep_year",
    "gen_year", "gen_zone_year", "gen_zone_loc_year", "gen_zone",
};

std::string padded(std::size_t rank) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%012zu", rank);
  return buf;
}

// Collects the observed levels of one factor combination. Keys sort by
// (year rank, labels) so the column order does not depend on row order.
class LevelBuilder {
 public:
  void add(std::vector<std::string> sort_key, std::string label) {
    keys_.emplace(std::move(sort_key), std::move(label));
  }
  void finalize() {
    std::int32_t i = 0;
    for (auto& [k, v] : keys_) {
      index_[k] = i++;
      labels_.push_back(v);
    }
  }
  std::int32_t at(const std::vector<std::string>& key) const { return index_.at(key); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::map<std::vector<std::string>, std::string> keys_;
  std::map<std::vector<std::string>, std::int32_t> index_;
  std::vector<std::string> labels_;
};

}  // namespace

std::string_view variance_name(int effect) { return kVarNames.at(effect); }
std::string_view effect_name(int effect) { return kEffectNames.at(effect); }

Eigen::MatrixXd Incidence::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                            static_cast<Eigen::Index>(levels));
  for (std::size_t i = 0; i < rows(); ++i) m(static_cast<Eigen::Index>(i), level_of_row[i]) = 1.0;
  return m;
}

nlohmann::json layout_to_json(const EffectLayout& layout) {
  nlohmann::json effects = nlohmann::json::array();
  for (int k = 0; k < kEffectCount; ++k) {
    effects.push_back({
        {"effect", std::string(effect_name(k))},
        {"variance", std::string(variance_name(k))},
        {"offset", layout.offsets[k]},
        {"levels", layout.level_labels[k]},
    });
  }
  return {{"total", layout.total()}, {"effects", std::move(effects)}};
}

ModelMatrices build_design(const data::MetDataset& data) {
  ModelMatrices m;
  m.zones = data.zones();
  m.env_index = data::index_environments(data);

  std::map<std::string, std::size_t> year_rank;
  for (std::size_t i = 0; i < data.years().size(); ++i) year_rank[data.years()[i]] = i;
  std::map<std::string, std::size_t> zone_rank;
  for (std::size_t i = 0; i < m.zones.size(); ++i) zone_rank[m.zones[i]] = i;

  std::vector<std::size_t> obs;
  std::vector<std::string> genotypes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.rows()[i].yield) {
      obs.push_back(i);
      genotypes.push_back(data.rows()[i].genotype);
    }
  }
  std::sort(genotypes.begin(), genotypes.end());
  genotypes.erase(std::unique(genotypes.begin(), genotypes.end()), genotypes.end());
  m.genotypes = genotypes;
  std::map<std::string, std::size_t> gen_rank;
  for (std::size_t i = 0; i < genotypes.size(); ++i) gen_rank[genotypes[i]] = i;

  const std::size_t n = obs.size();
  const std::size_t nz = m.zones.size();
  if (n == 0) throw ConsistencyError("dataset has no observed yields");

  // Sort keys per effect; the label is what appears in output columns.
  auto keys = [&](const data::ObservationRow& r, int k) -> std::vector<std::string> {
    const std::string yr = padded(year_rank.at(r.year));
    const std::string zr = padded(zone_rank.at(r.zone));
    const std::string gr = padded(gen_rank.at(r.genotype));
    switch (static_cast<Effect>(k)) {
      case Effect::year: return {yr};
      case Effect::zone_year: return {yr, zr};
      case Effect::zone_loc_year: return {yr, zr, r.location};
      case Effect::zone_loc_rep_year: return {yr, zr, r.location, padded(r.replicate)};
      case Effect::gen_year: return {yr, gr};
      case Effect::gen_zone_year: return {yr, zr, gr};
      case Effect::gen_zone_loc_year: return {yr, zr, r.location, gr};
      case Effect::gen_zone: return {gr, zr};
    }
    return {};
  };
  auto label = [](const data::ObservationRow& r, int k) -> std::string {
    switch (static_cast<Effect>(k)) {
      case Effect::year: return r.year;
      case Effect::zone_year: return r.zone + ":" + r.year;
      case Effect::zone_loc_year: return r.zone + ":" + r.location + ":" + r.year;
      case Effect::zone_loc_rep_year:
        return r.zone + ":" + r.location + ":" + std::to_string(r.replicate) + ":" + r.year;
      case Effect::gen_year: return r.genotype + ":" + r.year;
      case Effect::gen_zone_year: return r.genotype + ":" + r.zone + ":" + r.year;
      case Effect::gen_zone_loc_year:
        return r.genotype + ":" + r.zone + ":" + r.location + ":" + r.year;
      case Effect::gen_zone: return r.genotype + ":" + r.zone;
    }
    return {};
  };

  std::array<LevelBuilder, kEffectCount> builders;
  for (std::size_t i : obs) {
    const auto& r = data.rows()[i];
    for (int k = 0; k < kScalarEffectCount; ++k) builders[k].add(keys(r, k), label(r, k));
  }
  // gen_zone spans all genotype x zone pairs, genotype-major.
  for (std::size_t g = 0; g < genotypes.size(); ++g) {
    for (std::size_t z = 0; z < nz; ++z) {
      builders[kGenZone].add({padded(g), padded(z)}, genotypes[g] + ":" + m.zones[z]);
    }
  }
  for (auto& b : builders) b.finalize();

  m.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nz));
  m.fixed_names.push_back("mu");
  for (std::size_t z = 1; z < nz; ++z) m.fixed_names.push_back("zone[" + m.zones[z] + "]");
  m.y.resize(static_cast<Eigen::Index>(n));
  for (int k = 0; k < kEffectCount; ++k) {
    m.Z[k].levels = builders[k].labels().size();
    m.Z[k].level_of_row.reserve(n);
  }
  std::vector<std::size_t> zone_obs(nz, 0);
  for (std::size_t row = 0; row < n; ++row) {
    const auto& r = data.rows()[obs[row]];
    const auto i = static_cast<Eigen::Index>(row);
    const std::size_t z = zone_rank.at(r.zone);
    m.X(i, 0) = 1.0;
    if (z > 0) m.X(i, static_cast<Eigen::Index>(z)) = 1.0;
    ++zone_obs[z];
    for (int k = 0; k < kEffectCount; ++k) {
      m.Z[k].level_of_row.push_back(builders[k].at(keys(r, k)));
    }
    m.y(i) = *r.yield;
    m.row_env.push_back(m.env_index.row_env[obs[row]]);
    m.source_row.push_back(obs[row]);
  }

  std::size_t offset = 0;
  for (int k = 0; k < kEffectCount; ++k) {
    m.layout.level_labels[k] = builders[k].labels();
    m.layout.offsets[k] = offset;
    offset += builders[k].labels().size();
  }
  m.layout.offsets[kEffectCount] = offset;

  for (std::size_t z = 0; z < nz; ++z) {
    if (zone_obs[z] == 0) {
      m.warnings.push_back("zone '" + m.zones[z] + "' has no observations; X is rank deficient");
    }
  }
  for (int k = 0; k < kScalarEffectCount; ++k) {
    if (m.Z[k].levels < 2) {
      m.warnings.push_back("effect '" + std::string(effect_name(k)) +
                           "' has a single level; its variance is informed by the prior only");
    }
  }
  if (nz < 2) m.warnings.push_back("single zone: zone effects reduce to the intercept");
  return m;
}

}  // namespace metbayes::model
