#include "doctest.h"

#include <algorithm>
#include <random>

#include "metbayes/model_build.hpp"
#include "support.hpp"

using namespace metbayes;
using model::Effect;

namespace {
int k(Effect e) { return static_cast<int>(e); }
}

TEST_CASE("level counts follow the nesting of the simulated design") {
  const auto spec = support::small_spec(3);
  const auto d = sim::simulate_dataset(spec).data;
  const auto m = model::build_design(d);
  const std::size_t Y = 3, Z = 3, L = 2, G = 6, R = 2;
  CHECK(m.n() == Y * Z * L * G * R);
  CHECK(m.p() == Z);
  CHECK(m.fixed_names == std::vector<std::string>{"mu", "zone[Z02]", "zone[Z03]"});
  CHECK(m.Z[k(Effect::year)].levels == Y);
  CHECK(m.Z[k(Effect::zone_year)].levels == Z * Y);
  CHECK(m.Z[k(Effect::zone_loc_year)].levels == Z * L * Y);
  CHECK(m.Z[k(Effect::zone_loc_rep_year)].levels == Z * L * Y * R);
  CHECK(m.Z[k(Effect::gen_year)].levels == G * Y);
  CHECK(m.Z[k(Effect::gen_zone_year)].levels == G * Z * Y);
  CHECK(m.Z[k(Effect::gen_zone_loc_year)].levels == G * Z * L * Y);
  CHECK(m.Z[model::kGenZone].levels == G * Z);
  CHECK(m.environment_count() == Y * Z * L);
  CHECK(m.layout.total() == m.layout.offsets[model::kEffectCount]);
  CHECK(m.warnings.empty());
}

TEST_CASE("incidence matrices are one-hot and X uses treatment coding") {
  const auto d = sim::simulate_dataset(support::small_spec(2)).data;
  const auto m = model::build_design(d);
  for (int e = 0; e < model::kEffectCount; ++e) {
    const Eigen::MatrixXd z = m.Z[e].dense();
    CHECK(z.rows() == static_cast<Eigen::Index>(m.n()));
    CHECK((z.rowwise().sum().array() == 1.0).all());
    // every level is used by some row
    CHECK((z.colwise().sum().array() > 0.0).all());
  }
  CHECK((m.X.col(0).array() == 1.0).all());
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto& row = d.rows()[m.source_row[i]];
    for (std::size_t z = 1; z < m.zone_count(); ++z) {
      CHECK(m.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(z)) ==
            (row.zone == m.zones[z] ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("gen_zone levels are genotype-major") {
  const auto d = sim::simulate_dataset(support::small_spec(2)).data;
  const auto m = model::build_design(d);
  const auto& labels = m.layout.level_labels[model::kGenZone];
  REQUIRE(labels.size() == m.genotype_count() * m.zone_count());
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto& row = d.rows()[m.source_row[i]];
    const auto g = std::find(m.genotypes.begin(), m.genotypes.end(), row.genotype) - m.genotypes.begin();
    const auto z = std::find(m.zones.begin(), m.zones.end(), row.zone) - m.zones.begin();
    CHECK(m.Z[model::kGenZone].level_of_row[i] == g * static_cast<long>(m.zone_count()) + z);
  }
}

TEST_CASE("column layout does not depend on row order") {
  const auto d = sim::simulate_dataset(support::small_spec(3)).data;
  auto rows = d.rows();
  std::mt19937_64 rng(5);
  std::shuffle(rows.begin(), rows.end(), rng);
  const data::MetDataset shuffled(rows, d.zones());
  const auto a = model::build_design(d);
  const auto b = model::build_design(shuffled);
  for (int e = 0; e < model::kEffectCount; ++e) CHECK(a.layout.level_labels[e] == b.layout.level_labels[e]);
  CHECK(a.env_index.environments == b.env_index.environments);
  CHECK(model::layout_to_json(a.layout) == model::layout_to_json(b.layout));
}

TEST_CASE("missing yields are dropped and unobserved zones are warned about") {
  auto rows = sim::simulate_dataset(support::small_spec(2)).data.rows();
  rows[0].yield.reset();
  std::vector<data::ObservationRow> kept;
  for (const auto& r : rows)
    if (r.zone != "Z03") kept.push_back(r);
  const data::MetDataset d(kept, std::vector<std::string>{"Z01", "Z02", "Z03"});
  const auto m = model::build_design(d);
  CHECK(m.n() == kept.size() - 1);
  CHECK(std::find(m.source_row.begin(), m.source_row.end(), 0u) == m.source_row.end());
  CHECK_FALSE(m.warnings.empty());
}
