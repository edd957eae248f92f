#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "metbayes/errors.hpp"
#include "metbayes/met_data.hpp"

using namespace metbayes;
using namespace metbayes::data;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("metbayes_test_" + name);
  std::ofstream(p) << text;
  return p;
}

const char* kSmall =
    "year,season,zone,location,genotype,replicate,yield\n"
    "2002,Winter,N,Dhaka,G1,1,5.1\n"
    "2002,Winter,N,Dhaka,G2,1,4.8\n"
    "2001,Winter,S,Barisal,G1,1,NA\n"
    "2001,Aus,S,Barisal,G2,1,3.9\n"
    "2001,Winter,S,Barisal,G2,2,4.0\n";

}  // namespace

TEST_CASE("load_met_csv parses rows, filters and missing yields") {
  const auto p = write_tmp("small.csv", kSmall);
  CsvSchema schema;
  schema.filters = {{"season", "Winter"}};
  schema.max_missing_fraction = 0.5;
  LoadReport rep;
  const auto d = load_met_csv(p, schema, &rep);
  CHECK(rep.rows_read == 5);
  CHECK(rep.rows_filtered == 1);
  CHECK(rep.missing_yield == 1);
  CHECK(d.size() == 4);
  CHECK(d.missing_count() == 1);
  CHECK(d.years() == std::vector<std::string>{"2001", "2002"});
  CHECK(d.zones() == std::vector<std::string>{"N", "S"});
  CHECK(d.zone_of("Dhaka") == "N");
}

TEST_CASE("load_met_csv errors") {
  SUBCASE("missing column") {
    const auto p = write_tmp("nocol.csv", "year,zone,location,genotype,yield\n2001,N,A,G1,1\n");
    CHECK_THROWS_AS(load_met_csv(p), SchemaError);
  }
  SUBCASE("non-numeric yield") {
    const auto p = write_tmp("bad.csv",
                             "year,zone,location,genotype,replicate,yield\n2001,N,A,G1,1,abc\n");
    CHECK_THROWS_AS(load_met_csv(p), ParseError);
  }
  SUBCASE("too many missing yields") {
    const auto p = write_tmp("miss.csv",
                             "year,zone,location,genotype,replicate,yield\n"
                             "2001,N,A,G1,1,NA\n2001,N,A,G2,1,3\n");
    CHECK_THROWS_AS(load_met_csv(p), ConsistencyError);
  }
  SUBCASE("location in two zones") {
    const auto p = write_tmp("twozone.csv",
                             "year,zone,location,genotype,replicate,yield\n"
                             "2001,N,A,G1,1,1\n2001,S,A,G2,1,3\n");
    CHECK_THROWS_AS(load_met_csv(p), ConsistencyError);
  }
}

TEST_CASE("quoted fields and custom column names") {
  const auto p = write_tmp("quoted.csv",
                           "Year,Zone,Loc,Line,Rep,Yld\n"
                           "2001,N,\"Dhaka, north\",G1,1,4.5\n");
  CsvSchema s;
  s.year = "Year";
  s.zone = "Zone";
  s.location = "Loc";
  s.genotype = "Line";
  s.replicate = "Rep";
  s.yield = "Yld";
  const auto d = load_met_csv(p, s);
  REQUIRE(d.size() == 1);
  CHECK(d.rows()[0].location == "Dhaka, north");
  CHECK(*d.rows()[0].yield == 4.5);
}

TEST_CASE("write then load round-trips") {
  const auto p = write_tmp("small2.csv", kSmall);
  CsvSchema s;
  s.max_missing_fraction = 0.5;
  const auto d = load_met_csv(p, s);
  const auto q = fs::temp_directory_path() / "metbayes_test_roundtrip.csv";
  write_met_csv(d, q);
  const auto e = load_met_csv(q, s);
  CHECK(e.rows() == d.rows());
}

TEST_CASE("sort_years is numeric when possible") {
  CHECK(sort_years({"2010", "999", "2010", "2001"}) == std::vector<std::string>{"999", "2001", "2010"});
  CHECK(sort_years({"b", "a10", "a9"}) == std::vector<std::string>{"a10", "a9", "b"});
}

TEST_CASE("environment index is year-major and skips missing rows") {
  std::vector<ObservationRow> rows{
      {"2002", "N", "B", "G1", 1, 1.0}, {"2001", "N", "B", "G1", 1, 1.0},
      {"2001", "N", "A", "G1", 1, 1.0}, {"2001", "N", "A", "G2", 1, std::nullopt}};
  const MetDataset d(rows);
  const auto idx = index_environments(d);
  REQUIRE(idx.size() == 3);
  CHECK(idx.label(0) == "2001:A");
  CHECK(idx.label(1) == "2001:B");
  CHECK(idx.label(2) == "2002:B");
  CHECK(idx.row_env == std::vector<std::int32_t>{2, 1, 0, -1});
  CHECK(idx.counts == std::vector<std::size_t>{1, 1, 1});
}

TEST_CASE("partition_windows") {
  std::vector<ObservationRow> rows;
  for (int y = 2001; y <= 2022; ++y) rows.push_back({std::to_string(y), "N", "A", "G1", 1, 1.0});
  rows.push_back({"2001", "S", "B", "G1", 1, 1.0});
  const MetDataset d(rows);
  const auto w = partition_windows(d, default_window_plan());
  REQUIRE(w.size() == 5);
  CHECK(w[0].years().size() == 8);
  CHECK(w[0].years().front() == "2001");
  CHECK(w[4].years().back() == "2022");
  // Later windows keep the parent zone set even if a zone is unobserved.
  CHECK(w[4].zones() == d.zones());

  std::size_t total = 0;
  for (const auto& x : w) total += x.size();
  CHECK(total == d.size());

  CHECK_THROWS_AS(partition_windows(d, WindowPlan{{8, 5, 3, 3}}), PlanError);
  CHECK_THROWS_AS(partition_windows(d, WindowPlan{{}}), PlanError);
  CHECK_THROWS_AS(partition_windows(d, WindowPlan{{21, 1}}), PlanError);
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(MetDataset({{"2001", "N", "A", "", 1, 1.0}}), ConsistencyError);
  CHECK_THROWS_AS(MetDataset({{"2001", "N", "A", "G", 0, 1.0}}), ConsistencyError);
  CHECK_THROWS_AS(MetDataset({{"2001", "N", "A", "G", 1, std::nan("")}}), ConsistencyError);
}
