#include "doctest.h"

#include "metbayes/errors.hpp"
#include "metbayes/simulate.hpp"

using namespace metbayes;
using namespace metbayes::sim;

TEST_CASE("balanced layout and labels") {
  SimSpec s;
  s.years = 2;
  s.zones = 3;
  s.locations_per_zone = 2;
  s.genotypes = 5;
  s.replicates = 2;
  const auto out = simulate_dataset(s);
  const auto& d = out.data;
  CHECK(d.size() == 2u * 3 * 2 * 5 * 2);
  CHECK(d.missing_count() == 0);
  CHECK(d.zones() == std::vector<std::string>{"Z01", "Z02", "Z03"});
  CHECK(d.years() == std::vector<std::string>{"2001", "2002"});
  CHECK(d.zone_of("Z02L2") == "Z02");
  CHECK(out.truth.sigma2_e.size() == 2u * 3 * 2);
  CHECK(out.truth.effects[model::kGenZone].size() == 5u * 3);
  CHECK(out.truth.effects[static_cast<int>(model::Effect::gen_zone_loc_year)].size() == 2u * 3 * 2 * 5);
}

TEST_CASE("zero variances reproduce the fixed part exactly") {
  SimSpec s;
  s.years = 2;
  s.zones = 2;
  s.genotypes = 3;
  s.sigma2.fill(0.0);
  s.sigma_z = Eigen::MatrixXd::Zero(2, 2);
  s.residual = 0.0;
  s.zeta = {0.0, 1.5};
  for (const auto& r : simulate_dataset(s).data.rows()) {
    CHECK(*r.yield == s.mu + (r.zone == "Z02" ? 1.5 : 0.0));
  }
}

TEST_CASE("same seed, same data; different seed, different data") {
  SimSpec s;
  s.years = 2;
  s.genotypes = 4;
  const auto a = simulate_dataset(s).data.rows();
  const auto b = simulate_dataset(s).data.rows();
  CHECK(a == b);
  s.seed = 2;
  CHECK(simulate_dataset(s).data.rows() != a);
}

TEST_CASE("genotype-by-zone draws have covariance Sigma_Z") {
  SimSpec s;
  s.years = 1;
  s.zones = 3;
  s.locations_per_zone = 1;
  s.replicates = 1;
  s.genotypes = 20000;
  s.sigma_z = Eigen::MatrixXd(3, 3);
  s.sigma_z << 0.5, 0.2, 0.0, 0.2, 0.3, -0.1, 0.0, -0.1, 0.4;
  const auto t = simulate_dataset(s).truth;
  Eigen::MatrixXd a(s.genotypes, 3);
  int g = 0;
  for (const auto& [key, v] : t.effects[model::kGenZone]) {
    // keys are "Gxxxxx:Zyy", genotype-major in map order
    a(g / 3, g % 3) = v;
    ++g;
  }
  const Eigen::MatrixXd cov = a.transpose() * a / s.genotypes;
  CHECK((cov - s.sigma_z).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("residual prior draws per environment") {
  SimSpec s;
  s.years = 3;
  s.genotypes = 2;
  s.residual_prior = dist::InvGammaParams{5, 1};
  const auto t = simulate_dataset(s).truth;
  double lo = 1e9, hi = 0;
  for (const auto& [k, v] : t.sigma2_e) {
    CHECK(v > 0.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi > lo);
  CHECK(t.env_mean_var_resid() > 0.0);
}

TEST_CASE("spec validation and JSON") {
  SimSpec s;
  s.genotypes = 0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = SimSpec{};
  s.sigma2[2] = -1;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = SimSpec{};
  s.sigma_z = -Eigen::MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = SimSpec{};
  s.zeta = {1.0};
  CHECK_THROWS_AS(s.validate(), ParameterError);

  s = SimSpec{};
  s.years = 9;
  s.residual_prior = dist::InvGammaParams{4, 2};
  const auto back = SimSpec::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());
  CHECK(back.years == 9);
  CHECK_THROWS_AS(SimSpec::from_json(nlohmann::json{{"years", "many"}}), ConfigError);

  SimSpec small;
  small.years = 1;
  small.genotypes = 2;
  const auto j = simulate_dataset(small).truth.to_json();
  CHECK(j["schema"] == "metbayes.truth/1");
  CHECK(j["effects"].contains("gen_zone"));
}
