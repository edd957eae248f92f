#include "doctest.h"

#include <sstream>

#include "metbayes/errors.hpp"
#include "metbayes/gibbs.hpp"
#include "metbayes/kernels.hpp"
#include "support.hpp"

using namespace metbayes;
using namespace metbayes::gibbs;

namespace {

struct Fixture {
  model::ModelMatrices m;
  PriorSet priors;
  ParameterState s;

  Fixture() {
    m = model::build_design(sim::simulate_dataset(support::small_spec(3)).data);
    priors = support::default_priors(m);
    SamplerConfig cfg;
    Rng rng(99);
    s = initial_state(m, priors, cfg, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < s.beta.size(); ++i) s.beta(i) = n(rng);
    for (Eigen::Index e = 0; e < s.sigma2_e.size(); ++e) s.sigma2_e(e) = 0.2 + 0.1 * e;
  }

  Eigen::MatrixXd rinv() const {
    Eigen::VectorXd w(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) w(i) = 1.0 / s.sigma2_e(m.row_env[i]);
    return w.asDiagonal();
  }

  Eigen::VectorXd fit_without(int skip) const {
    Eigen::VectorXd f = m.X * s.beta;
    for (int k = 0; k < model::kEffectCount; ++k) {
      if (k == skip) continue;
      f += m.Z[k].dense() * s.effect(m, k);
    }
    return f;
  }
};

SamplerConfig short_cfg() {
  SamplerConfig c;
  c.n_chains = 2;
  c.n_iter = 60;
  c.burn_in = 20;
  c.thin = 3;
  c.seed = 42;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("conjugate parameter updates on hand cases") {
  CHECK(scalar_posterior({5, 1}, Eigen::VectorXd::Zero(10)) == dist::InvGammaParams{10, 1});
  CHECK(scalar_posterior({2, 3}, Eigen::Vector4d(1, 1, 0, 0)) == dist::InvGammaParams{4, 4});
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(4, 4);
  s(0, 1) = s(1, 0) = 0.3;
  const auto w = sigma_z_posterior({10, s}, Eigen::VectorXd::Zero(30 * 4), 4);
  CHECK(w.dof == 40);
  CHECK(w.scale == s);
  CHECK(residual_posterior({10, 1}, 6, 3.0) == dist::InvGammaParams{13, 2.5});
  CHECK(residual_posterior({10, 1}, 6, 0.0) == dist::InvGammaParams{13, 1});
}

TEST_CASE("fixed-effect conditional mean equals the GLS solution") {
  Fixture f;
  Rng rng(1);
  Eigen::VectorXd mean;
  cond_fixed_effects(f.s, f.m, f.m.y, rng, &mean);
  const Eigen::MatrixXd r = f.rinv();
  Eigen::VectorXd ystar = f.m.y - f.fit_without(-1) + f.m.X * f.s.beta;
  const Eigen::VectorXd gls =
      (f.m.X.transpose() * r * f.m.X).ldlt().solve(f.m.X.transpose() * r * ystar);
  CHECK((mean - gls).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("random-effect conditionals equal the dense formula") {
  Fixture f;
  const Eigen::MatrixXd r = f.rinv();
  for (int k = 0; k < model::kEffectCount; ++k) {
    CAPTURE(k);
    Rng rng(10 + k);
    Eigen::VectorXd mean;
    cond_random_effect(k, f.s, f.m, f.m.y, rng, &mean);
    const Eigen::MatrixXd z = f.m.Z[k].dense();
    const auto q = z.cols();
    Eigen::MatrixXd g_inv;
    if (k == model::kGenZone) {
      const Eigen::MatrixXd si = f.s.sigma_z.inverse();
      const auto zn = si.rows();
      g_inv = Eigen::MatrixXd::Zero(q, q);
      for (Eigen::Index g = 0; g < q / zn; ++g) g_inv.block(g * zn, g * zn, zn, zn) = si;
    } else {
      g_inv = Eigen::MatrixXd::Identity(q, q) / f.s.sigma2[k];
    }
    const Eigen::MatrixXd omega_inv = z.transpose() * r * z + g_inv;
    const Eigen::VectorXd yk = f.m.y - f.fit_without(k);
    const Eigen::VectorXd dense = omega_inv.ldlt().solve(z.transpose() * r * yk);
    CHECK((mean - dense).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("scalar random-effect draws have the conditional variance") {
  Fixture f;
  const int k = static_cast<int>(model::Effect::year);
  const Eigen::MatrixXd z = f.m.Z[k].dense();
  const Eigen::MatrixXd omega_inv =
      z.transpose() * f.rinv() * z + Eigen::MatrixXd::Identity(z.cols(), z.cols()) / f.s.sigma2[k];
  const double var0 = omega_inv.inverse()(0, 0);
  Rng rng(3);
  const int n = 20000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double x = cond_random_effect(k, f.s, f.m, f.m.y, rng)(0);
    s += x;
    ss += x * x;
  }
  const double v = ss / n - (s / n) * (s / n);
  CHECK(v == doctest::Approx(var0).epsilon(0.05));
}

TEST_CASE("variance conditionals are strictly positive") {
  Fixture f;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    for (int k = 0; k < model::kScalarEffectCount; ++k) {
      CHECK(cond_variance_scalar(k, f.s, f.m, f.priors.scalar[k], rng) > 0.0);
    }
    CHECK(cond_residual_env(0, f.s, f.m, f.m.y, f.priors.residual[0], rng) > 0.0);
    CHECK(dist::SpdMatrix::is_spd(cond_sigma_z(f.s, f.m, f.priors.wishart, rng).matrix()));
  }
}

TEST_CASE("run_chains: shape, determinism and thread invariance") {
  Fixture f;
  auto cfg = short_cfg();
  CHECK(cfg.retained_per_chain() == 14);
  const auto a = run_chains(f.m, f.m.y, f.priors, cfg);
  REQUIRE(a.chains.size() == 2);
  CHECK(a.chains[0].draws() == 14);
  CHECK(a.total_draws() == 28);
  CHECK(a.chains[0].sigma_z.cols() == 9);
  CHECK(a.chains[0].b.size() == 0);

  cfg.threads = 2;
  const auto b = run_chains(f.m, f.m.y, f.priors, cfg);
  std::ostringstream sa, sb;
  write_posterior_csv(a, sa);
  write_posterior_csv(b, sb);
  CHECK(sa.str() == sb.str());
  // Chains differ from each other.
  CHECK(a.chains[0].sigma2 != a.chains[1].sigma2);

  cfg.seed = 43;
  const auto c = run_chains(f.m, f.m.y, f.priors, cfg);
  CHECK(c.chains[0].sigma2 != a.chains[0].sigma2);
}

TEST_CASE("retained variance draws are positive and Sigma_Z draws SPD") {
  Fixture f;
  auto cfg = short_cfg();
  cfg.store_random_effects = true;
  const auto a = run_chains(f.m, f.m.y, f.priors, cfg);
  for (const auto& c : a.chains) {
    CHECK((c.sigma2.array() > 0.0).all());
    CHECK((c.sigma2_e.array() > 0.0).all());
    for (Eigen::Index r = 0; r < c.draws(); ++r) CHECK(dist::SpdMatrix::is_spd(c.sigma_z_draw(r)));
    CHECK(c.b.rows() == c.draws());
    CHECK(c.b.cols() == static_cast<Eigen::Index>(f.m.layout.total()));
    CHECK((c.b.colwise().mean().transpose() - c.b_mean).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("posterior CSV layout") {
  Fixture f;
  const auto a = run_chains(f.m, f.m.y, f.priors, short_cfg());
  std::ostringstream out;
  write_posterior_csv(a, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("chain,draw,mu,zone[Z02],zone[Z03],var_year,", 0) == 0);
  CHECK(header.find("\"Sigma_gen_zone[1,2]\"") != std::string::npos);
  CHECK(header.find("var_resid_env[18]") != std::string::npos);
  const auto names = a.column_names();
  CHECK(names.size() == 3 + 7 + 9 + 18);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == a.total_draws());
}

TEST_CASE("SIMD and scalar kernels give the same chain to rounding") {
  using kernels::Isa;
  Fixture f;
  auto cfg = short_cfg();
  cfg.n_iter = 8;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.n_chains = 1;
  const Isa before = kernels::active_isa();
  kernels::force_isa(Isa::scalar);
  const auto ref = run_chain(f.m, f.m.y, f.priors, cfg, 0);
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (!kernels::isa_available(isa)) continue;
    kernels::force_isa(isa);
    const auto c = run_chain(f.m, f.m.y, f.priors, cfg, 0);
    CHECK((c.sigma2 - ref.sigma2).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((c.beta - ref.beta).cwiseAbs().maxCoeff() < 1e-8);
  }
  kernels::force_isa(before);
}

TEST_CASE("single-effect model: Gibbs marginal matches the analytic posterior") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd y(20);
  for (auto& v : y) v = 0.7 * n(gen);
  const auto m = support::single_effect_model(y);
  auto priors = support::default_priors(m);
  priors.scalar[0] = {3.0, 0.5};
  priors.residual[0] = {1e12, 1e4};  // residual variance pinned at 1e-8
  SamplerConfig cfg;
  cfg.n_chains = 1;
  cfg.n_iter = 4000;
  cfg.burn_in = 100;
  cfg.thin = 1;
  cfg.seed = 5;
  const auto post = run_chains(m, m.y, priors, cfg);
  const dist::InvGammaParams exact{3.0 + 10.0, 0.5 + 0.5 * y.squaredNorm()};
  const double d = support::ks_statistic(post.merged_sigma2(0),
                                         [&](double x) { return support::inv_gamma_cdf(x, exact); });
  CHECK(d < 0.03);
}

TEST_CASE("configuration and input validation") {
  SamplerConfig c;
  c.n_iter = 10;
  c.burn_in = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SamplerConfig{};
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  Fixture f;
  auto p = f.priors;
  p.residual.pop_back();
  CHECK_THROWS_AS(p.validate(f.m), ParameterError);
  p = f.priors;
  p.wishart.scale = Eigen::MatrixXd::Identity(2, 2);
  p.wishart.dof = 5;
  CHECK_THROWS_AS(p.validate(f.m), ParameterError);
}
