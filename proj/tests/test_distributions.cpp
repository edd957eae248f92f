#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "metbayes/distributions.hpp"
#include "metbayes/errors.hpp"
#include "support.hpp"

using namespace metbayes;
using namespace metbayes::dist;

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(InvGammaParams({0.0, 1.0}).validate(), ParameterError);
  CHECK_THROWS_AS(InvGammaParams({1.0, -1.0}).validate(), ParameterError);
  InvWishartParams w{2.0, Eigen::MatrixXd::Identity(4, 4)};
  CHECK_THROWS_AS(w.validate(), ParameterError);  // dof <= Z - 1
  w.dof = 3.5;
  CHECK_NOTHROW(w.validate());
  w.scale(0, 1) = 5.0;
  w.scale(1, 0) = 5.0;
  CHECK_THROWS_AS(w.validate(), ParameterError);
  CHECK_THROWS_AS(SpdMatrix(Eigen::MatrixXd::Zero(2, 2)), DomainError);
}

TEST_CASE("inverse gamma sampler matches the closed-form CDF") {
  Rng rng(3);
  const InvGammaParams p{4.0, 2.0};
  std::vector<double> xs(20000);
  for (auto& x : xs) x = sample_inv_gamma(p, rng);
  for (double x : xs) REQUIRE(x > 0.0);
  const double d = support::ks_statistic(xs, [&](double x) { return support::inv_gamma_cdf(x, p); });
  CHECK(d < 0.015);
}

TEST_CASE("inverse Wishart sampler: mean and SPD draws") {
  Rng rng(4);
  Eigen::MatrixXd s(3, 3);
  s << 2, 0.5, 0.1, 0.5, 1, 0.2, 0.1, 0.2, 1.5;
  const InvWishartParams p{12.0, s};
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 3);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample_inv_wishart(p, rng);
    REQUIRE(SpdMatrix::is_spd(x.matrix()));
    mean += x.matrix();
  }
  mean /= n;
  const Eigen::MatrixXd expect = p.mean();
  CHECK((mean - expect).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("multivariate normal: moments and canonical form") {
  Rng rng(5);
  Eigen::MatrixXd cov(2, 2);
  cov << 4, 0, 0, 9;
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2), sq = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    const auto x = sample_mvn(mu, cov, rng);
    sum += x;
    sq += x.cwiseAbs2();
  }
  const Eigen::VectorXd m = sum / n;
  const Eigen::VectorXd sd = (sq / n - m.cwiseAbs2()).cwiseSqrt();
  CHECK(std::abs(m(0)) < 3 * 2 / std::sqrt(n));
  CHECK(std::abs(m(1)) < 3 * 3 / std::sqrt(n));
  CHECK(sd(0) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(sd(1) == doctest::Approx(3.0).epsilon(0.01));

  Eigen::MatrixXd prec(2, 2);
  prec << 2, 0.5, 0.5, 1;
  const Eigen::VectorXd h(Eigen::Vector2d(1.0, -1.0));
  Eigen::VectorXd mean;
  sample_mvn_canonical(prec, h, rng, &mean);
  CHECK((prec * mean - h).norm() < 1e-12);
}

TEST_CASE("jittered Cholesky rescues a PSD matrix and gives up on an indefinite one") {
  Eigen::MatrixXd psd = Eigen::MatrixXd::Ones(3, 3);
  CHECK(jittered_cholesky(psd).info() == Eigen::Success);
  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(jittered_cholesky(bad), NumericalError);
}

TEST_CASE("log densities agree with direct formulas") {
  const InvGammaParams p{3.0, 2.0};
  const double x = 0.7;
  const double direct = std::log(std::pow(2.0, 3.0) / std::tgamma(3.0) * std::pow(x, -4.0) * std::exp(-2.0 / x));
  CHECK(inv_gamma_logpdf(x, p) == doctest::Approx(direct).epsilon(1e-12));
  CHECK_THROWS_AS(inv_gamma_logpdf(-1.0, p), DomainError);

  // 1x1 inverse Wishart(v, s) is inverse gamma(v/2, s/2).
  Eigen::MatrixXd x1(1, 1), s1(1, 1);
  x1 << 0.8;
  s1 << 1.4;
  CHECK(inv_wishart_logpdf(x1, {5.0, s1}) ==
        doctest::Approx(inv_gamma_logpdf(0.8, {2.5, 0.7})).epsilon(1e-12));
  CHECK(log_multivariate_gamma(2.5, 1) == doctest::Approx(std::lgamma(2.5)));
  CHECK(log_multivariate_gamma(3.0, 2) ==
        doctest::Approx(0.5 * std::log(std::numbers::pi) + std::lgamma(3.0) + std::lgamma(2.5)));
}

TEST_CASE("inverse gamma MLE recovers parameters and is a grid minimum") {
  Rng rng(6);
  const InvGammaParams truth{10.0, 1.0};
  std::vector<double> xs(20000);
  for (auto& x : xs) x = sample_inv_gamma(truth, rng);
  const auto fit = fit_inv_gamma_mle(xs);
  CHECK(fit.shape == doctest::Approx(10.0).epsilon(0.05));
  CHECK(fit.scale == doctest::Approx(1.0).epsilon(0.05));
  const double best = inv_gamma_nll(xs, fit);
  for (double da : {-0.02, 0.0, 0.02})
    for (double db : {-0.002, 0.0, 0.002}) CHECK(inv_gamma_nll(xs, {fit.shape + da, fit.scale + db}) >= best - 1e-6);
}

TEST_CASE("inverse gamma MLE errors") {
  CHECK_THROWS_AS(fit_inv_gamma_mle(std::vector<double>(5, 1.0)), DegenerateSampleError);
  CHECK_THROWS_AS(fit_inv_gamma_mle(std::vector<double>(20, 1.0)), DegenerateSampleError);
  std::vector<double> neg(20, 1.0);
  neg[3] = -1.0;
  CHECK_THROWS_AS(fit_inv_gamma_mle(neg), DomainError);
}

TEST_CASE("inverse Wishart MLE recovers dof and scale") {
  Rng rng(7);
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(3, 3, 0.3);
  s.diagonal().setConstant(1.0);
  const InvWishartParams truth{40.0, s};
  std::vector<Eigen::MatrixXd> xs;
  for (int i = 0; i < 5000; ++i) xs.push_back(sample_inv_wishart(truth, rng).matrix());
  const auto fit = fit_inv_wishart_mle(xs);
  CHECK(std::abs(fit.dof - 40.0) < 2.0);
  CHECK((fit.scale - s).cwiseAbs().maxCoeff() < 0.1);
  const double best = inv_wishart_nll(xs, fit);
  for (double dv : {-0.2, 0.2}) {
    InvWishartParams q = fit;
    q.dof += dv;
    q.scale *= q.dof / fit.dof;
    CHECK(inv_wishart_nll(xs, q) >= best - 1e-6);
  }
  CHECK(fit.dof > 3 + 1);
}

TEST_CASE("inverse Wishart MLE errors") {
  std::vector<Eigen::MatrixXd> few(3, Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(fit_inv_wishart_mle(few), DegenerateSampleError);
  std::vector<Eigen::MatrixXd> same(10, Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(fit_inv_wishart_mle(same), DegenerateSampleError);
  std::vector<Eigen::MatrixXd> mixed(10, Eigen::MatrixXd::Identity(3, 3));
  mixed[2] = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(fit_inv_wishart_mle(mixed), ParameterError);
}
