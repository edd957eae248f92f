#include "metbayes/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "metbayes/detail/golden.hpp"
#include "metbayes/errors.hpp"

namespace metbayes::dist {
namespace {

constexpr int kJitterRetries = 10;
constexpr double kShapeLo = 1e-3;
constexpr double kShapeHi = 1e4;
constexpr double kDofHi = 1e4;
constexpr double kSearchTol = 1e-8;

bool all_equal(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

}  // namespace

void InvGammaParams::validate() const {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
    throw ParameterError("inverse gamma needs shape > 0 and scale > 0, got (" +
                         std::to_string(shape) + ", " + std::to_string(scale) + ")");
  }
}

double InvGammaParams::mean() const {
  return shape > 1.0 ? scale / (shape - 1.0) : std::numeric_limits<double>::infinity();
}

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : value_(std::move(m)) {
  if (value_.rows() != value_.cols() || value_.rows() == 0) {
    throw DomainError("SPD matrix must be square and non-empty");
  }
  if (!value_.isApprox(value_.transpose(), 1e-10)) throw DomainError("matrix is not symmetric");
  value_ = 0.5 * (value_ + value_.transpose());
  llt_.compute(value_);
  if (llt_.info() != Eigen::Success) throw DomainError("matrix is not positive definite");
}

Eigen::MatrixXd SpdMatrix::inverse() const {
  return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

double SpdMatrix::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd SpdMatrix::eigenvalues() const {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(value_, Eigen::EigenvaluesOnly)
      .eigenvalues();
}

bool SpdMatrix::is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-10)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success;
}

void InvWishartParams::validate() const {
  if (scale.rows() == 0 || scale.rows() != scale.cols()) {
    throw ParameterError("inverse Wishart scale must be square and non-empty");
  }
  if (!(dof > static_cast<double>(dim()) - 1.0) || !std::isfinite(dof)) {
    throw ParameterError("inverse Wishart needs dof > Z - 1, got dof = " + std::to_string(dof) +
                         " for Z = " + std::to_string(dim()));
  }
  if (!SpdMatrix::is_spd(scale)) throw ParameterError("inverse Wishart scale is not SPD");
}

Eigen::MatrixXd InvWishartParams::mean() const {
  return scale / (dof - static_cast<double>(dim()) - 1.0);
}

double sample_inv_gamma(const InvGammaParams& p, Rng& rng) {
  p.validate();
  std::gamma_distribution<double> gamma(p.shape, 1.0);
  // Gamma(shape, 1) can underflow to zero for tiny shapes; redraw.
  for (;;) {
    const double g = gamma(rng);
    if (g > 0.0) {
      const double x = p.scale / g;
      if (std::isfinite(x)) return x;
    }
  }
}

SpdMatrix sample_inv_wishart(const InvWishartParams& p, Rng& rng) {
  p.validate();
  const Eigen::Index z = p.dim();
  // Precision Wishart(dof, S^-1): W = (C A)(C A)^T with C = chol(S^-1).
  const Eigen::MatrixXd s_inv = SpdMatrix(p.scale).inverse();
  const Eigen::MatrixXd c = Eigen::LLT<Eigen::MatrixXd>(s_inv).matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(z, z);
  for (Eigen::Index i = 0; i < z; ++i) {
    std::gamma_distribution<double> chi2(0.5 * (p.dof - static_cast<double>(i)), 2.0);
    a(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Eigen::MatrixXd t = c * a;
  // X = W^-1 = T^-T T^-1
  const Eigen::MatrixXd t_inv =
      t.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(z, z));
  Eigen::MatrixXd x = t_inv.transpose() * t_inv;
  return SpdMatrix(0.5 * (x + x.transpose()));
}

Eigen::LLT<Eigen::MatrixXd> jittered_cholesky(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double dim = static_cast<double>(m.rows());
  double jitter = 1e-10 * std::abs(m.trace()) / dim;
  if (!(jitter > 0.0)) jitter = 1e-10;
  for (int attempt = 0; attempt < kJitterRetries; ++attempt, jitter *= 10.0) {
    Eigen::MatrixXd shifted = m;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("Cholesky factorization failed after jitter");
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ParameterError("sample_mvn: dimension mismatch");
  }
  const auto llt = jittered_cholesky(cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvn_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& h,
                                     Rng& rng, Eigen::VectorXd* mean_out) {
  const auto llt = jittered_cholesky(precision);
  Eigen::VectorXd mean = llt.solve(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(h.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  // P = L L^T, so L^-T z has covariance P^-1.
  Eigen::VectorXd draw = mean + llt.matrixU().solve(z);
  if (mean_out) *mean_out = std::move(mean);
  return draw;
}

double inv_gamma_logpdf(double x, const InvGammaParams& p) {
  p.validate();
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("inverse gamma density needs x > 0, got " + std::to_string(x));
  }
  return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) -
         p.scale / x;
}

double log_multivariate_gamma(double a, int p) {
  double s = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int j = 0; j < p; ++j) s += std::lgamma(a - 0.5 * j);
  return s;
}

double inv_wishart_logpdf(const Eigen::MatrixXd& x, const InvWishartParams& p) {
  p.validate();
  if (x.rows() != p.dim() || x.cols() != p.dim()) {
    throw DomainError("inverse Wishart density: dimension mismatch");
  }
  if (!SpdMatrix::is_spd(x)) throw DomainError("inverse Wishart density needs an SPD argument");
  const SpdMatrix xs(x);
  const SpdMatrix ss(p.scale);
  const double z = static_cast<double>(p.dim());
  const double trace = (p.scale * xs.inverse()).trace();
  return 0.5 * p.dof * ss.log_det() - 0.5 * p.dof * z * std::numbers::ln2 -
         log_multivariate_gamma(0.5 * p.dof, static_cast<int>(p.dim())) -
         0.5 * (p.dof + z + 1.0) * xs.log_det() - 0.5 * trace;
}

double inv_gamma_nll(std::span<const double> xs, const InvGammaParams& p) {
  double s = 0.0;
  for (double x : xs) s -= inv_gamma_logpdf(x, p);
  return s;
}

double inv_wishart_nll(std::span<const Eigen::MatrixXd> xs, const InvWishartParams& p) {
  double s = 0.0;
  for (const auto& x : xs) s -= inv_wishart_logpdf(x, p);
  return s;
}

InvGammaParams fit_inv_gamma_mle(std::span<const double> xs) {
  if (xs.size() < 10) {
    throw DegenerateSampleError("inverse gamma fit needs at least 10 samples, got " +
                                std::to_string(xs.size()));
  }
  double sum_inv = 0.0;
  double sum_log = 0.0;
  for (double x : xs) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw DomainError("inverse gamma fit needs positive finite samples");
    }
    sum_inv += 1.0 / x;
    sum_log += std::log(x);
  }
  if (all_equal(xs)) throw DegenerateSampleError("inverse gamma fit: all samples are equal");
  const double n = static_cast<double>(xs.size());
  // Profile negative log-likelihood per sample, with scale = n*shape/sum_inv.
  auto profile = [&](double log_shape) {
    const double a = std::exp(log_shape);
    const double b = n * a / sum_inv;
    return -(a * std::log(b) - std::lgamma(a) - (a + 1.0) * sum_log / n - b * sum_inv / n);
  };
  const double t = detail::bracketed_minimize(profile, std::log(kShapeLo), std::log(kShapeHi), 241,
                                              0.0, kSearchTol);
  const double shape = std::exp(t);
  return {shape, n * shape / sum_inv};
}

InvWishartParams fit_inv_wishart_mle(std::span<const Eigen::MatrixXd> xs) {
  if (xs.empty()) throw DegenerateSampleError("inverse Wishart fit: no samples");
  const Eigen::Index z = xs.front().rows();
  if (static_cast<Eigen::Index>(xs.size()) < z + 2) {
    throw DegenerateSampleError("inverse Wishart fit needs at least Z + 2 = " +
                                std::to_string(z + 2) + " samples, got " +
                                std::to_string(xs.size()));
  }
  Eigen::MatrixXd mean_inv = Eigen::MatrixXd::Zero(z, z);
  double mean_logdet = 0.0;
  bool identical = true;
  for (const auto& x : xs) {
    if (x.rows() != z || x.cols() != z) {
      throw ParameterError("inverse Wishart fit: samples differ in dimension");
    }
    if (!SpdMatrix::is_spd(x)) throw DomainError("inverse Wishart fit: sample is not SPD");
    const SpdMatrix s(x);
    mean_inv += s.inverse();
    mean_logdet += s.log_det();
    identical = identical && x == xs.front();
  }
  if (identical) throw DegenerateSampleError("inverse Wishart fit: all samples are equal");
  const double n = static_cast<double>(xs.size());
  mean_inv /= n;
  mean_logdet /= n;
  const Eigen::MatrixXd base = SpdMatrix(mean_inv).inverse();
  const double logdet_base = SpdMatrix(base).log_det();
  const double zd = static_cast<double>(z);
  // Profile log-likelihood per sample with S = dof * base.
  auto profile = [&](double log_dof) {
    const double v = std::exp(log_dof);
    const double ll = 0.5 * v * zd * std::log(0.5 * v) + 0.5 * v * logdet_base -
                      log_multivariate_gamma(0.5 * v, static_cast<int>(z)) - 0.5 * v * zd -
                      0.5 * (v + zd + 1.0) * mean_logdet;
    return -ll;
  };
  const double lo = std::log(zd + 1.0 + 1e-6);
  const double t =
      detail::bracketed_minimize(profile, lo, std::log(kDofHi), 241, 0.0, kSearchTol);
  const double dof = std::exp(t);
  InvWishartParams out{dof, dof * base};
  out.scale = 0.5 * (out.scale + out.scale.transpose());
  return out;
}

}  // namespace metbayes::dist
