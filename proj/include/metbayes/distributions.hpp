#pragma once

// Normal, inverse-gamma and inverse-Wishart samplers, log-densities and
// maximum-likelihood fitters.
//
// Parameterizations:
//   Inv-Gamma(shape a, scale b):   p(x) = b^a / Gamma(a) x^(-a-1) exp(-b/x)
//   Inv-Wishart(dof v, scale S):   p(X) = |S|^(v/2) / (2^(vZ/2) Gamma_Z(v/2))
//                                        |X|^(-(v+Z+1)/2) exp(-tr(S X^-1)/2)

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace metbayes::dist {

using Rng = std::mt19937_64;

struct InvGammaParams {
  double shape = 1.0;
  double scale = 1.0;

  /// Throws ParameterError unless shape > 0 and scale > 0.
  void validate() const;
  /// scale / (shape - 1); infinite for shape <= 1.
  double mean() const;
  double mode() const { return scale / (shape + 1.0); }
  bool operator==(const InvGammaParams&) const = default;
};

/// Symmetric positive-definite matrix together with its Cholesky factor.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  /// Throws DomainError if `m` is not symmetric positive definite.
  explicit SpdMatrix(Eigen::MatrixXd m);

  Eigen::Index dim() const { return value_.rows(); }
  const Eigen::MatrixXd& matrix() const { return value_; }
  Eigen::MatrixXd lower() const { return llt_.matrixL(); }
  Eigen::MatrixXd inverse() const;
  double log_det() const;
  Eigen::VectorXd eigenvalues() const;

  static bool is_spd(const Eigen::MatrixXd& m);

 private:
  Eigen::MatrixXd value_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct InvWishartParams {
  double dof = 1.0;
  Eigen::MatrixXd scale;

  /// Throws ParameterError unless dof > Z - 1 and scale is SPD.
  void validate() const;
  Eigen::Index dim() const { return scale.rows(); }
  /// scale / (dof - Z - 1), defined for dof > Z + 1.
  Eigen::MatrixXd mean() const;
};

double sample_inv_gamma(const InvGammaParams& p, Rng& rng);

/// Bartlett construction on the precision: X^-1 ~ Wishart(dof, scale^-1).
SpdMatrix sample_inv_wishart(const InvWishartParams& p, Rng& rng);

/// Draw from N(mean, cov). A failed Cholesky is retried with a diagonal
/// jitter of 1e-10 * trace/dim, growing tenfold, at most ten times.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);

/// Draw from N(P^-1 h, P^-1) given the precision P and the linear term h,
/// with the same jitter policy as sample_mvn. Returns the draw; the mean is
/// written to `mean_out` when non-null.
Eigen::VectorXd sample_mvn_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& h,
                                     Rng& rng, Eigen::VectorXd* mean_out = nullptr);

/// Cholesky with the jitter retry policy; throws NumericalError on failure.
Eigen::LLT<Eigen::MatrixXd> jittered_cholesky(const Eigen::MatrixXd& m);

double inv_gamma_logpdf(double x, const InvGammaParams& p);
double inv_wishart_logpdf(const Eigen::MatrixXd& x, const InvWishartParams& p);

/// log Gamma_p(a), the multivariate gamma function.
double log_multivariate_gamma(double a, int p);

/// Negative log-likelihoods of i.i.d. samples.
double inv_gamma_nll(std::span<const double> xs, const InvGammaParams& p);
double inv_wishart_nll(std::span<const Eigen::MatrixXd> xs, const InvWishartParams& p);

/// MLE of (shape, scale). The scale is profiled out as n*shape / sum(1/x)
/// and the shape is found by golden-section search on log(shape) over
/// (1e-3, 1e4). Requires n >= 10, positive, not all equal.
InvGammaParams fit_inv_gamma_mle(std::span<const double> xs);

/// MLE of (dof, scale) subject to dof > Z + 1. The scale is profiled out as
/// dof * (mean of X_i^-1)^-1; dof is searched on (Z + 1 + 1e-6, 1e4).
InvWishartParams fit_inv_wishart_mle(std::span<const Eigen::MatrixXd> xs);

}  // namespace metbayes::dist
