#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>

#include "metbayes/distributions.hpp"
#include "metbayes/gibbs.hpp"
#include "metbayes/model_build.hpp"
#include "metbayes/simulate.hpp"

namespace support {

using metbayes::dist::InvGammaParams;

// P(X <= x) for X ~ Inv-Gamma(a, b) is Q(a, b / x).
inline double inv_gamma_cdf(double x, const InvGammaParams& p) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_q(p.shape, p.scale / x);
}

inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

inline Eigen::MatrixXd random_spd(int z, std::mt19937_64& rng, double ridge = 0.05) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(z, z);
  for (int i = 0; i < z; ++i)
    for (int j = 0; j < z; ++j) a(i, j) = n(rng);
  Eigen::MatrixXd s = a * a.transpose() / z;
  s.diagonal().array() += ridge;
  return s;
}

// y_l = b_l + e_l, one observation per level of the year effect, no fixed
// effects, one environment, a single zone.
inline metbayes::model::ModelMatrices single_effect_model(const Eigen::VectorXd& y) {
  using namespace metbayes;
  model::ModelMatrices m;
  const auto n = y.size();
  m.X.resize(n, 0);
  m.y = y;
  m.zones = {"Z1"};
  m.Z[0].levels = static_cast<std::size_t>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.Z[0].level_of_row.push_back(static_cast<std::int32_t>(i));
    m.layout.level_labels[0].push_back("L" + std::to_string(i));
    m.row_env.push_back(0);
    m.source_row.push_back(static_cast<std::size_t>(i));
  }
  m.layout.offsets[0] = 0;
  for (int k = 1; k <= model::kEffectCount; ++k) m.layout.offsets[k] = static_cast<std::size_t>(n);
  m.env_index.environments = {{"2001", "L1"}};
  m.env_index.counts = {static_cast<std::size_t>(n)};
  m.env_index.row_env = m.row_env;
  return m;
}

inline metbayes::gibbs::PriorSet default_priors(const metbayes::model::ModelMatrices& m) {
  using namespace metbayes;
  gibbs::PriorSet p;
  p.scalar.fill({5.0, 1.0});
  const auto z = static_cast<Eigen::Index>(std::max<std::size_t>(m.zone_count(), 1));
  p.wishart.dof = 10.0;
  p.wishart.scale = Eigen::MatrixXd::Constant(z, z, 0.9);
  p.wishart.scale.diagonal().setOnes();
  p.residual.assign(m.environment_count(), {5.0, 1.0});
  return p;
}

// Small but complete simulated dataset: every effect has several levels.
inline metbayes::sim::SimSpec small_spec(int years = 3, std::uint64_t seed = 11) {
  metbayes::sim::SimSpec s;
  s.years = years;
  s.zones = 3;
  s.locations_per_zone = 2;
  s.genotypes = 6;
  s.replicates = 2;
  s.seed = seed;
  return s;
}

}  // namespace support
