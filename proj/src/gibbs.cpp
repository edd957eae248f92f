#include "metbayes/gibbs.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>

#include "metbayes/errors.hpp"
#include "metbayes/kernels.hpp"

namespace metbayes::gibbs {
namespace {

using model::kEffectCount;
using model::kGenZone;
using model::kScalarEffectCount;

// Draws every level of a scalar-variance effect. Omega is diagonal because
// each row of an incidence matrix has a single 1.
void draw_scalar_levels(std::span<const double> prec_sum, std::span<const double> h_sum,
                        double sigma2, Rng& rng, double* out, double* mean_out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double prior_prec = 1.0 / sigma2;
  for (std::size_t l = 0; l < prec_sum.size(); ++l) {
    const double prec = prec_sum[l] + prior_prec;
    const double mean = h_sum[l] / prec;
    if (mean_out) mean_out[l] = mean;
    out[l] = mean + normal(rng) / std::sqrt(prec);
  }
}

// Genotype-by-zone effect: M independent Z x Z systems
// (diag(d_g) + Sigma_Z^-1) b_g = h_g.
void draw_gen_zone_levels(std::span<const double> prec_sum, std::span<const double> h_sum,
                          const Eigen::MatrixXd& sigma_z, Rng& rng, double* out,
                          double* mean_out) {
  const Eigen::Index z = sigma_z.rows();
  const std::size_t genotypes = prec_sum.size() / static_cast<std::size_t>(z);
  const Eigen::MatrixXd sigma_inv = dist::SpdMatrix(sigma_z).inverse();
  Eigen::MatrixXd precision(z, z);
  Eigen::VectorXd h(z);
  Eigen::VectorXd mean(z);
  for (std::size_t g = 0; g < genotypes; ++g) {
    precision = sigma_inv;
    for (Eigen::Index j = 0; j < z; ++j) {
      precision(j, j) += prec_sum[g * z + j];
      h(j) = h_sum[g * z + j];
    }
    const Eigen::VectorXd draw = dist::sample_mvn_canonical(precision, h, rng, &mean);
    for (Eigen::Index j = 0; j < z; ++j) {
      out[g * z + j] = draw(j);
      if (mean_out) mean_out[g * z + j] = mean(j);
    }
  }
}

Eigen::VectorXd draw_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& r_plus, Rng& rng, Eigen::VectorXd* mean_out) {
  const Eigen::Index p = x.cols();
  if (p == 0) return {};
  const Eigen::MatrixXd xw = w.asDiagonal() * x;
  const Eigen::MatrixXd a = x.transpose() * xw;
  const Eigen::VectorXd h = xw.transpose() * r_plus;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("fixed-effect system X'R^-1X is singular (rank-deficient X)");
  }
  Eigen::VectorXd mean = llt.solve(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z(i) = normal(rng);
  Eigen::VectorXd draw = mean + llt.matrixU().solve(z);
  if (mean_out) *mean_out = std::move(mean);
  return draw;
}

Eigen::VectorXd row_precision(const ParameterState& s, const model::ModelMatrices& m) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(m.n()));
  for (std::size_t i = 0; i < m.n(); ++i) w(static_cast<Eigen::Index>(i)) = 1.0 / s.sigma2_e(m.row_env[i]);
  return w;
}

double clamp_init(double v, const SamplerConfig& cfg) {
  return std::clamp(v, cfg.init_min, cfg.init_max);
}

// Incremental sweep over rows permuted so that environments are contiguous.
class SweepEngine {
 public:
  SweepEngine(const model::ModelMatrices& m, const Eigen::VectorXd& y, const PriorSet& priors)
      : m_(m), priors_(priors) {
    const std::size_t n = m.n();
    const std::size_t envs = m.environment_count();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return m.row_env[a] < m.row_env[b]; });
    x_.resize(static_cast<Eigen::Index>(n), m.X.cols());
    y_.resize(static_cast<Eigen::Index>(n));
    for (int k = 0; k < kEffectCount; ++k) idx_[k].resize(m.Z[k].levels > 0 ? n : 0);
    env_start_.assign(envs + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(perm[i]);
      x_.row(static_cast<Eigen::Index>(i)) = m.X.row(src);
      y_(static_cast<Eigen::Index>(i)) = y(src);
      for (int k = 0; k < kEffectCount; ++k) {
        if (m.Z[k].levels > 0) idx_[k][i] = m.Z[k].level_of_row[perm[i]];
      }
      ++env_start_[m.row_env[perm[i]] + 1];
    }
    for (std::size_t e = 0; e < envs; ++e) env_start_[e + 1] += env_start_[e];
    r_.resize(static_cast<Eigen::Index>(n));
    wy_.resize(static_cast<Eigen::Index>(n));
    w_.resize(static_cast<Eigen::Index>(n));
  }

  void sweep(ParameterState& s, Rng& rng) {
    const std::size_t envs = m_.environment_count();
    const Eigen::Index p = x_.cols();
    for (std::size_t e = 0; e < envs; ++e) {
      std::fill(w_.data() + env_start_[e], w_.data() + env_start_[e + 1], 1.0 / s.sigma2_e(e));
    }
    // Residuals from scratch each sweep so rounding does not accumulate.
    r_ = y_;
    for (Eigen::Index j = 0; j < p; ++j) kernels::axpy(-s.beta(j), col(j), span(r_));
    for (int k = 0; k < kEffectCount; ++k) {
      if (m_.Z[k].levels == 0) continue;
      kernels::gather_axpy(-1.0, effect_span(s, k), idx_[k], span(r_));
    }

    // Fixed effects.
    if (p > 0) {
      for (Eigen::Index j = 0; j < p; ++j) kernels::axpy(s.beta(j), col(j), span(r_));
      s.beta = draw_fixed(x_, w_, r_, rng, nullptr);
      for (Eigen::Index j = 0; j < p; ++j) kernels::axpy(-s.beta(j), col(j), span(r_));
    }

    // Random effects in stacking order.
    for (int k = 0; k < kEffectCount; ++k) {
      const std::size_t levels = m_.Z[k].levels;
      if (levels == 0) continue;
      auto b_k = effect_span(s, k);
      kernels::gather_axpy(1.0, b_k, idx_[k], span(r_));
      for (std::size_t e = 0; e < envs; ++e) {
        const std::size_t lo = env_start_[e];
        const std::size_t len = env_start_[e + 1] - lo;
        kernels::scale_copy(1.0 / s.sigma2_e(e), std::span<const double>(r_.data() + lo, len),
                            std::span<double>(wy_.data() + lo, len));
      }
      prec_.assign(levels, 0.0);
      h_.assign(levels, 0.0);
      kernels::scatter_add(span(w_), idx_[k], prec_);
      kernels::scatter_add(span(wy_), idx_[k], h_);
      double* out = s.b.data() + m_.layout.offsets[k];
      if (k == kGenZone) {
        draw_gen_zone_levels(prec_, h_, s.sigma_z, rng, out, nullptr);
      } else {
        draw_scalar_levels(prec_, h_, s.sigma2[k], rng, out, nullptr);
      }
      kernels::gather_axpy(-1.0, effect_span(s, k), idx_[k], span(r_));
    }

    // Scalar variance components.
    for (int k = 0; k < kScalarEffectCount; ++k) {
      s.sigma2[k] = dist::sample_inv_gamma(scalar_posterior(priors_.scalar[k], s.effect(m_, k)), rng);
    }

    // Genotype-by-zone covariance.
    s.sigma_z = dist::sample_inv_wishart(sigma_z_posterior(priors_.wishart, s.effect(m_, kGenZone),
                                                           s.sigma_z.rows()),
                                         rng)
                    .matrix();

    // Environment residual variances.
    for (std::size_t e = 0; e < envs; ++e) {
      const std::size_t lo = env_start_[e];
      const std::size_t len = env_start_[e + 1] - lo;
      const double ssq = kernels::sum_squares(std::span<const double>(r_.data() + lo, len));
      s.sigma2_e(e) = dist::sample_inv_gamma(residual_posterior(priors_.residual[e], len, ssq), rng);
    }
  }

 private:
  std::span<const double> col(Eigen::Index j) const {
    return {x_.data() + j * x_.rows(), static_cast<std::size_t>(x_.rows())};
  }
  static std::span<double> span(Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
  }
  std::span<double> effect_span(ParameterState& s, int k) const {
    return {s.b.data() + m_.layout.offsets[k], m_.layout.levels(k)};
  }

  const model::ModelMatrices& m_;
  const PriorSet& priors_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::array<std::vector<std::int32_t>, kEffectCount> idx_;
  std::vector<std::size_t> env_start_;
  Eigen::VectorXd r_;
  Eigen::VectorXd wy_;
  Eigen::VectorXd w_;
  std::vector<double> prec_;
  std::vector<double> h_;
};

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, p - buf);
}

}  // namespace

ParameterState ParameterState::zeros(const model::ModelMatrices& m) {
  ParameterState s;
  s.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.p()));
  s.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.layout.total()));
  s.sigma2.fill(1.0);
  const auto z = static_cast<Eigen::Index>(std::max<std::size_t>(m.zone_count(), 1));
  s.sigma_z = Eigen::MatrixXd::Identity(z, z);
  s.sigma2_e = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m.environment_count()));
  return s;
}

Eigen::VectorXd ParameterState::effect(const model::ModelMatrices& m, int k) const {
  return b.segment(static_cast<Eigen::Index>(m.layout.offsets[k]),
                   static_cast<Eigen::Index>(m.layout.levels(k)));
}

void PriorSet::validate(const model::ModelMatrices& m) const {
  for (const auto& p : scalar) p.validate();
  wishart.validate();
  if (static_cast<std::size_t>(wishart.dim()) != std::max<std::size_t>(m.zone_count(), 1)) {
    throw ParameterError("inverse Wishart prior dimension " + std::to_string(wishart.dim()) +
                         " does not match " + std::to_string(m.zone_count()) + " zones");
  }
  if (residual.size() != m.environment_count()) {
    throw ParameterError("expected " + std::to_string(m.environment_count()) +
                         " residual priors, got " + std::to_string(residual.size()));
  }
  for (const auto& p : residual) p.validate();
}

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ConfigError("n_chains must be >= 1");
  if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
  if (n_iter <= burn_in) throw ConfigError("n_iter must exceed burn_in");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (!(init_min > 0.0) || !(init_max > init_min)) throw ConfigError("bad init clamp");
}

int SamplerConfig::retained_per_chain() const { return (n_iter - burn_in + thin - 1) / thin; }

Eigen::MatrixXd Chain::sigma_z_draw(Eigen::Index r) const {
  const auto z = static_cast<Eigen::Index>(std::llround(std::sqrt(sigma_z.cols())));
  Eigen::MatrixXd out(z, z);
  for (Eigen::Index i = 0; i < z; ++i)
    for (Eigen::Index j = 0; j < z; ++j) out(i, j) = sigma_z(r, i * z + j);
  return out;
}

std::size_t PosteriorSample::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += static_cast<std::size_t>(c.draws());
  return n;
}

std::vector<double> PosteriorSample::merged_sigma2(int k) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.draws(); ++r) out.push_back(c.sigma2(r, k));
  return out;
}

std::vector<double> PosteriorSample::merged_sigma2_e(std::size_t e) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.draws(); ++r)
      out.push_back(c.sigma2_e(r, static_cast<Eigen::Index>(e)));
  return out;
}

std::vector<Eigen::MatrixXd> PosteriorSample::merged_sigma_z() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(total_draws());
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.draws(); ++r) out.push_back(c.sigma_z_draw(r));
  return out;
}

std::vector<std::string> PosteriorSample::column_names() const {
  std::vector<std::string> names = fixed_names;
  for (int k = 0; k < kScalarEffectCount; ++k) names.emplace_back(model::variance_name(k));
  const std::size_t z = zones.empty() ? 1 : zones.size();
  for (std::size_t i = 0; i < z; ++i)
    for (std::size_t j = 0; j < z; ++j)
      names.push_back("Sigma_gen_zone[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
  for (std::size_t e = 0; e < environments.size(); ++e)
    names.push_back("var_resid_env[" + std::to_string(e + 1) + "]");
  return names;
}

Eigen::MatrixXd PosteriorSample::chain_columns(std::size_t ci) const {
  const Chain& c = chains.at(ci);
  Eigen::MatrixXd out(c.draws(),
                      c.beta.cols() + c.sigma2.cols() + c.sigma_z.cols() + c.sigma2_e.cols());
  out << c.beta, c.sigma2, c.sigma_z, c.sigma2_e;
  return out;
}

dist::InvGammaParams scalar_posterior(const dist::InvGammaParams& prior,
                                      const Eigen::VectorXd& effect) {
  return {prior.shape + 0.5 * static_cast<double>(effect.size()),
          prior.scale + 0.5 * effect.squaredNorm()};
}

dist::InvWishartParams sigma_z_posterior(const dist::InvWishartParams& prior,
                                         const Eigen::VectorXd& gen_zone_effect,
                                         Eigen::Index zones) {
  const Eigen::Index genotypes = zones > 0 ? gen_zone_effect.size() / zones : 0;
  Eigen::MatrixXd scale = prior.scale;
  for (Eigen::Index g = 0; g < genotypes; ++g) {
    const auto bg = gen_zone_effect.segment(g * zones, zones);
    scale.noalias() += bg * bg.transpose();
  }
  return {prior.dof + static_cast<double>(genotypes), 0.5 * (scale + scale.transpose())};
}

dist::InvGammaParams residual_posterior(const dist::InvGammaParams& prior, std::size_t count,
                                        double sum_squares) {
  return {prior.shape + 0.5 * static_cast<double>(count), prior.scale + 0.5 * sum_squares};
}

Eigen::VectorXd residuals(const ParameterState& s, const model::ModelMatrices& m,
                          const Eigen::VectorXd& y) {
  Eigen::VectorXd r = y;
  if (m.p() > 0) r -= m.X * s.beta;
  for (int k = 0; k < kEffectCount; ++k) {
    if (m.Z[k].levels == 0) continue;
    const double* bk = s.b.data() + m.layout.offsets[k];
    for (std::size_t i = 0; i < m.n(); ++i) r(static_cast<Eigen::Index>(i)) -= bk[m.Z[k].level_of_row[i]];
  }
  return r;
}

Eigen::VectorXd cond_fixed_effects(const ParameterState& s, const model::ModelMatrices& m,
                                   const Eigen::VectorXd& y, Rng& rng, Eigen::VectorXd* mean_out) {
  Eigen::VectorXd r_plus = residuals(s, m, y);
  if (m.p() > 0) r_plus += m.X * s.beta;
  return draw_fixed(m.X, row_precision(s, m), r_plus, rng, mean_out);
}

Eigen::VectorXd cond_random_effect(int k, const ParameterState& s, const model::ModelMatrices& m,
                                   const Eigen::VectorXd& y, Rng& rng, Eigen::VectorXd* mean_out) {
  const std::size_t levels = m.layout.levels(k);
  Eigen::VectorXd yk = residuals(s, m, y);
  const double* bk = s.b.data() + m.layout.offsets[k];
  const Eigen::VectorXd w = row_precision(s, m);
  std::vector<double> prec(levels, 0.0);
  std::vector<double> h(levels, 0.0);
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto l = m.Z[k].level_of_row[i];
    yk(ii) += bk[l];
    prec[l] += w(ii);
    h[l] += w(ii) * yk(ii);
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(levels));
  Eigen::VectorXd mean(static_cast<Eigen::Index>(levels));
  if (k == kGenZone) {
    draw_gen_zone_levels(prec, h, s.sigma_z, rng, out.data(), mean.data());
  } else {
    draw_scalar_levels(prec, h, s.sigma2[k], rng, out.data(), mean.data());
  }
  if (mean_out) *mean_out = std::move(mean);
  return out;
}

double cond_variance_scalar(int k, const ParameterState& s, const model::ModelMatrices& m,
                            const dist::InvGammaParams& prior, Rng& rng) {
  return dist::sample_inv_gamma(scalar_posterior(prior, s.effect(m, k)), rng);
}

dist::SpdMatrix cond_sigma_z(const ParameterState& s, const model::ModelMatrices& m,
                             const dist::InvWishartParams& prior, Rng& rng) {
  const auto post = sigma_z_posterior(prior, s.effect(m, kGenZone), s.sigma_z.rows());
  if (!dist::SpdMatrix::is_spd(post.scale)) {
    throw Error("internal: inverse Wishart scale update lost positive definiteness");
  }
  return dist::sample_inv_wishart(post, rng);
}

double cond_residual_env(std::size_t e, const ParameterState& s, const model::ModelMatrices& m,
                         const Eigen::VectorXd& y, const dist::InvGammaParams& prior, Rng& rng) {
  const Eigen::VectorXd r = residuals(s, m, y);
  double ssq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    if (static_cast<std::size_t>(m.row_env[i]) == e) {
      ssq += r(static_cast<Eigen::Index>(i)) * r(static_cast<Eigen::Index>(i));
      ++count;
    }
  }
  return dist::sample_inv_gamma(residual_posterior(prior, count, ssq), rng);
}

ParameterState initial_state(const model::ModelMatrices& m, const PriorSet& priors,
                             const SamplerConfig& cfg, Rng& rng) {
  ParameterState s = ParameterState::zeros(m);
  for (int k = 0; k < kScalarEffectCount; ++k) {
    s.sigma2[k] = clamp_init(dist::sample_inv_gamma(priors.scalar[k], rng), cfg);
  }
  Eigen::MatrixXd sz = dist::sample_inv_wishart(priors.wishart, rng).matrix();
  const double max_diag = sz.diagonal().maxCoeff();
  if (max_diag > cfg.init_max) sz *= cfg.init_max / max_diag;
  const double min_diag = sz.diagonal().minCoeff();
  if (min_diag < cfg.init_min) sz.diagonal().array() += cfg.init_min;
  s.sigma_z = sz;
  for (Eigen::Index e = 0; e < s.sigma2_e.size(); ++e) {
    s.sigma2_e(e) = clamp_init(dist::sample_inv_gamma(priors.residual[e], rng), cfg);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < kScalarEffectCount; ++k) {
    const double sd = std::sqrt(s.sigma2[k]);
    for (std::size_t l = 0; l < m.layout.levels(k); ++l) {
      s.b(static_cast<Eigen::Index>(m.layout.offsets[k] + l)) = sd * normal(rng);
    }
  }
  const auto z = s.sigma_z.rows();
  const Eigen::Index genotypes = static_cast<Eigen::Index>(m.layout.levels(kGenZone)) / z;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(z);
  for (Eigen::Index g = 0; g < genotypes; ++g) {
    s.b.segment(static_cast<Eigen::Index>(m.layout.offsets[kGenZone]) + g * z, z) =
        dist::sample_mvn(zero, s.sigma_z, rng);
  }
  return s;
}

Rng chain_rng(std::uint64_t seed, int chain_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(chain_id),
                    0x6d657462u};
  return Rng(seq);
}

Chain run_chain(const model::ModelMatrices& m, const Eigen::VectorXd& y, const PriorSet& priors,
                const SamplerConfig& cfg, int chain_id) {
  cfg.validate();
  priors.validate(m);
  if (static_cast<std::size_t>(y.size()) != m.n()) {
    throw ParameterError("response length does not match the design");
  }
  Rng rng = chain_rng(cfg.seed, chain_id);
  ParameterState s = initial_state(m, priors, cfg, rng);
  SweepEngine engine(m, y, priors);

  const int retained = cfg.retained_per_chain();
  const auto z2 = s.sigma_z.size();
  Chain c;
  c.chain_id = chain_id;
  c.beta.resize(retained, s.beta.size());
  c.sigma2.resize(retained, kScalarEffectCount);
  c.sigma_z.resize(retained, z2);
  c.sigma2_e.resize(retained, s.sigma2_e.size());
  if (cfg.store_random_effects) c.b.resize(retained, s.b.size());
  c.b_mean = Eigen::VectorXd::Zero(s.b.size());

  int row = 0;
  for (int t = 1; t <= cfg.n_iter; ++t) {
    try {
      engine.sweep(s, rng);
    } catch (const Error& e) {
      throw NumericalError("chain " + std::to_string(chain_id) + ", iteration " +
                           std::to_string(t) + ": " + e.what());
    }
    if (t <= cfg.burn_in || (t - cfg.burn_in - 1) % cfg.thin != 0) continue;
    c.beta.row(row) = s.beta.transpose();
    for (int k = 0; k < kScalarEffectCount; ++k) c.sigma2(row, k) = s.sigma2[k];
    const Eigen::Index z = s.sigma_z.rows();
    for (Eigen::Index i = 0; i < z; ++i)
      for (Eigen::Index j = 0; j < z; ++j) c.sigma_z(row, i * z + j) = s.sigma_z(i, j);
    c.sigma2_e.row(row) = s.sigma2_e.transpose();
    if (cfg.store_random_effects) c.b.row(row) = s.b.transpose();
    c.b_mean += s.b;
    ++row;
  }
  c.b_mean /= static_cast<double>(retained);
  return c;
}

PosteriorSample run_chains(const model::ModelMatrices& m, const Eigen::VectorXd& y,
                           const PriorSet& priors, const SamplerConfig& cfg) {
  cfg.validate();
  PosteriorSample out;
  out.chains.resize(static_cast<std::size_t>(cfg.n_chains));
  out.fixed_names = m.fixed_names;
  out.zones = m.zones;
  for (std::size_t e = 0; e < m.environment_count(); ++e) out.environments.push_back(m.env_index.label(e));
  out.layout = m.layout;

  std::vector<std::exception_ptr> errors(out.chains.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < cfg.n_chains; c = next++) {
      try {
        out.chains[static_cast<std::size_t>(c)] = run_chain(m, y, priors, cfg, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  int threads = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, cfg.n_chains);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (std::size_t c = 0; c < errors.size(); ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const NumericalError&) {
      throw;  // already carries the chain id
    } catch (const std::exception& e) {
      throw Error("chain " + std::to_string(c) + ": " + e.what());
    }
  }
  return out;
}

void write_posterior_csv(const PosteriorSample& s, std::ostream& out) {
  const auto names = s.column_names();
  out << "chain,draw";
  for (const auto& n : names) out << ',' << data::csv_quote(n);
  out << '\n';
  for (std::size_t c = 0; c < s.chains.size(); ++c) {
    const Eigen::MatrixXd cols = s.chain_columns(c);
    for (Eigen::Index r = 0; r < cols.rows(); ++r) {
      out << s.chains[c].chain_id << ',' << r;
      for (Eigen::Index j = 0; j < cols.cols(); ++j) {
        out << ',';
        write_double(out, cols(r, j));
      }
      out << '\n';
    }
  }
}

}  // namespace metbayes::gibbs
