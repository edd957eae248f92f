#include "metbayes/optimal_design.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "metbayes/detail/golden.hpp"
#include "metbayes/errors.hpp"
#include "metbayes/model_build.hpp"

namespace metbayes::design {
namespace {

constexpr int kGenYear = static_cast<int>(model::Effect::gen_year);
constexpr int kGenZoneYear = static_cast<int>(model::Effect::gen_zone_year);
constexpr int kGenZoneLocYear = static_cast<int>(model::Effect::gen_zone_loc_year);

// B^-1 K K B^-1
Eigen::MatrixXd target_matrix(const DesignInputs& in) {
  const Eigen::MatrixXd bik = in.B.llt().solve(in.K);
  return bik * bik.transpose();
}

Eigen::MatrixXd info_inverse(const Eigen::VectorXd& w, const Eigen::MatrixXd& q_inv) {
  Eigen::MatrixXd m = q_inv;
  m.diagonal() += w;
  return m.llt().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

struct Criterion {
  Eigen::MatrixXd q_inv;
  Eigen::MatrixXd c;

  explicit Criterion(const DesignInputs& in)
      : q_inv(in.Q.llt().solve(Eigen::MatrixXd::Identity(in.zones(), in.zones()))),
        c(target_matrix(in)) {}

  double value(const Eigen::VectorXd& w) const {
    return (info_inverse(w, q_inv) * c).trace();
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const {
    const Eigen::MatrixXd a = info_inverse(w, q_inv);
    return -(a * c * a).diagonal();
  }
};

double sd_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double ig_plugin(const dist::InvGammaParams& p) { return p.shape > 1.0 ? p.mean() : p.mode(); }

}  // namespace

double env_mean_var_resid(const std::vector<double>& sigma2_e) {
  if (sigma2_e.empty()) throw ParameterError("no residual variances to average");
  return std::accumulate(sigma2_e.begin(), sigma2_e.end(), 0.0) /
         static_cast<double>(sigma2_e.size());
}

DesignInputs build_design_inputs(const VarianceComponents& vc, int H, int J, int n_rep) {
  if (H < 1 || J < 1 || n_rep < 1) throw ParameterError("H, J and n_rep must be >= 1");
  if (vc.gen_year < 0 || vc.gen_zone_year < 0 || vc.gen_zone_loc_year < 0 ||
      !(vc.env_mean_var_resid > 0)) {
    throw ParameterError("variance components must be non-negative, residual mean positive");
  }
  if (!dist::SpdMatrix::is_spd(vc.sigma_z)) throw DomainError("Sigma_Z is not SPD");
  DesignInputs in;
  in.H = H;
  in.J = J;
  in.n_rep = n_rep;
  in.K = vc.sigma_z;
  in.B = in.K;
  in.B.diagonal().array() += vc.gen_year / H;
  in.kappa = (vc.gen_zone_year + vc.gen_zone_loc_year + vc.env_mean_var_resid / n_rep) / H;
  in.Q = (static_cast<double>(J) / in.kappa) * in.B;
  return in;
}

void validate_weights(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw ParameterError("empty design");
  if ((w.array() < 0.0).any()) throw ParameterError("design weights must be non-negative");
  if (std::abs(w.sum() - 1.0) > 1e-9) throw ParameterError("design weights must sum to one");
}

double phi_a_multi_year(const Eigen::VectorXd& w, const DesignInputs& in) {
  validate_weights(w);
  if (w.size() != in.zones()) throw ParameterError("design and inputs disagree on zone count");
  return Criterion(in).value(w);
}

Eigen::VectorXd phi_a_gradient(const Eigen::VectorXd& w, const DesignInputs& in) {
  return Criterion(in).gradient(w);
}

double phi_a_single_year(const Eigen::VectorXd& w, const Eigen::MatrixXd& delta) {
  validate_weights(w);
  if (w.size() != delta.rows()) throw ParameterError("design and Delta disagree on zone count");
  if (!dist::SpdMatrix::is_spd(delta)) throw DomainError("Delta is not SPD");
  const Eigen::MatrixXd d_inv =
      delta.llt().solve(Eigen::MatrixXd::Identity(delta.rows(), delta.cols()));
  return info_inverse(w, d_inv).trace();
}

ApproximateDesign optimize_approximate_design(const DesignInputs& in,
                                              const OptimizerOptions& opt) {
  const Criterion crit(in);
  const Eigen::Index z = in.zones();
  ApproximateDesign out;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(z, 1.0 / static_cast<double>(z));
  double f = crit.value(w);

  for (int it = 0; it < opt.max_iter; ++it) {
    out.iterations = it;
    const Eigen::VectorXd g = crit.gradient(w);
    Eigen::Index to = 0;
    g.minCoeff(&to);
    Eigen::Index from = -1;
    for (Eigen::Index j = 0; j < z; ++j) {
      if (w(j) > 0.0 && (from < 0 || g(j) > g(from))) from = j;
    }
    const double gap = g(from) - g(to);
    if (gap <= opt.gap_tol * (1.0 + g.cwiseAbs().maxCoeff())) {
      out.converged = true;
      break;
    }
    const double cap = w(from);
    auto along = [&](double t) {
      Eigen::VectorXd v = w;
      v(to) += t;
      v(from) -= t;
      return crit.value(v);
    };
    const double t = detail::golden_section(along, 0.0, cap, 0.0, 1e-15 * (1.0 + cap));
    // An endpoint can beat the interior point golden returns.
    double best_t = t;
    double best_f = along(t);
    if (const double fc = along(cap); fc < best_f) {
      best_t = cap;
      best_f = fc;
    }
    if (!(best_f < f)) {
      out.converged = true;  // no descent left at machine precision
      break;
    }
    w(to) += best_t;
    if (best_t == cap) {
      w(from) = 0.0;
    } else {
      w(from) -= best_t;
    }
    f = best_f;
  }
  w = w.cwiseMax(0.0);
  w /= w.sum();
  out.weights = w;
  out.criterion = crit.value(w);
  return out;
}

std::vector<std::vector<int>> exact_candidates(const Eigen::VectorXd& w, int J) {
  validate_weights(w);
  const auto z = static_cast<int>(w.size());
  if (J < z) throw ParameterError("J must be at least the number of zones");
  constexpr double kZero = 1e-12;
  std::vector<int> base(z, 0);
  std::vector<int> positive;
  for (int i = 0; i < z; ++i) {
    if (w(i) > kZero) {
      base[i] = 1;
      positive.push_back(i);
    }
  }
  const int rest = J - static_cast<int>(positive.size());
  std::vector<double> target(z, 0.0);
  double total = 0.0;
  for (int i : positive) total += target[i] = std::max(J * w(i) - 1.0, 0.0);
  int assigned = 0;
  std::vector<double> remainder(z, 0.0);
  for (int i : positive) {
    const double t = total > 0.0 ? target[i] * rest / total : double(rest) / positive.size();
    const int fl = static_cast<int>(std::floor(t + 1e-12));
    base[i] += fl;
    assigned += fl;
    remainder[i] = t - fl;
  }
  const int left = rest - assigned;
  if (left == 0) return {base};

  // Every subset of size `left` of the positive-weight zones gets one more.
  const int pool = static_cast<int>(positive.size());
  std::vector<std::vector<int>> out;
  std::vector<bool> pick(pool, false);
  std::fill(pick.begin(), pick.begin() + std::min(left, pool), true);
  do {
    std::vector<int> c = base;
    for (int i = 0; i < pool; ++i)
      if (pick[i]) ++c[positive[i]];
    out.push_back(std::move(c));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return out;
}

std::vector<int> round_to_exact(const Eigen::VectorXd& w, const DesignInputs& in) {
  const auto cands = exact_candidates(w, in.J);
  const Criterion crit(in);
  std::vector<int> best;
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    Eigen::VectorXd v(in.zones());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<double>(c[i]) / in.J;
    const double f = crit.value(v);
    if (f < best_f) {
      best_f = f;
      best = c;
    }
  }
  return best;
}

double efficiency(const Eigen::VectorXd& w, const DesignInputs& in) {
  const Criterion crit(in);
  const Eigen::VectorXd eq = Eigen::VectorXd::Constant(in.zones(), 1.0 / in.zones());
  validate_weights(w);
  return crit.value(w) / crit.value(eq);
}

double mse_scale(const DesignInputs& in) { return in.kappa / in.J; }

double mse_trace(const Eigen::VectorXd& w, const DesignInputs& in, double scale) {
  if (!(scale > 0.0)) throw ParameterError("MSE scale must be positive");
  return phi_a_multi_year(w, in) * scale;
}

DesignResult evaluate_design(const DesignInputs& in, const OptimizerOptions& opt) {
  DesignResult r;
  r.design = optimize_approximate_design(in, opt);
  r.exact = round_to_exact(r.design.weights, in);
  r.eff_a = efficiency(r.design.weights, in);
  r.mse_tr = mse_trace(r.design.weights, in, mse_scale(in));
  return r;
}

VarianceComponents draw_components(const update::WindowPriors& priors, dist::Rng& rng) {
  VarianceComponents vc;
  vc.sigma_z = dist::sample_inv_wishart(priors.wishart, rng).matrix();
  vc.gen_year = dist::sample_inv_gamma(priors.scalar[kGenYear], rng);
  vc.gen_zone_year = dist::sample_inv_gamma(priors.scalar[kGenZoneYear], rng);
  vc.gen_zone_loc_year = dist::sample_inv_gamma(priors.scalar[kGenZoneLocYear], rng);
  std::vector<double> resid;
  for (const auto& [loc, p] : priors.residual_by_location) resid.push_back(dist::sample_inv_gamma(p, rng));
  if (resid.empty()) resid.push_back(dist::sample_inv_gamma(priors.residual_default, rng));
  vc.env_mean_var_resid = env_mean_var_resid(resid);
  return vc;
}

VarianceComponents mean_components(const update::WindowPriors& priors) {
  VarianceComponents vc;
  const auto z = priors.wishart.dim();
  vc.sigma_z = priors.wishart.dof > z + 1
                   ? priors.wishart.mean()
                   : Eigen::MatrixXd(priors.wishart.scale / (priors.wishart.dof + z + 1));
  vc.gen_year = ig_plugin(priors.scalar[kGenYear]);
  vc.gen_zone_year = ig_plugin(priors.scalar[kGenZoneYear]);
  vc.gen_zone_loc_year = ig_plugin(priors.scalar[kGenZoneLocYear]);
  std::vector<double> resid;
  for (const auto& [loc, p] : priors.residual_by_location) resid.push_back(ig_plugin(p));
  if (resid.empty()) resid.push_back(ig_plugin(priors.residual_default));
  vc.env_mean_var_resid = env_mean_var_resid(resid);
  return vc;
}

DesignSummary posterior_design_summary(const update::WindowPriors& priors, int H, int J,
                                       int n_rep, int n_draws, dist::Rng& rng, int threads,
                                       const OptimizerOptions& opt) {
  if (n_draws < 1) throw ParameterError("n_draws must be >= 1");
  DesignSummary s;
  s.H = H;
  s.J = J;
  s.n_draws = n_draws;

  std::vector<DesignInputs> inputs;
  inputs.reserve(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    for (int attempt = 0;; ++attempt) {
      try {
        inputs.push_back(build_design_inputs(draw_components(priors, rng), H, J, n_rep));
        break;
      } catch (const DomainError&) {
        if (attempt == 10) throw NumericalError("draw " + std::to_string(d) +
                                                ": no SPD component set after 10 redraws");
        ++s.redraws;
      } catch (const NumericalError&) {
        if (attempt == 10) throw;
        ++s.redraws;
      }
    }
  }

  s.draws.resize(n_draws);
  std::vector<std::exception_ptr> errors(n_draws);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int d = next++; d < n_draws; d = next++) {
      try {
        s.draws[d] = evaluate_design(inputs[d], opt);
      } catch (...) {
        errors[d] = std::current_exception();
      }
    }
  };
  threads = std::clamp(threads, 1, n_draws);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const Eigen::Index z = inputs.front().zones();
  s.weight_mean = Eigen::VectorXd::Zero(z);
  s.weight_min = Eigen::VectorXd::Constant(z, std::numeric_limits<double>::infinity());
  s.weight_max = Eigen::VectorXd::Constant(z, -std::numeric_limits<double>::infinity());
  std::vector<double> effs, mses;
  for (const auto& r : s.draws) {
    s.weight_mean += r.design.weights;
    s.weight_min = s.weight_min.cwiseMin(r.design.weights);
    s.weight_max = s.weight_max.cwiseMax(r.design.weights);
    effs.push_back(r.eff_a);
    mses.push_back(r.mse_tr);
    if (!r.design.converged) ++s.unconverged;
  }
  s.weight_mean /= n_draws;
  s.weight_sd = Eigen::VectorXd::Zero(z);
  if (n_draws > 1) {
    for (const auto& r : s.draws) s.weight_sd += (r.design.weights - s.weight_mean).cwiseAbs2();
    s.weight_sd = (s.weight_sd / (n_draws - 1)).cwiseSqrt();
  }
  s.eff_mean = std::accumulate(effs.begin(), effs.end(), 0.0) / n_draws;
  s.mse_mean = std::accumulate(mses.begin(), mses.end(), 0.0) / n_draws;
  s.eff_sd = sd_of(effs, s.eff_mean);
  s.mse_sd = sd_of(mses, s.mse_mean);
  return s;
}

}  // namespace metbayes::design
