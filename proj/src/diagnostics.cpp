#include "metbayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "metbayes/errors.hpp"
#include "metbayes/gibbs.hpp"

namespace metbayes::diag {
namespace {

double mean_of(Series x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Unbiased sample variance.
double var_of(Series x, double mean) {
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size() - 1);
}

// Asymptotic variance of the segment mean times its length, from
// non-overlapping batch means of size floor(sqrt(len)).
double batch_means_variance(Series x) {
  const std::size_t len = x.size();
  const auto bsize = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(len))));
  const std::size_t nb = len / bsize;
  if (nb < 2) return 0.0;
  std::vector<double> means(nb);
  for (std::size_t b = 0; b < nb; ++b) means[b] = mean_of(x.subspan(b * bsize, bsize));
  const double m = mean_of(means);
  return static_cast<double>(bsize) * var_of(means, m);
}

nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "undefined";
  return *v;
}

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", *v);
  return buf;
}

}  // namespace

std::optional<double> r_hat(const std::vector<Series>& chains) {
  if (chains.size() < 2) throw ParameterError("r_hat needs at least 2 chains");
  const std::size_t n_full = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n_full) throw ParameterError("r_hat needs chains of equal length");
  }
  if (n_full < 4) throw ParameterError("r_hat needs at least 4 draws per chain");

  // Split every chain into halves; an odd middle draw is dropped.
  const std::size_t n = n_full / 2;
  std::vector<Series> halves;
  for (const auto& c : chains) {
    halves.push_back(c.subspan(0, n));
    halves.push_back(c.subspan(n_full - n, n));
  }
  const auto m = static_cast<double>(halves.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    w += var_of(h, means.back());
  }
  w /= m;
  if (!(w > 0.0)) return std::nullopt;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1.0);
  const double nd = static_cast<double>(n);
  return std::sqrt(((nd - 1.0) / nd * w + b / nd) / w);
}

std::optional<double> ess(Series x) {
  const std::size_t n = x.size();
  if (n < 8) throw ParameterError("ess needs at least 8 draws");
  const double mu = mean_of(x);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - mu;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return std::nullopt;

  // Geyer: sum pairs rho_{2k} + rho_{2k+1} while positive.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (!(pair > 0.0)) break;
    tau += 2.0 * pair;
  }
  const double nd = static_cast<double>(n);
  if (!(tau > 0.0)) return nd;
  return std::min(nd / tau, nd);
}

std::optional<double> ess(const std::vector<Series>& chains) {
  double total = 0.0;
  for (const auto& c : chains) {
    const auto e = ess(c);
    if (!e) return std::nullopt;
    total += *e;
  }
  return total;
}

std::optional<double> geweke_z(Series x) {
  const std::size_t n = x.size();
  if (n < 100) throw ParameterError("geweke_z needs at least 100 draws");
  const std::size_t n1 = n / 10;
  const std::size_t n2 = n / 2;
  const Series a = x.subspan(0, n1);
  const Series b = x.subspan(n - n2, n2);
  const double v1 = batch_means_variance(a);
  const double v2 = batch_means_variance(b);
  const double se2 = v1 / static_cast<double>(n1) + v2 / static_cast<double>(n2);
  if (!(se2 > 0.0)) return std::nullopt;
  return (mean_of(a) - mean_of(b)) / std::sqrt(se2);
}

std::size_t DiagnosticsReport::flagged_count() const {
  return static_cast<std::size_t>(std::count_if(parameters.begin(), parameters.end(),
                                                [](const auto& p) { return p.flagged(); }));
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json j;
  j["thresholds"] = {{"r_hat_max", thresholds.r_hat_max},
                     {"ess_min", thresholds.ess_min},
                     {"geweke_abs_max", thresholds.geweke_abs_max}};
  j["chains"] = chains;
  j["draws_per_chain"] = draws_per_chain;
  j["flagged"] = flagged_count();
  auto& params = j["parameters"] = nlohmann::json::array();
  for (const auto& p : parameters) {
    nlohmann::json z = nlohmann::json::array();
    for (const auto& g : p.geweke_z) z.push_back(opt_json(g));
    params.push_back({{"name", p.name},
                      {"r_hat", opt_json(p.r_hat)},
                      {"ess", opt_json(p.ess)},
                      {"geweke_z", z},
                      {"flags",
                       {{"r_hat", p.flag_r_hat}, {"ess", p.flag_ess}, {"geweke", p.flag_geweke}}},
                      {"status", p.flagged() ? "FLAG" : "PASS"}});
  }
  return j;
}

void DiagnosticsReport::print_table(std::ostream& out) const {
  std::size_t width = 9;
  for (const auto& p : parameters) width = std::max(width, p.name.size());
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %10s %10s %10s  %s\n", static_cast<int>(width),
                "parameter", "r_hat", "ess", "max|z|", "status");
  out << line;
  for (const auto& p : parameters) {
    std::optional<double> zmax;
    for (const auto& g : p.geweke_z)
      if (g) zmax = std::max(zmax.value_or(0.0), std::abs(*g));
    std::snprintf(line, sizeof line, "%-*s %10s %10s %10s  %s\n", static_cast<int>(width),
                  p.name.c_str(), opt_str(p.r_hat).c_str(), opt_str(p.ess).c_str(),
                  opt_str(zmax).c_str(), p.flagged() ? "FLAG" : "PASS");
    out << line;
  }
  out << flagged_count() << " of " << parameters.size() << " parameters flagged\n";
}

DiagnosticsReport diagnose(const std::vector<std::string>& names,
                           const std::vector<Eigen::MatrixXd>& chains,
                           const Thresholds& thresholds) {
  if (chains.empty()) throw ParameterError("no chains to diagnose");
  DiagnosticsReport rep;
  rep.thresholds = thresholds;
  rep.chains = chains.size();
  rep.draws_per_chain = static_cast<std::size_t>(chains.front().rows());
  for (const auto& c : chains) {
    if (c.cols() != static_cast<Eigen::Index>(names.size()) ||
        c.rows() != chains.front().rows()) {
      throw ParameterError("chains disagree on shape");
    }
  }
  const std::size_t n = rep.draws_per_chain;
  // Column-major storage makes each parameter column contiguous.
  for (std::size_t j = 0; j < names.size(); ++j) {
    ParameterDiagnostics p;
    p.name = names[j];
    std::vector<Series> cols;
    for (const auto& c : chains) cols.emplace_back(c.col(static_cast<Eigen::Index>(j)).data(), n);
    if (cols.size() >= 2 && n >= 4) p.r_hat = r_hat(cols);
    if (n >= 8) p.ess = ess(cols);
    for (const auto& s : cols) p.geweke_z.push_back(n >= 100 ? geweke_z(s) : std::nullopt);

    p.flag_r_hat = p.r_hat && *p.r_hat > thresholds.r_hat_max;
    p.flag_ess = p.ess && *p.ess < thresholds.ess_min;
    for (const auto& g : p.geweke_z) p.flag_geweke |= g && std::abs(*g) > thresholds.geweke_abs_max;
    rep.parameters.push_back(std::move(p));
  }
  return rep;
}

DiagnosticsReport diagnose(const gibbs::PosteriorSample& sample, const Thresholds& thresholds) {
  std::vector<Eigen::MatrixXd> chains;
  for (std::size_t c = 0; c < sample.chains.size(); ++c) chains.push_back(sample.chain_columns(c));
  return diagnose(sample.column_names(), chains, thresholds);
}

}  // namespace metbayes::diag
