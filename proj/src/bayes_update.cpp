#include "metbayes/bayes_update.hpp"

#include <algorithm>

#include "metbayes/errors.hpp"
#include "metbayes/model_build.hpp"

namespace metbayes::update {
namespace {

using nlohmann::json;

json ig_json(const dist::InvGammaParams& p) { return {{"shape", p.shape}, {"scale", p.scale}}; }

dist::InvGammaParams ig_from(const json& j) {
  return {j.at("shape").get<double>(), j.at("scale").get<double>()};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (j[i].size() != j.size()) throw SchemaError("priors: wishart scale must be square");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class F>
auto fit_named(const std::string& name, F&& fit) {
  try {
    return fit();
  } catch (const DegenerateSampleError& e) {
    throw DegenerateSampleError(name + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(name + ": " + e.what());
  }
}

}  // namespace

gibbs::PriorSet WindowPriors::resolve(const data::EnvironmentIndex& envs,
                                      std::vector<std::string>* fallbacks) const {
  gibbs::PriorSet p;
  p.scalar = scalar;
  p.wishart = wishart;
  p.residual.reserve(envs.size());
  for (std::size_t e = 0; e < envs.size(); ++e) {
    auto it = residual_by_location.find(envs.environments[e].location);
    if (it != residual_by_location.end()) {
      p.residual.push_back(it->second);
    } else {
      p.residual.push_back(residual_default);
      if (fallbacks) fallbacks->push_back(envs.label(e));
    }
  }
  return p;
}

void WindowPriors::validate() const {
  for (const auto& s : scalar) s.validate();
  wishart.validate();
  residual_default.validate();
  for (const auto& [loc, p] : residual_by_location) p.validate();
}

json WindowPriors::to_json() const {
  json j;
  j["schema"] = "metbayes.priors/1";
  json& sc = j["scalar"];
  for (int k = 0; k < model::kScalarEffectCount; ++k) {
    sc[std::string(model::variance_name(k))] = ig_json(scalar[k]);
  }
  j["wishart"] = {{"dof", wishart.dof}, {"scale", matrix_json(wishart.scale)}};
  j["residual_default"] = ig_json(residual_default);
  json& res = j["residual_by_location"] = json::object();
  for (const auto& [loc, p] : residual_by_location) res[loc] = ig_json(p);
  return j;
}

WindowPriors WindowPriors::from_json(const json& j) {
  try {
    if (j.value("schema", "") != "metbayes.priors/1") {
      throw SchemaError("priors: expected schema metbayes.priors/1");
    }
    WindowPriors p;
    for (int k = 0; k < model::kScalarEffectCount; ++k) {
      p.scalar[k] = ig_from(j.at("scalar").at(std::string(model::variance_name(k))));
    }
    p.wishart.dof = j.at("wishart").at("dof").get<double>();
    p.wishart.scale = matrix_from(j.at("wishart").at("scale"));
    p.residual_default = ig_from(j.at("residual_default"));
    for (const auto& [loc, v] : j.at("residual_by_location").items()) {
      p.residual_by_location[loc] = ig_from(v);
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("priors: ") + e.what());
  }
}

std::string WindowPriors::dump() const { return to_json().dump(2) + "\n"; }

InitialPriorSpec InitialPriorSpec::identity_preset() {
  InitialPriorSpec s;
  s.wishart_dof = 20.0;
  s.wishart_diag = 1.0;
  s.wishart_offdiag = 0.0;
  return s;
}

WindowPriors InitialPriorSpec::for_zones(std::size_t zones) const {
  WindowPriors p;
  p.scalar.fill(scalar);
  for (const auto& [name, v] : scalar_overrides) {
    bool found = false;
    for (int k = 0; k < model::kScalarEffectCount; ++k) {
      if (model::variance_name(k) == name) {
        p.scalar[k] = v;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown variance component in prior overrides: " + name);
  }
  const auto z = static_cast<Eigen::Index>(std::max<std::size_t>(zones, 1));
  p.wishart.dof = wishart_dof;
  p.wishart.scale = Eigen::MatrixXd::Constant(z, z, wishart_offdiag);
  p.wishart.scale.diagonal().setConstant(wishart_diag);
  p.residual_default = residual;
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("initial priors: ") + e.what());
  }
  return p;
}

WindowPriors priors_from_posterior(const gibbs::PosteriorSample& sample,
                                   const data::EnvironmentIndex& envs,
                                   const dist::InvGammaParams& residual_default) {
  if (sample.total_draws() == 0) throw DegenerateSampleError("posterior sample is empty");
  if (envs.size() != sample.environments.size()) {
    throw ParameterError("environment index does not match the posterior sample");
  }
  WindowPriors p;
  for (int k = 0; k < model::kScalarEffectCount; ++k) {
    const auto draws = sample.merged_sigma2(k);
    p.scalar[k] = fit_named(std::string(model::variance_name(k)),
                            [&] { return dist::fit_inv_gamma_mle(draws); });
  }
  const auto sz = sample.merged_sigma_z();
  p.wishart = fit_named("Sigma_gen_zone", [&] { return dist::fit_inv_wishart_mle(sz); });

  std::map<std::string, std::vector<double>> pooled;
  for (std::size_t e = 0; e < envs.size(); ++e) {
    auto d = sample.merged_sigma2_e(e);
    auto& dst = pooled[envs.environments[e].location];
    dst.insert(dst.end(), d.begin(), d.end());
  }
  for (const auto& [loc, draws] : pooled) {
    p.residual_by_location[loc] = fit_named("var_resid at location " + loc,
                                            [&] { return dist::fit_inv_gamma_mle(draws); });
  }
  p.residual_default = residual_default;
  return p;
}

std::uint64_t window_seed(std::uint64_t seed, std::size_t l) {
  if (l == 0) return seed;
  return mix(seed ^ mix(static_cast<std::uint64_t>(l)));
}

UpdatingResult run_bayesian_updating(const std::vector<data::MetDataset>& windows,
                                     const InitialPriorSpec& init,
                                     const gibbs::SamplerConfig& cfg,
                                     const diag::Thresholds& thresholds,
                                     const WindowCallback& on_window) {
  if (windows.empty()) throw PlanError("no windows to fit");
  UpdatingResult out;
  WindowPriors carried = init.for_zones(windows.front().zones().size());
  for (std::size_t l = 0; l < windows.size(); ++l) {
    const auto& data = windows[l];
    WindowResult w;
    w.years = data.years();
    w.seed = window_seed(cfg.seed, l);
    w.priors_in = carried;

    const model::ModelMatrices m = model::build_design(data);
    w.warnings = m.warnings;
    // Window 1 starts from the default residual prior everywhere; only later
    // windows can miss a location.
    const gibbs::PriorSet priors =
        w.priors_in.resolve(m.env_index, l > 0 ? &w.residual_fallbacks : nullptr);
    gibbs::SamplerConfig wcfg = cfg;
    wcfg.seed = w.seed;
    try {
      w.posterior = gibbs::run_chains(m, m.y, priors, wcfg);
      w.diagnostics = diag::diagnose(w.posterior, thresholds);
      w.priors_out = priors_from_posterior(w.posterior, m.env_index, init.residual);
    } catch (const Error& e) {
      throw Error("window " + std::to_string(l + 1) + ": " + e.what());
    }
    carried = w.priors_out;
    if (on_window) on_window(l, w);
    out.windows.push_back(std::move(w));
  }
  return out;
}

}  // namespace metbayes::update
