#include "metbayes/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "metbayes/errors.hpp"

namespace metbayes::sim {
namespace {

using nlohmann::json;

std::string label(const char* prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, i + 1);
  return buf;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

// Square root of a PSD matrix via its eigendecomposition, so singular
// covariances (including all zeros) are allowed.
Eigen::MatrixXd psd_root(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

}  // namespace

Eigen::MatrixXd SimSpec::sigma_z_or_default() const {
  if (sigma_z.size() > 0) return sigma_z;
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(zones, zones, 0.1);
  m.diagonal().setConstant(0.2);
  return m;
}

void SimSpec::validate() const {
  if (years < 1 || zones < 1 || locations_per_zone < 1 || genotypes < 1 || replicates < 1) {
    throw ParameterError("simulation counts must all be >= 1");
  }
  if (!zeta.empty() && static_cast<int>(zeta.size()) != zones) {
    throw ParameterError("zeta needs one value per zone");
  }
  for (double s : sigma2)
    if (!(s >= 0.0)) throw ParameterError("simulation variances must be >= 0");
  const Eigen::MatrixXd sz = sigma_z_or_default();
  if (sz.rows() != zones || sz.cols() != zones) throw ParameterError("Sigma_Z must be zones x zones");
  if (!sz.isApprox(sz.transpose())) throw ParameterError("Sigma_Z must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sz);
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, sz.cwiseAbs().maxCoeff())) {
    throw ParameterError("Sigma_Z must be positive semi-definite");
  }
  if (residual_prior) {
    residual_prior->validate();
  } else if (!(residual >= 0.0)) {
    throw ParameterError("residual variance must be >= 0");
  }
}

json SimSpec::to_json() const {
  json j;
  j["years"] = years;
  j["zones"] = zones;
  j["locations_per_zone"] = locations_per_zone;
  j["genotypes"] = genotypes;
  j["replicates"] = replicates;
  j["first_year"] = first_year;
  j["mu"] = mu;
  j["zeta"] = zeta;
  json& v = j["variances"];
  for (int k = 0; k < model::kScalarEffectCount; ++k) v[std::string(model::variance_name(k))] = sigma2[k];
  j["sigma_z"] = matrix_json(sigma_z_or_default());
  if (residual_prior) {
    j["residual"] = {{"shape", residual_prior->shape}, {"scale", residual_prior->scale}};
  } else {
    j["residual"] = residual;
  }
  j["seed"] = seed;
  return j;
}

SimSpec SimSpec::from_json(const json& j) {
  SimSpec s;
  try {
    s.years = j.value("years", s.years);
    s.zones = j.value("zones", s.zones);
    s.locations_per_zone = j.value("locations_per_zone", s.locations_per_zone);
    s.genotypes = j.value("genotypes", s.genotypes);
    s.replicates = j.value("replicates", s.replicates);
    s.first_year = j.value("first_year", s.first_year);
    s.mu = j.value("mu", s.mu);
    if (j.contains("zeta")) s.zeta = j.at("zeta").get<std::vector<double>>();
    if (j.contains("variances")) {
      for (const auto& [name, val] : j.at("variances").items()) {
        bool found = false;
        for (int k = 0; k < model::kScalarEffectCount; ++k) {
          if (model::variance_name(k) == name) {
            s.sigma2[k] = val.get<double>();
            found = true;
          }
        }
        if (!found) throw ConfigError("simulation: unknown variance '" + name + "'");
      }
    }
    if (j.contains("sigma_z")) s.sigma_z = matrix_from(j.at("sigma_z"));
    if (j.contains("residual")) {
      const auto& r = j.at("residual");
      if (r.is_object()) {
        s.residual_prior = dist::InvGammaParams{r.at("shape").get<double>(), r.at("scale").get<double>()};
      } else {
        s.residual = r.get<double>();
      }
    }
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulation spec: ") + e.what());
  }
  s.validate();
  return s;
}

double Truth::env_mean_var_resid() const {
  double s = 0.0;
  for (const auto& [k, v] : sigma2_e) s += v;
  return s / static_cast<double>(sigma2_e.size());
}

json Truth::to_json() const {
  json j;
  j["schema"] = "metbayes.truth/1";
  j["spec"] = spec.to_json();
  j["env_mean_var_resid"] = env_mean_var_resid();
  j["var_resid_env"] = sigma2_e;
  json& e = j["effects"];
  for (int k = 0; k < model::kEffectCount; ++k) e[std::string(model::effect_name(k))] = effects[k];
  return j;
}

Simulated simulate_dataset(const SimSpec& spec, dist::Rng& rng) {
  spec.validate();
  using model::Effect;
  auto idx = [](Effect e) { return static_cast<int>(e); };
  std::normal_distribution<double> normal(0.0, 1.0);
  Truth truth;
  truth.spec = spec;
  auto draw = [&](Effect e, const std::string& key) {
    const double v = std::sqrt(spec.sigma2[idx(e)]) * normal(rng);
    truth.effects[idx(e)][key] = v;
    return v;
  };

  const int Z = spec.zones;
  std::vector<std::string> years, zones, genos;
  for (int h = 0; h < spec.years; ++h) years.push_back(std::to_string(spec.first_year + h));
  for (int z = 0; z < Z; ++z) zones.push_back(label("Z", z));
  for (int g = 0; g < spec.genotypes; ++g) genos.push_back(label("G", g));
  auto loc_label = [&](int z, int c) { return zones[z] + "L" + std::to_string(c + 1); };

  // Genotype-by-zone blocks first, then year-level effects in nesting order.
  const Eigen::MatrixXd root = psd_root(spec.sigma_z_or_default());
  std::vector<Eigen::VectorXd> alpha(spec.genotypes);
  for (int g = 0; g < spec.genotypes; ++g) {
    Eigen::VectorXd u(Z);
    for (int z = 0; z < Z; ++z) u(z) = normal(rng);
    alpha[g] = root * u;
    for (int z = 0; z < Z; ++z) truth.effects[model::kGenZone][genos[g] + ":" + zones[z]] = alpha[g](z);
  }

  std::vector<data::ObservationRow> rows;
  std::gamma_distribution<double> gamma(spec.residual_prior ? spec.residual_prior->shape : 1.0, 1.0);
  for (int h = 0; h < spec.years; ++h) {
    const std::string& yr = years[h];
    const double eta = draw(Effect::year, yr);
    std::vector<double> omega(spec.genotypes);
    for (int g = 0; g < spec.genotypes; ++g) omega[g] = draw(Effect::gen_year, genos[g] + ":" + yr);
    for (int z = 0; z < Z; ++z) {
      const std::string zy = zones[z] + ":" + yr;
      const double beta = draw(Effect::zone_year, zy);
      const double zeta = spec.zeta.empty() ? 0.0 : spec.zeta[z];
      std::vector<double> tau(spec.genotypes);
      for (int g = 0; g < spec.genotypes; ++g) tau[g] = draw(Effect::gen_zone_year, genos[g] + ":" + zy);
      for (int c = 0; c < spec.locations_per_zone; ++c) {
        const std::string loc = loc_label(z, c);
        const std::string zcy = zones[z] + ":" + loc + ":" + yr;
        const double delta = draw(Effect::zone_loc_year, zcy);
        const double s2e = spec.residual_prior ? spec.residual_prior->scale / gamma(rng) : spec.residual;
        truth.sigma2_e[yr + ":" + loc] = s2e;
        const double sde = std::sqrt(s2e);
        std::vector<double> phi(spec.genotypes);
        for (int g = 0; g < spec.genotypes; ++g) phi[g] = draw(Effect::gen_zone_loc_year, genos[g] + ":" + zcy);
        for (int v = 0; v < spec.replicates; ++v) {
          const double b = draw(Effect::zone_loc_rep_year, zcy + ":" + std::to_string(v + 1));
          for (int g = 0; g < spec.genotypes; ++g) {
            const double y = spec.mu + zeta + eta + beta + delta + b + alpha[g](z) + omega[g] + tau[g] +
                             phi[g] + sde * normal(rng);
            rows.push_back({yr, zones[z], loc, genos[g], v + 1, y});
          }
        }
      }
    }
  }
  return {data::MetDataset(std::move(rows), zones), std::move(truth)};
}

Simulated simulate_dataset(const SimSpec& spec) {
  dist::Rng rng(spec.seed);
  return simulate_dataset(spec, rng);
}

}  // namespace metbayes::sim
