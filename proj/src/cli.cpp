#include "metbayes/cli.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "metbayes/errors.hpp"
#include "metbayes/kernels.hpp"
#include "metbayes/optimal_design.hpp"

namespace metbayes::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json ig_json(const dist::InvGammaParams& p) { return {{"shape", p.shape}, {"scale", p.scale}}; }

dist::InvGammaParams ig_from(const json& j, dist::InvGammaParams dflt) {
  dflt.shape = j.value("shape", dflt.shape);
  dflt.scale = j.value("scale", dflt.scale);
  return dflt;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string window_dir_name(std::size_t l) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "window_%02zu", l + 1);
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  try {
    sampler.validate();
    priors.for_zones(2);
    simulate.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (plan.window_year_counts.empty()) throw ConfigError("window plan is empty");
  for (int c : plan.window_year_counts)
    if (c < 2) throw ConfigError("every window needs at least 2 years");
  for (const auto& [h, j] : design.grid)
    if (h < 1 || j < 1) throw ConfigError("design grid entries need H >= 1 and J >= 1");
  if (design.n_rep < 1) throw ConfigError("design.n_rep must be >= 1");
  if (design.n_draws < 1) throw ConfigError("design.n_draws must be >= 1");
  if (!(thresholds.r_hat_max > 0) || !(thresholds.ess_min >= 0) || !(thresholds.geweke_abs_max > 0)) {
    throw ConfigError("diagnostic thresholds must be positive");
  }
}

json RunConfig::to_json() const {
  json j;
  j["schema"] = kConfigSchema;
  json filters = json::object();
  for (const auto& [k, v] : csv.filters) filters[k] = v;
  j["data"] = {{"csv", data_csv.string()},
               {"columns",
                {{"year", csv.year},
                 {"season", csv.season},
                 {"zone", csv.zone},
                 {"location", csv.location},
                 {"genotype", csv.genotype},
                 {"replicate", csv.replicate},
                 {"yield", csv.yield}}},
               {"filters", filters},
               {"max_missing_fraction", csv.max_missing_fraction}};
  j["output_dir"] = output_dir.string();
  j["window_plan"] = plan.window_year_counts;
  j["sampler"] = {{"n_chains", sampler.n_chains},
                  {"n_iter", sampler.n_iter},
                  {"burn_in", sampler.burn_in},
                  {"thin", sampler.thin},
                  {"seed", sampler.seed},
                  {"threads", sampler.threads},
                  {"store_random_effects", sampler.store_random_effects}};
  json overrides = json::object();
  for (const auto& [k, v] : priors.scalar_overrides) overrides[k] = ig_json(v);
  j["priors"] = {{"scalar", ig_json(priors.scalar)},
                 {"scalar_overrides", overrides},
                 {"wishart",
                  {{"dof", priors.wishart_dof},
                   {"diag", priors.wishart_diag},
                   {"offdiag", priors.wishart_offdiag}}},
                 {"residual", ig_json(priors.residual)}};
  json grid = json::array();
  for (const auto& [h, jj] : design.grid) grid.push_back({h, jj});
  j["design"] = {{"grid", grid},
                 {"n_rep", design.n_rep},
                 {"n_draws", design.n_draws},
                 {"seed", design.seed},
                 {"priors", design.priors.string()}};
  j["diagnostics"] = {{"r_hat_max", thresholds.r_hat_max},
                      {"ess_min", thresholds.ess_min},
                      {"geweke_abs_max", thresholds.geweke_abs_max}};
  j["simulate"] = simulate.to_json();
  return j;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    if (j.value("schema", std::string(kConfigSchema)) != kConfigSchema) {
      throw ConfigError("unsupported config schema '" + j.at("schema").get<std::string>() +
                        "', expected " + kConfigSchema);
    }
    if (j.contains("data")) {
      const json& d = j.at("data");
      c.data_csv = resolve(base_dir, d.value("csv", std::string()));
      if (d.contains("columns")) {
        const json& col = d.at("columns");
        c.csv.year = col.value("year", c.csv.year);
        c.csv.season = col.value("season", c.csv.season);
        c.csv.zone = col.value("zone", c.csv.zone);
        c.csv.location = col.value("location", c.csv.location);
        c.csv.genotype = col.value("genotype", c.csv.genotype);
        c.csv.replicate = col.value("replicate", c.csv.replicate);
        c.csv.yield = col.value("yield", c.csv.yield);
      }
      if (d.contains("filters")) {
        for (const auto& [k, v] : d.at("filters").items()) c.csv.filters.emplace_back(k, v.get<std::string>());
      }
      c.csv.max_missing_fraction = d.value("max_missing_fraction", c.csv.max_missing_fraction);
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (j.contains("window_plan")) c.plan.window_year_counts = j.at("window_plan").get<std::vector<int>>();
    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      c.sampler.n_chains = s.value("n_chains", c.sampler.n_chains);
      c.sampler.n_iter = s.value("n_iter", c.sampler.n_iter);
      c.sampler.burn_in = s.value("burn_in", c.sampler.burn_in);
      c.sampler.thin = s.value("thin", c.sampler.thin);
      c.sampler.seed = s.value("seed", c.sampler.seed);
      c.sampler.threads = s.value("threads", c.sampler.threads);
      c.sampler.store_random_effects = s.value("store_random_effects", c.sampler.store_random_effects);
    }
    if (j.contains("priors")) {
      const json& p = j.at("priors");
      if (p.value("preset", std::string("correlated")) == "identity") {
        c.priors = update::InitialPriorSpec::identity_preset();
      } else if (p.value("preset", std::string("correlated")) != "correlated") {
        throw ConfigError("priors.preset must be 'correlated' or 'identity'");
      }
      if (p.contains("scalar")) c.priors.scalar = ig_from(p.at("scalar"), c.priors.scalar);
      if (p.contains("scalar_overrides")) {
        for (const auto& [k, v] : p.at("scalar_overrides").items()) {
          c.priors.scalar_overrides[k] = ig_from(v, c.priors.scalar);
        }
      }
      if (p.contains("wishart")) {
        const json& w = p.at("wishart");
        c.priors.wishart_dof = w.value("dof", c.priors.wishart_dof);
        c.priors.wishart_diag = w.value("diag", c.priors.wishart_diag);
        c.priors.wishart_offdiag = w.value("offdiag", c.priors.wishart_offdiag);
      }
      if (p.contains("residual")) c.priors.residual = ig_from(p.at("residual"), c.priors.residual);
    }
    if (j.contains("design")) {
      const json& d = j.at("design");
      if (d.contains("grid")) {
        c.design.grid.clear();
        for (const auto& e : d.at("grid")) c.design.grid.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
      }
      c.design.n_rep = d.value("n_rep", c.design.n_rep);
      c.design.n_draws = d.value("n_draws", c.design.n_draws);
      c.design.seed = d.value("seed", c.design.seed);
      c.design.priors = resolve(base_dir, d.value("priors", std::string()));
    }
    if (j.contains("diagnostics")) {
      const json& d = j.at("diagnostics");
      c.thresholds.r_hat_max = d.value("r_hat_max", c.thresholds.r_hat_max);
      c.thresholds.ess_min = d.value("ess_min", c.thresholds.ess_min);
      c.thresholds.geweke_abs_max = d.value("geweke_abs_max", c.thresholds.geweke_abs_max);
    }
    if (j.contains("simulate")) c.simulate = sim::SimSpec::from_json(j.at("simulate"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  try {
    return RunConfig::from_json(read_json(path), path.parent_path());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

void Overrides::apply(RunConfig& cfg) const {
  if (seed) {
    cfg.sampler.seed = *seed;
    cfg.design.seed = *seed;
    cfg.simulate.seed = *seed;
  }
  if (out) cfg.output_dir = *out;
  if (threads) {
    if (*threads < 0) throw ConfigError("--threads must be >= 0");
    cfg.sampler.threads = *threads;
  }
}

fs::path cmd_fit(const RunConfig& cfg, std::ostream& log) {
  if (cfg.data_csv.empty()) throw ConfigError("data.csv is not set");
  if (!fs::exists(cfg.data_csv)) throw ConfigError("data file not found: " + cfg.data_csv.string());
  data::LoadReport report;
  const data::MetDataset all = data::load_met_csv(cfg.data_csv, cfg.csv, &report);
  log << "loaded " << report.rows_read << " rows (" << report.rows_filtered << " filtered, "
      << report.missing_yield << " missing yields), " << all.years().size() << " years, "
      << all.zones().size() << " zones\n";
  const auto windows = data::partition_windows(all, cfg.plan);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  json manifest;
  manifest["schema"] = "metbayes.run/1";
  manifest["config"] = cfg.to_json();
  manifest["kernels"] = std::string(kernels::isa_name(kernels::active_isa()));
  manifest["windows"] = json::array();

  auto on_window = [&](std::size_t l, const update::WindowResult& w) {
    const fs::path wd = dir / window_dir_name(l);
    fs::create_directories(wd);
    write_text(wd / "priors_in.json", w.priors_in.dump());
    write_text(wd / "priors_out.json", w.priors_out.dump());
    {
      std::ofstream out(wd / "posterior.csv", std::ios::binary);
      gibbs::write_posterior_csv(w.posterior, out);
      if (!out) throw Error("write failed: " + (wd / "posterior.csv").string());
    }
    write_text(wd / "diagnostics.json", w.diagnostics.to_json().dump(2) + "\n");
    manifest["windows"].push_back({{"dir", window_dir_name(l)},
                                   {"years", w.years},
                                   {"seed", w.seed},
                                   {"residual_prior_fallbacks", w.residual_fallbacks},
                                   {"warnings", w.warnings},
                                   {"flagged_parameters", w.diagnostics.flagged_count()}});
    log << window_dir_name(l) << ": years " << w.years.front() << ".." << w.years.back() << ", "
        << w.posterior.total_draws() << " draws, " << w.diagnostics.flagged_count()
        << " flagged parameters";
    if (!w.residual_fallbacks.empty()) {
      log << ", " << w.residual_fallbacks.size() << " environments on the default residual prior";
    }
    log << "\n";
    for (const auto& warn : w.warnings) log << "  warning: " << warn << "\n";
  };
  const auto result =
      update::run_bayesian_updating(windows, cfg.priors, cfg.sampler, cfg.thresholds, on_window);
  write_text(dir / "final_priors.json", result.final_priors().dump());
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

fs::path cmd_design(const RunConfig& cfg, std::ostream& log) {
  const fs::path priors_path =
      cfg.design.priors.empty() ? cfg.output_dir / "final_priors.json" : cfg.design.priors;
  if (!fs::exists(priors_path)) throw ConfigError("fitted priors not found: " + priors_path.string());
  const update::WindowPriors priors = update::WindowPriors::from_json(read_json(priors_path));
  const auto z = static_cast<int>(priors.wishart.dim());

  fs::create_directories(cfg.output_dir);
  const fs::path csv_path = cfg.output_dir / "design.csv";
  std::ostringstream csv;
  csv << "kind,H,J";
  for (int i = 1; i <= z; ++i) csv << ",w" << i;
  for (int i = 1; i <= z; ++i) csv << ",sd_w" << i;
  for (int i = 1; i <= z; ++i) csv << ",J" << i;
  csv << ",Eff_a,MSE_Tr\n";

  json summary = json::array();
  dist::Rng rng(cfg.design.seed);
  const int threads = cfg.sampler.threads > 0 ? cfg.sampler.threads : 1;
  const design::VarianceComponents point = design::mean_components(priors);
  for (const auto& [H, J] : cfg.design.grid) {
    if (J < z) throw ConfigError("design grid: J=" + std::to_string(J) + " is below the zone count");
    const auto in = design::build_design_inputs(point, H, J, cfg.design.n_rep);
    const auto r = design::evaluate_design(in);
    csv << "point," << H << "," << J;
    for (int i = 0; i < z; ++i) csv << "," << fmt(r.design.weights(i));
    for (int i = 0; i < z; ++i) csv << ",";
    for (int i = 0; i < z; ++i) csv << "," << r.exact[i];
    csv << "," << fmt(r.eff_a) << "," << fmt(r.mse_tr) << "\n";

    const auto s = design::posterior_design_summary(priors, H, J, cfg.design.n_rep,
                                                    cfg.design.n_draws, rng, threads);
    csv << "posterior," << H << "," << J;
    for (int i = 0; i < z; ++i) csv << "," << fmt(s.weight_mean(i));
    for (int i = 0; i < z; ++i) csv << "," << fmt(s.weight_sd(i));
    for (int i = 0; i < z; ++i) csv << ",";
    csv << "," << fmt(s.eff_mean) << "," << fmt(s.mse_mean) << "\n";

    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    summary.push_back({{"H", H},
                       {"J", J},
                       {"point", {{"weights", vec(r.design.weights)},
                                  {"exact", r.exact},
                                  {"criterion", r.design.criterion},
                                  {"converged", r.design.converged},
                                  {"eff_a", r.eff_a},
                                  {"mse_tr", r.mse_tr}}},
                       {"posterior", {{"n_draws", s.n_draws},
                                      {"weight_mean", vec(s.weight_mean)},
                                      {"weight_sd", vec(s.weight_sd)},
                                      {"weight_min", vec(s.weight_min)},
                                      {"weight_max", vec(s.weight_max)},
                                      {"eff_mean", s.eff_mean},
                                      {"eff_sd", s.eff_sd},
                                      {"mse_mean", s.mse_mean},
                                      {"mse_sd", s.mse_sd},
                                      {"unconverged", s.unconverged},
                                      {"redraws", s.redraws}}}});
    log << "H=" << H << " J=" << J << ": Eff_a " << fmt(s.eff_mean) << ", MSE_Tr " << fmt(s.mse_mean);
    if (s.unconverged > 0) log << " (" << s.unconverged << " draws hit the iteration limit)";
    log << "\n";
  }
  write_text(csv_path, csv.str());
  write_text(cfg.output_dir / "design.json",
             json{{"schema", "metbayes.design/1"}, {"priors", priors_path.string()}, {"rows", summary}}
                     .dump(2) +
                 "\n");
  return csv_path;
}

fs::path cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const auto s = sim::simulate_dataset(cfg.simulate);
  fs::create_directories(cfg.output_dir);
  const fs::path csv = cfg.output_dir / "data.csv";
  data::write_met_csv(s.data, csv);
  write_text(cfg.output_dir / "truth.json", s.truth.to_json().dump(2) + "\n");
  log << "wrote " << s.data.size() << " rows to " << csv.string() << "\n";
  return csv;
}

PosteriorTable read_posterior_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  auto header = data::split_csv_record(line);
  if (header.size() < 3 || header[0] != "chain" || header[1] != "draw") {
    throw ParseError(path.string() + ": header must start with chain,draw");
  }
  PosteriorTable t;
  t.names.assign(header.begin() + 2, header.end());
  const std::size_t p = t.names.size();
  std::map<long, std::vector<std::vector<double>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = data::split_csv_record(line);
    if (f.size() != p + 2) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(p + 2) + " fields, got " + std::to_string(f.size()));
    }
    std::vector<double> vals(p);
    long chain = 0;
    try {
      std::size_t used = 0;
      chain = std::stol(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("chain");
      for (std::size_t j = 0; j < p; ++j) {
        vals[j] = std::stod(f[j + 2], &used);
        if (used != f[j + 2].size()) throw std::invalid_argument("value");
      }
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    rows[chain].push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no draws");
  for (const auto& [c, r] : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < p; ++j) m(i, j) = r[i][j];
    t.chains.push_back(std::move(m));
  }
  for (const auto& m : t.chains) {
    if (m.rows() != t.chains.front().rows()) throw ParseError(path.string() + ": chains differ in length");
  }
  return t;
}

std::size_t cmd_diagnose(const fs::path& target, const diag::Thresholds& thresholds,
                         std::ostream& out) {
  std::vector<std::pair<std::string, fs::path>> files;
  if (fs::is_directory(target)) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(target)) {
      if (e.is_directory() && fs::exists(e.path() / "posterior.csv")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) files.emplace_back(d.filename().string(), d / "posterior.csv");
    if (fs::exists(target / "posterior.csv")) files.emplace_back(".", target / "posterior.csv");
    if (files.empty()) throw Error("no posterior.csv under " + target.string());
  } else {
    files.emplace_back(target.filename().string(), target);
  }
  std::size_t flagged = 0;
  for (const auto& [label, file] : files) {
    const auto t = read_posterior_csv(file);
    const auto rep = diag::diagnose(t.names, t.chains, thresholds);
    out << "== " << label << " (" << rep.chains << " chains x " << rep.draws_per_chain << " draws)\n";
    rep.print_table(out);
    flagged += rep.flagged_count();
  }
  return flagged;
}

}  // namespace metbayes::cli
