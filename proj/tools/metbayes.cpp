#include <iostream>

#include "CLI11.hpp"

#include "metbayes/cli.hpp"
#include "metbayes/errors.hpp"

namespace fs = std::filesystem;
using namespace metbayes;

int main(int argc, char** argv) {
  CLI::App app{"Bayesian mixed-model analysis and A-optimal allocation for multi-environment trials"};
  app.require_subcommand(1);

  std::string config_path;
  cli::Overrides ov;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", config_path, "run configuration (JSON)");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override every seed in the config");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker threads (0 = one per chain)")->check(CLI::NonNegativeNumber);
  };

  auto* fit = app.add_subcommand("fit", "run the windowed updating chain on a MET dataset");
  add_common(fit, true);
  auto* design = app.add_subcommand("design", "A-optimal zone weights from fitted priors");
  add_common(design, true);
  std::string priors_path;
  design->add_option("--priors", priors_path, "fitted priors JSON (default: <out>/final_priors.json)");
  auto* simulate = app.add_subcommand("simulate", "simulate a MET dataset with known components");
  add_common(simulate, false);
  auto* diagnose = app.add_subcommand("diagnose", "convergence diagnostics of a run");
  add_common(diagnose, false);
  std::string run_path;
  diagnose->add_option("run", run_path, "run directory or posterior CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    cli::RunConfig cfg;
    if (!config_path.empty()) cfg = cli::load_config(config_path);
    for (auto* sub : {fit, design, simulate, diagnose}) {
      if (sub->count("--seed")) ov.seed = seed;
      if (sub->count("--out")) ov.out = fs::path(out);
      if (sub->count("--threads")) ov.threads = threads;
    }
    ov.apply(cfg);

    if (*fit) {
      const auto dir = cli::cmd_fit(cfg, std::cerr);
      std::cout << dir.string() << "\n";
    } else if (*design) {
      if (!priors_path.empty()) cfg.design.priors = priors_path;
      std::cout << cli::cmd_design(cfg, std::cerr).string() << "\n";
    } else if (*simulate) {
      std::cout << cli::cmd_simulate(cfg, std::cerr).string() << "\n";
    } else if (*diagnose) {
      cli::cmd_diagnose(run_path, cfg.thresholds, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
