#pragma once

// Multi-window Bayesian updating: fit window l, refit the variance-component
// priors by maximum likelihood on its posterior draws, carry them into
// window l+1. Only variance-component information crosses windows.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "metbayes/diagnostics.hpp"
#include "metbayes/distributions.hpp"
#include "metbayes/gibbs.hpp"
#include "metbayes/met_data.hpp"

namespace metbayes::update {

/// Priors in a form that survives a change of environments. Residual priors
/// are keyed by location: environments are year-location pairs and never
/// recur in a later window, the location does.
struct WindowPriors {
  std::array<dist::InvGammaParams, model::kScalarEffectCount> scalar;
  dist::InvWishartParams wishart;
  std::map<std::string, dist::InvGammaParams> residual_by_location;
  dist::InvGammaParams residual_default;

  /// Per-environment PriorSet for `envs`. Environments whose location has no
  /// fitted prior get residual_default and are listed in `fallbacks`.
  gibbs::PriorSet resolve(const data::EnvironmentIndex& envs,
                          std::vector<std::string>* fallbacks = nullptr) const;
  void validate() const;

  nlohmann::json to_json() const;
  static WindowPriors from_json(const nlohmann::json& j);
  /// Serialized form used for priors_in.json / priors_out.json.
  std::string dump() const;
};

struct InitialPriorSpec {
  dist::InvGammaParams scalar{5.0, 1.0};
  // Per-component replacements keyed by variance name ("var_year", ...).
  std::map<std::string, dist::InvGammaParams> scalar_overrides;
  double wishart_dof = 10.0;
  double wishart_diag = 1.0;
  double wishart_offdiag = 0.9;
  dist::InvGammaParams residual{5.0, 1.0};

  /// Inv-Wishart(20, I) start: uncorrelated zones.
  static InitialPriorSpec identity_preset();

  /// Throws ConfigError for unknown override names or an invalid prior.
  WindowPriors for_zones(std::size_t zones) const;
};

/// Refits every variance component by MLE on the merged chains. Residual
/// draws of all environments at one location are pooled into one fit.
WindowPriors priors_from_posterior(const gibbs::PosteriorSample& sample,
                                   const data::EnvironmentIndex& envs,
                                   const dist::InvGammaParams& residual_default);

struct WindowResult {
  std::vector<std::string> years;
  std::uint64_t seed = 0;
  WindowPriors priors_in;
  gibbs::PosteriorSample posterior;
  WindowPriors priors_out;
  diag::DiagnosticsReport diagnostics;
  std::vector<std::string> residual_fallbacks;
  std::vector<std::string> warnings;
};

struct UpdatingResult {
  std::vector<WindowResult> windows;

  const WindowPriors& final_priors() const { return windows.back().priors_out; }
};

/// Seed of window l (0-based). Window 0 uses the configured seed unchanged.
std::uint64_t window_seed(std::uint64_t seed, std::size_t l);

using WindowCallback = std::function<void(std::size_t, const WindowResult&)>;

/// Windows must be in chronological order. `on_window` runs after each window
/// completes, before the next one starts.
UpdatingResult run_bayesian_updating(const std::vector<data::MetDataset>& windows,
                                     const InitialPriorSpec& init,
                                     const gibbs::SamplerConfig& cfg,
                                     const diag::Thresholds& thresholds = {},
                                     const WindowCallback& on_window = {});

}  // namespace metbayes::update
