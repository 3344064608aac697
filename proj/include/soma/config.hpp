#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "soma/damcmc.hpp"
#include "soma/samplers.hpp"
#include "soma/targets.hpp"

namespace soma {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

/// Everything a subcommand needs. Fields not present in the file keep their
/// defaults; unknown fields are a ConfigError.
struct RunConfig {
  int version = kConfigVersion;
  /// Optional label: synthetic, histogram, linreg, bounds, couple or sample.
  std::string experiment;
  Json target = Json::object();
  std::vector<SamplerKind> samplers{kAllSamplers[0], kAllSamplers[1], kAllSamplers[2]};
  std::size_t iters = 10000;
  std::size_t replicates = 100;
  std::size_t t_max = 100000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  int workers = 0;
  bool allow_censored = false;
  bool record_wasserstein = false;
  bool run_to_horizon = false;
  /// Coupled DAMCMC runs alongside the single chains.
  bool couple = false;
  std::optional<std::size_t> imputation_steps;
  std::vector<std::size_t> n_list;
  std::vector<double> m_list;
  std::string output = "out";
};

RunConfig parse_config(const Json& j);
RunConfig load_config(const std::filesystem::path& path);
Json to_json(const RunConfig& config);

/// Builds a target from its config block. Histogram blocks without explicit
/// noisy counts simulate uniform data from `data_seed` and privatize it.
Model build_model(const Json& block);

/// Linear-regression block: {"kind": "linreg", "fixture": path} or
/// {"kind": "linreg", "n", "eps", "bounds", "data_seed"} or explicit "values".
/// Relative fixture paths resolve against `base_dir`.
LinregProblem build_linreg(const Json& block, const std::filesystem::path& base_dir = {});

PrivateSummary load_private_summary(const std::filesystem::path& path);

}  // namespace soma
