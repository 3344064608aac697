#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "soma/config.hpp"
#include "soma/io.hpp"

namespace soma {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitError = 2, kExitCensored = 3 };

/// Where relative fixture paths in a config resolve (the config file's directory).
struct CommandContext {
  std::filesystem::path base_dir;
};

int cmd_sample(const RunConfig& config, OutputDir& out, const CommandContext& ctx = {});
int cmd_couple(const RunConfig& config, OutputDir& out, const CommandContext& ctx = {});
int cmd_bounds(const RunConfig& config, OutputDir& out, const CommandContext& ctx = {});
int cmd_damcmc(const RunConfig& config, OutputDir& out, const CommandContext& ctx = {});

/// Keys an experiment override may set.
const std::vector<std::string>& override_keys();

/// Applies "key=value" overrides; keys outside override_keys() are a ConfigError.
RunConfig apply_overrides(RunConfig config, const std::vector<std::string>& overrides);

struct ExperimentInfo {
  std::string id;
  std::string description;
  /// Acceptance criterion the recipe's output speaks to, or "-" for descriptive ones.
  std::string feeds;
};
const std::vector<ExperimentInfo>& experiments();

/// Runs a named recipe. `scale` carries the recipe's defaults after overrides
/// (see recipe_defaults); results go under out/<id>/.
int cmd_experiment(const std::string& id, const RunConfig& scale, OutputDir& out,
                   const CommandContext& ctx = {});

/// Desk-scale defaults of a recipe, before overrides. Unknown ids are a
/// ConfigError listing the valid ones.
RunConfig recipe_defaults(const std::string& id);

}  // namespace soma
