// soma: sample, couple, bound and reproduce the desk-scale experiments.

#include <cstdint>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "soma/commands.hpp"
#include "soma/config.hpp"
#include "soma/errors.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::size_t> thin;
};

void apply_globals(soma::RunConfig& c, const Globals& g) {
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.output = *g.out;
  if (g.workers) c.workers = *g.workers;
  if (g.thin) c.thin = *g.thin;
  // re-validate after the flags
  c = soma::parse_config(soma::to_json(c));
}

soma::RunConfig config_from(const Globals& g, bool required) {
  soma::RunConfig c;
  if (!g.config.empty()) {
    c = soma::load_config(g.config);
  } else if (required) {
    throw soma::ConfigError("--config is required for this subcommand");
  }
  apply_globals(c, g);
  return c;
}

std::filesystem::path base_dir(const Globals& g) {
  if (g.config.empty()) return std::filesystem::current_path();
  return std::filesystem::absolute(g.config).parent_path();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SOMA samplers, couplings and private-data imputation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--workers", g.workers, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--thin", g.thin, "keep every N-th iteration")->check(CLI::PositiveNumber);

  auto* sample = app.add_subcommand("sample", "run single chains, write traces and acceptance");
  auto* couple = app.add_subcommand("couple", "coupled replicates, meeting times and rate estimates");
  auto* damcmc = app.add_subcommand("damcmc", "private linear regression by data augmentation");

  auto* bounds = app.add_subcommand("bounds", "tabulate acceptance and rate bounds");
  std::vector<std::size_t> n_list;
  std::vector<double> m_list;
  bounds->add_option("--n", n_list, "component counts")->check(CLI::PositiveNumber);
  bounds->add_option("--M", m_list, "ratio bounds (>= 1)");

  auto* experiment = app.add_subcommand("experiment", "run a named desk-scale recipe");
  std::string experiment_id;
  std::vector<std::string> overrides;
  bool list = false;
  experiment->add_option("id", experiment_id, "recipe id (see --list)");
  experiment->add_option("--set", overrides, "override key=value");
  experiment->add_flag("--list", list, "list recipes");

  for (auto* sub : {sample, couple, damcmc, bounds, experiment}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : soma::kExitError;
  }

  std::optional<soma::OutputDir> out;
  try {
    soma::CommandContext ctx{base_dir(g)};
    if (experiment->parsed()) {
      if (list) {
        for (const auto& info : soma::experiments()) {
          std::cout << info.id << "\t" << info.feeds << "\t" << info.description << "\n";
        }
        return soma::kExitOk;
      }
      if (experiment_id.empty()) throw soma::ConfigError("experiment needs an id (try --list)");
      soma::RunConfig c = soma::apply_overrides(soma::recipe_defaults(experiment_id), overrides);
      apply_globals(c, g);
      out.emplace(c.output);
      return soma::cmd_experiment(experiment_id, c, *out, ctx);
    }
    if (bounds->parsed()) {
      soma::RunConfig c = config_from(g, false);
      if (!n_list.empty()) c.n_list = n_list;
      if (!m_list.empty()) c.m_list = m_list;
      c = soma::parse_config(soma::to_json(c));
      out.emplace(c.output);
      return soma::cmd_bounds(c, *out, ctx);
    }
    const soma::RunConfig c = config_from(g, true);
    out.emplace(c.output);
    if (sample->parsed()) return soma::cmd_sample(c, *out, ctx);
    if (couple->parsed()) return soma::cmd_couple(c, *out, ctx);
    return soma::cmd_damcmc(c, *out, ctx);
  } catch (const std::exception& e) {
    std::cerr << "soma: " << e.what() << "\n";
    if (out) out->rollback();
    return soma::kExitError;
  }
}
