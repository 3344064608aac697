#include "soma/commands.hpp"

#include <algorithm>

#include <omp.h>

#include "report.hpp"
#include "soma/bounds.hpp"
#include "soma/diagnostics.hpp"
#include "soma/errors.hpp"

namespace soma {

using namespace report;

namespace {

void require_target(const RunConfig& config) {
  if (config.target.empty()) throw ConfigError("config has no target block");
}

bool is_linreg(const RunConfig& config) {
  return config.target.is_object() && config.target.value("kind", "") == "linreg";
}

}  // namespace

int cmd_sample(const RunConfig& config, OutputDir& out, const CommandContext&) {
  require_target(config);
  Stopwatch clock;
  const Model model = build_model(config.target);
  Rng init_rng = make_rng(derive_seed(config.seed, 0));
  const State init = initial_state(model, init_rng);
  const Execution exec = config.workers > 1 ? Execution::Parallel : Execution::Serial;
  if (config.workers > 0) omp_set_num_threads(config.workers);

  Json runs = Json::array();
  for (SamplerKind kind : config.samplers) {
    // every kind replays the same seed, so runs are paired
    const ChainRecord rec = run_chain(kind, *model.target, *model.proposal, init, config.iters,
                                      derive_seed(config.seed, 1), {config.thin, exec});
    out.write("trace_" + kind_name(kind) + ".csv", trace_table(rec).str());
    Json r;
    r["kind"] = kind_name(kind);
    r["acceptance_rate"] = acceptance_rate(rec);
    r["accept_count"] = rec.accept_count;
    r["step_count"] = rec.step_count;
    r["dead_offers"] = rec.dead_offers;
    r["wall_seconds"] = rec.wall_seconds;
    runs.push_back(r);
  }
  Json summary = summary_header(to_json(config), config.seed, clock.seconds());
  summary["runs"] = runs;
  out.write("summary.json", dump(summary));
  return kExitOk;
}

int cmd_couple(const RunConfig& config, OutputDir& out, const CommandContext&) {
  require_target(config);
  Stopwatch clock;
  const Model model = build_model(config.target);
  ReplicateOptions opts;
  opts.t_max = config.t_max;
  opts.burn_in = config.burn_in;
  opts.workers = config.workers;
  opts.coupling.record_distance = false;
  opts.coupling.record_wasserstein = config.record_wasserstein;
  opts.coupling.run_to_horizon = config.run_to_horizon;

  CsvTable meetings = meeting_table();
  CsvTable w2 = tidy_table();
  Json rates = Json::array();
  bool censored = false;
  for (SamplerKind kind : config.samplers) {
    const auto outcomes = run_coupled_replicates(kind, model, config.replicates, config.seed, opts);
    const auto samples = meeting_samples(outcomes);
    add_meetings(meetings, kind, samples);
    rates.push_back(rate_json(kind, samples, config.t_max));
    for (const auto& s : samples) censored = censored || s.censored;
    if (config.record_wasserstein) {
      for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& trace = outcomes[r].wasserstein_trace;
        for (std::size_t t = 0; t < trace.size(); t += config.thin) {
          w2.cell("w2").cell(kind_name(kind)).cell(t).cell(trace[t]).cell(r);
        }
      }
    }
  }
  out.write("meeting_times.csv", meetings.str());
  if (config.record_wasserstein) out.write("wasserstein.csv", w2.str());
  Json summary = summary_header(to_json(config), config.seed, clock.seconds());
  summary["rates"] = rates;
  out.write("rates.json", dump(summary));
  return censored && !config.allow_censored ? kExitCensored : kExitOk;
}

int cmd_bounds(const RunConfig& config, OutputDir& out, const CommandContext&) {
  if (config.n_list.empty() || config.m_list.empty()) {
    throw ConfigError("bounds needs non-empty n and M grids");
  }
  CsvTable t({"n", "M", "accept_soma", "accept_imwg", "rate_soma", "rate_ran", "rate_sys"});
  for (std::size_t n : config.n_list) {
    for (double m : config.m_list) {
      t.cell(n).cell(m).cell(accept_bound_soma(n, m)).cell(accept_bound_imwg(m));
      t.cell(rate_bound_soma(m)).cell(rate_bound_ran(m)).cell(rate_bound_sys(m));
    }
  }
  out.write("bounds.csv", t.str());
  return kExitOk;
}

int cmd_damcmc(const RunConfig& config, OutputDir& out, const CommandContext& ctx) {
  require_target(config);
  if (!is_linreg(config)) throw ConfigError("damcmc needs a target of kind 'linreg'");
  Stopwatch clock;
  const LinregProblem problem = build_linreg(config.target, ctx.base_dir);
  const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();

  CsvTable theta = theta_table(problem.covariates.p());
  CsvTable meetings = meeting_table();
  Json kinds = Json::array();
  bool censored = false;
  for (SamplerKind kind : config.samplers) {
    std::vector<DamcmcResult> results(config.replicates);
    std::string error;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(config.replicates); ++r) {
      try {
        DamcmcOptions opts;
        opts.iters = config.iters;
        opts.imputation_steps = config.imputation_steps;
        opts.thin = config.thin;
        results[static_cast<std::size_t>(r)] =
            damcmc_run(kind, problem, derive_seed(config.seed, static_cast<std::uint64_t>(r)), opts);
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw std::runtime_error(error);

    std::vector<double> acc;
    for (std::size_t r = 0; r < results.size(); ++r) {
      add_theta_rows(theta, results[r].theta, config.thin, r, kind);
      if (results[r].imputation.step_count > 0) acc.push_back(acceptance_rate(results[r].imputation));
    }
    Json k;
    k["kind"] = kind_name(kind);
    k["mean_acceptance_rate"] = acc.empty() ? Json(nullptr) : Json(mean_of(acc));
    k["acceptance_rates"] = acc;

    if (config.couple) {
      const auto outcomes = coupled_damcmc_replicates(kind, problem, config.replicates, config.seed,
                                                      config.t_max, config.workers);
      std::vector<MeetingSample> samples;
      bool followed = true;
      for (const auto& o : outcomes) {
        samples.push_back({o.meeting_time.value_or(o.t_max), o.censored});
        censored = censored || o.censored;
        followed = followed && o.theta_followed;
      }
      add_meetings(meetings, kind, samples);
      k["coupling"] = rate_json(kind, samples, config.t_max);
      k["coupling"]["theta_followed_data"] = followed;
    }
    kinds.push_back(k);
  }
  out.write("theta.csv", theta.str());
  if (config.couple) out.write("meeting_times.csv", meetings.str());
  Json summary = summary_header(to_json(config), config.seed, clock.seconds());
  summary["kinds"] = kinds;
  out.write("summary.json", dump(summary));
  return censored && !config.allow_censored ? kExitCensored : kExitOk;
}

const std::vector<std::string>& override_keys() {
  static const std::vector<std::string> keys{"replicates", "iters", "t_max", "burn_in",
                                             "thin",       "workers", "seed"};
  return keys;
}

RunConfig apply_overrides(RunConfig config, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    const auto& keys = override_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      std::string allowed;
      for (const auto& k : keys) allowed += (allowed.empty() ? "" : ", ") + k;
      throw ConfigError("override key '" + key + "' is not allowed (allowed: " + allowed + ")");
    }
    Json patch = to_json(config);
    try {
      patch[key] = key == "workers" ? Json(std::stoi(value)) : Json(std::stoull(value));
    } catch (const std::exception&) {
      throw ConfigError("override '" + kv + "' needs an unsigned integer");
    }
    config = parse_config(patch);
  }
  return config;
}

}  // namespace soma
