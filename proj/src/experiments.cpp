// Desk-scale recipes behind `soma experiment <id>`. Each writes its tables under
// out/<id>/ plus a summary.json carrying the resolved settings.

#include <cmath>
#include <functional>
#include <map>

#include <omp.h>

#include "report.hpp"
#include "soma/bounds.hpp"
#include "soma/commands.hpp"
#include "soma/diagnostics.hpp"
#include "soma/errors.hpp"

#ifndef SOMA_DATA_DIR
#define SOMA_DATA_DIR "data"
#endif

namespace soma {

using namespace report;

namespace {

const std::vector<double> kSyntheticEps{0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0};
const std::vector<std::size_t> kHistogramN{2, 5, 10, 20, 30};

struct Recipe {
  ExperimentInfo info;
  std::function<void(RunConfig&)> defaults;
  std::function<Json(const RunConfig&, OutputDir&, const std::string&)> run;
};

Model synthetic_model(bool beta, double eps, std::size_t n = 2) {
  return beta ? beta_laplace_target(10.0, 10.0, eps, 0.5, n) : exp_laplace_target(eps, 1.0, n);
}

Model histogram_model(std::size_t n, std::uint64_t data_seed) {
  Json block = {{"kind", "perturbed_histogram"}, {"n", n}, {"eps", 5.0}, {"bins", 10},
                {"data_seed", data_seed}};
  return build_model(block);
}

LinregProblem fixture_problem(double eps) {
  const std::string name = eps == 3.0 ? "sdp_eps3.json" : "sdp_eps30.json";
  return default_linreg_problem(load_private_summary(std::filesystem::path(SOMA_DATA_DIR) / name));
}

LinregProblem simulated_problem(std::size_t n, double eps, std::uint64_t data_seed) {
  Rng rng = make_rng(data_seed);
  const CovariatePrior cov{Eigen::Vector2d(0.9, -1.17)};
  return default_linreg_problem(
      simulate_private_summary(rng, n, eps, reference_theta(), cov, ClampBounds(3, 6.0)));
}

ReplicateOptions replicate_options(const RunConfig& c) {
  ReplicateOptions o;
  o.t_max = c.t_max;
  o.burn_in = c.burn_in;
  o.workers = c.workers;
  o.coupling.record_distance = false;
  return o;
}

/// Replicate r couples chains on its own data set, so the spread covers data
/// draws as well as chain randomness.
std::vector<CouplingOutcome> histogram_replicates(SamplerKind kind, std::size_t n, const RunConfig& c,
                                                  const ReplicateOptions& opts) {
  std::vector<CouplingOutcome> outcomes(c.replicates);
  ReplicateOptions one = opts;
  one.workers = 1;
  std::string error;
  const int threads = c.workers > 0 ? c.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(c.replicates); ++r) {
    const auto k = static_cast<std::uint64_t>(r);
    try {
      const Model model = histogram_model(n, derive_seed(c.seed + n, k));
      outcomes[static_cast<std::size_t>(r)] =
          run_coupled_replicates(kind, model, 1, derive_seed(c.seed, k), one).front();
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);
  return outcomes;
}

// --- synthetic n = 2 ----------------------------------------------------------------

Json fig2(const RunConfig& c, OutputDir& out, const std::string& dir) {
  const Model model = synthetic_model(true, 20.0);
  const State init = State::scalars({0.3, 0.3});
  for (SamplerKind kind : c.samplers) {
    const auto rec = run_chain(kind, *model.target, *model.proposal, init, c.iters, c.seed, {c.thin});
    out.write(dir + "/trace_" + kind_name(kind) + ".csv", trace_table(rec).str());
  }
  return {{"eps", 20.0}, {"a0", 10.0}, {"b0", 10.0}, {"y_obs", 0.5}, {"init", {0.3, 0.3}}};
}

Json acceptance_grid(const RunConfig& c, OutputDir& out, const std::string& dir, bool beta) {
  CsvTable t({"kind", "eps", "n", "acceptance", "bound"});
  for (double eps : kSyntheticEps) {
    const Model model = synthetic_model(beta, eps);
    Rng init_rng = make_rng(derive_seed(c.seed, 0));
    const State init = initial_state(model, init_rng);
    for (SamplerKind kind : c.samplers) {
      const auto rec = run_chain(kind, *model.target, *model.proposal, init, c.iters,
                                 derive_seed(c.seed, 1), {c.iters});
      const double m = std::exp(eps);
      const double bound = !beta ? std::nan("")
                           : kind == SamplerKind::Soma ? accept_bound_soma(2, m)
                                                       : accept_bound_imwg(m);
      t.cell(kind_name(kind)).cell(eps).cell(std::size_t{2}).cell(acceptance_rate(rec)).cell(bound);
    }
  }
  out.write(dir + "/acceptance.csv", t.str());
  return {{"eps_grid", kSyntheticEps}, {"prior", beta ? "beta(10,10)" : "exp(1)"}};
}

double posterior_correlation(const Model& model, const RunConfig& c) {
  Rng init_rng = make_rng(derive_seed(c.seed, 7));
  const State init = initial_state(model, init_rng);
  const auto rec = run_chain(SamplerKind::Soma, *model.target, *model.proposal, init, c.iters,
                             derive_seed(c.seed, 8), {1});
  double m0 = 0, m1 = 0;
  for (const auto& s : rec.trace) {
    m0 += s[0][0];
    m1 += s[1][0];
  }
  const double n = static_cast<double>(rec.trace.size());
  m0 /= n;
  m1 /= n;
  double c01 = 0, c00 = 0, c11 = 0;
  for (const auto& s : rec.trace) {
    const double a = s[0][0] - m0, b = s[1][0] - m1;
    c01 += a * b;
    c00 += a * a;
    c11 += b * b;
  }
  return c01 / std::sqrt(c00 * c11);
}

Json rate_grid(const RunConfig& c, OutputDir& out, const std::string& dir, bool beta) {
  CsvTable t({"eps", "rho", "kind", "r_hat", "n_replicates", "censored_count", "bound"});
  CsvTable meetings({"eps", "replicate", "kind", "tau", "censored"});
  for (double eps : kSyntheticEps) {
    const Model model = synthetic_model(beta, eps);
    const double rho = posterior_correlation(model, c);
    for (SamplerKind kind : c.samplers) {
      const auto samples =
          meeting_samples(run_coupled_replicates(kind, model, c.replicates, c.seed, replicate_options(c)));
      const Json r = rate_json(kind, samples, c.t_max);
      const double m = std::exp(eps);
      const double bound = !beta ? std::nan("")
                           : kind == SamplerKind::Soma  ? rate_bound_soma(m)
                           : kind == SamplerKind::RanImwg ? rate_bound_ran(m)
                                                          : rate_bound_sys(m);
      t.cell(eps).cell(rho).cell(kind_name(kind));
      t.cell(r["r_hat"].is_null() ? std::string("nan") : format_number(r["r_hat"].get<double>()));
      t.cell(samples.size()).cell(r["censored_count"].get<std::size_t>()).cell(bound);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        meetings.cell(eps).cell(i).cell(kind_name(kind)).cell(samples[i].tau).cell(samples[i].censored);
      }
    }
  }
  out.write(dir + "/rates.csv", t.str());
  out.write(dir + "/meeting_times.csv", meetings.str());
  return {{"eps_grid", kSyntheticEps}, {"prior", beta ? "beta(10,10)" : "exp(1)"}};
}

Json fig9(const RunConfig& c, OutputDir& out, const std::string& dir) {
  const Model model = synthetic_model(true, 20.0);
  CsvTable surv({"kind", "t", "survival"});
  CsvTable meetings = meeting_table();
  Json rates = Json::array();
  for (SamplerKind kind : c.samplers) {
    const auto samples =
        meeting_samples(run_coupled_replicates(kind, model, c.replicates, c.seed, replicate_options(c)));
    add_meetings(meetings, kind, samples);
    rates.push_back(rate_json(kind, samples, c.t_max));
    std::size_t horizon = 0;
    for (const auto& s : samples) horizon = std::max(horizon, s.tau);
    for (std::size_t t = 0; t <= horizon; ++t) {
      std::size_t alive = 0;
      for (const auto& s : samples) alive += (s.censored || s.tau > t) ? 1 : 0;
      surv.cell(kind_name(kind)).cell(t).cell(static_cast<double>(alive) / static_cast<double>(samples.size()));
      if (alive == 0) break;
    }
  }
  out.write(dir + "/survival.csv", surv.str());
  out.write(dir + "/meeting_times.csv", meetings.str());
  return {{"eps", 20.0}, {"rates", rates}};
}

// --- perturbed histograms -------------------------------------------------------

Json fig5(const RunConfig& c, OutputDir& out, const std::string& dir) {
  const std::vector<double> qs{0.25, 0.5, 0.75};
  CsvTable t = tidy_table();
  for (std::size_t n : {std::size_t{20}, std::size_t{50}}) {
    const Model model = histogram_model(n, c.seed);
    for (SamplerKind kind : c.samplers) {
      for (std::size_t r = 0; r < c.replicates; ++r) {
        Rng init_rng = make_rng(derive_seed(c.seed, 1000 + r));
        const State init = initial_state(model, init_rng);
        const auto rec = run_chain(kind, *model.target, *model.proposal, init, c.iters,
                                   derive_seed(c.seed, r), {c.thin});
        const auto series = quantile_trace(rec, qs);
        for (const auto& s : series) {
          for (std::size_t k = 0; k < s.values.size(); ++k) {
            t.cell("n" + std::to_string(n) + "_" + s.label).cell(kind_name(kind));
            t.cell(rec.iterations[k]).cell(s.values[k]).cell(r);
          }
        }
      }
    }
  }
  out.write(dir + "/quantiles.csv", t.str());
  return {{"n", {20, 50}}, {"eps", 5.0}, {"bins", 10}, {"quantiles", qs}};
}

Json fig6(const RunConfig& c, OutputDir& out, const std::string& dir) {
  CsvTable acc({"n", "kind", "replicate", "acceptance"});
  CsvTable meetings({"n", "replicate", "kind", "tau", "censored"});
  for (std::size_t n : kHistogramN) {
    const Model model = histogram_model(n, c.seed);
    for (SamplerKind kind : c.samplers) {
      for (std::size_t r = 0; r < c.replicates; ++r) {
        Rng init_rng = make_rng(derive_seed(c.seed, 1000 + r));
        const State init = initial_state(model, init_rng);
        const auto rec = run_chain(kind, *model.target, *model.proposal, init, c.iters,
                                   derive_seed(c.seed, r), {c.iters});
        acc.cell(n).cell(kind_name(kind)).cell(r).cell(acceptance_rate(rec));
      }
      const auto samples = meeting_samples(histogram_replicates(kind, n, c, replicate_options(c)));
      for (std::size_t r = 0; r < samples.size(); ++r) {
        meetings.cell(n).cell(r).cell(kind_name(kind)).cell(samples[r].tau).cell(samples[r].censored);
      }
    }
  }
  out.write(dir + "/acceptance.csv", acc.str());
  out.write(dir + "/meeting_times.csv", meetings.str());
  return {{"n_grid", kHistogramN}, {"eps", 5.0}, {"bins", 10}};
}

Json fig7(const RunConfig& c, OutputDir& out, const std::string& dir) {
  CsvTable t = tidy_table();
  for (std::size_t n : {std::size_t{10}, std::size_t{20}}) {
    ReplicateOptions opts = replicate_options(c);
    opts.coupling.record_wasserstein = true;
    opts.coupling.run_to_horizon = true;
    for (SamplerKind kind : c.samplers) {
      const auto outcomes = histogram_replicates(kind, n, c, opts);
      for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& w = outcomes[r].wasserstein_trace;
        for (std::size_t k = 0; k < w.size(); k += c.thin) {
          t.cell("w2_n" + std::to_string(n)).cell(kind_name(kind)).cell(k).cell(w[k]).cell(r);
        }
      }
    }
  }
  out.write(dir + "/wasserstein.csv", t.str());
  return {{"n", {10, 20}}, {"eps", 5.0}, {"bins", 10}, {"metric", "W2 distance (not squared)"}};
}

// --- private linear regression ------------------------------------------------------

std::vector<DamcmcResult> independent_chains(SamplerKind kind, const LinregProblem& problem,
                                             const RunConfig& c) {
  std::vector<DamcmcResult> results(c.replicates);
  std::string error;
  const int threads = c.workers > 0 ? c.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(c.replicates); ++r) {
    try {
      DamcmcOptions opts;
      opts.iters = c.iters;
      opts.thin = c.iters;
      results[static_cast<std::size_t>(r)] =
          damcmc_run(kind, problem, derive_seed(c.seed, static_cast<std::uint64_t>(r)), opts);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);
  return results;
}

/// Thinned theta draws from one long SOMA chain, standing in for the posterior.
std::vector<RegressionTheta> reference_draws(const LinregProblem& problem, std::uint64_t seed,
                                             std::size_t count, std::size_t thin) {
  DamcmcOptions opts;
  opts.iters = 1000 + count * thin;
  opts.thin = opts.iters;
  const auto res = damcmc_run(SamplerKind::Soma, problem, seed, opts);
  std::vector<RegressionTheta> out;
  for (std::size_t k = 1; k <= count; ++k) out.push_back(res.theta[1000 + k * thin]);
  return out;
}

EmpiricalMeasure theta_measure(const std::vector<RegressionTheta>& thetas) {
  const std::size_t d = static_cast<std::size_t>(thetas.front().beta.size()) + 1;
  EmpiricalMeasure m(thetas.size(), d);
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    auto row = m[i];
    for (std::size_t k = 0; k + 1 < d; ++k) row[k] = thetas[i].beta[static_cast<Eigen::Index>(k)];
    row[d - 1] = thetas[i].sigma2;
  }
  return m;
}

Json fig8(const RunConfig& c, OutputDir& out, const std::string& dir) {
  const LinregProblem problem = simulated_problem(100, 30.0, c.seed);
  CsvTable t = tidy_table();
  for (SamplerKind kind : c.samplers) {
    const auto chains = independent_chains(kind, problem, c);
    for (std::size_t r = 0; r < chains.size(); ++r) {
      for (std::size_t k = 0; k < chains[r].theta.size(); k += c.thin) {
        t.cell("beta_0").cell(kind_name(kind)).cell(k).cell(chains[r].theta[k].beta[0]).cell(r);
      }
    }
  }
  std::vector<double> ref;
  for (const auto& th : reference_draws(problem, derive_seed(c.seed, 99), 2000, 5)) ref.push_back(th.beta[0]);
  out.write(dir + "/beta0.csv", t.str());
  return {{"n", 100},
          {"eps", 30.0},
          {"bounds", 6.0},
          {"reference_beta0", {{"mean", mean_of(ref)},
                               {"q25", quantile(ref, 0.25)},
                               {"q50", quantile(ref, 0.5)},
                               {"q75", quantile(ref, 0.75)}}}};
}

Json fig10(const RunConfig& c, OutputDir& out, const std::string& dir) {
  const LinregProblem problem = fixture_problem(30.0);
  const EmpiricalMeasure ref = theta_measure(reference_draws(problem, derive_seed(c.seed, 99), c.replicates, 10));
  CsvTable t = tidy_table();
  for (SamplerKind kind : c.samplers) {
    const auto chains = independent_chains(kind, problem, c);
    for (std::size_t k = 0; k <= c.iters; k += c.thin) {
      std::vector<RegressionTheta> at;
      for (const auto& ch : chains) at.push_back(ch.theta[k]);
      t.cell("mmd2").cell(kind_name(kind)).cell(k).cell(mmd_rbf(theta_measure(at), ref)).cell(std::size_t{0});
    }
  }
  out.write(dir + "/mmd.csv", t.str());
  return {{"fixture", "sdp_eps30.json"}, {"statistic", "biased MMD^2, median-heuristic bandwidth"}};
}

Json fig11(const RunConfig& c, OutputDir& out, const std::string& dir) {
  const LinregProblem problem = simulated_problem(20, 30.0, c.seed);
  CsvTable t = tidy_table();
  for (SamplerKind kind : c.samplers) {
    const auto chains = independent_chains(kind, problem, c);
    for (std::size_t end = 100; end <= c.iters; end += 100) {
      std::vector<std::vector<double>> beta0;
      for (const auto& ch : chains) {
        std::vector<double> b;
        for (std::size_t k = 1; k <= end; ++k) b.push_back(ch.theta[k].beta[0]);
        beta0.push_back(std::move(b));
      }
      const double rhat = split_rhat(beta0).value;
      double total_ess = 0.0;
      for (const auto& b : beta0) total_ess += ess(b);
      t.cell("rhat").cell(kind_name(kind)).cell(end).cell(rhat).cell(std::size_t{0});
      t.cell("ess").cell(kind_name(kind)).cell(end).cell(total_ess).cell(std::size_t{0});
    }
  }
  out.write(dir + "/diagnostics.csv", t.str());
  return {{"n", 20}, {"eps", 30.0}, {"bounds", 6.0}, {"parameter", "beta_0"}};
}

Json table1(const RunConfig& c, OutputDir& out, const std::string& dir) {
  CsvTable t({"eps", "kind", "mean_tau", "q25_tau", "q75_tau", "censored_count", "r_hat",
              "acceptance"});
  CsvTable meetings({"eps", "replicate", "kind", "tau", "censored"});
  for (double eps : {3.0, 30.0}) {
    const LinregProblem problem = fixture_problem(eps);
    for (SamplerKind kind : c.samplers) {
      std::vector<double> acc;
      for (const auto& ch : independent_chains(kind, problem, c)) acc.push_back(acceptance_rate(ch.imputation));
      const auto outcomes = coupled_damcmc_replicates(kind, problem, c.replicates, c.seed, c.t_max, c.workers);
      std::vector<MeetingSample> samples;
      std::vector<double> taus;
      for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& o = outcomes[r];
        samples.push_back({o.meeting_time.value_or(o.t_max), o.censored});
        taus.push_back(static_cast<double>(samples.back().tau));
        meetings.cell(eps).cell(r).cell(kind_name(kind)).cell(samples.back().tau).cell(o.censored);
      }
      const Json rate = rate_json(kind, samples, c.t_max);
      t.cell(eps).cell(kind_name(kind)).cell(mean_of(taus)).cell(quantile(taus, 0.25)).cell(quantile(taus, 0.75));
      t.cell(rate["censored_count"].get<std::size_t>());
      t.cell(rate["r_hat"].is_null() ? std::string("nan") : format_number(rate["r_hat"].get<double>()));
      t.cell(mean_of(acc));
    }
  }
  out.write(dir + "/table1.csv", t.str());
  out.write(dir + "/meeting_times.csv", meetings.str());
  return {{"n", 10}, {"eps", {3.0, 30.0}}, {"fixtures", {"sdp_eps3.json", "sdp_eps30.json"}}};
}

// A zero leaves the field at its default: the recipe does not use it.
void scale(RunConfig& c, std::size_t replicates, std::size_t iters, std::size_t t_max,
           std::size_t burn_in, std::size_t thin) {
  c.replicates = replicates;
  if (iters > 0) c.iters = iters;
  if (t_max > 0) c.t_max = t_max;
  c.burn_in = burn_in;
  c.thin = thin;
}

const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> all = {
      {{"fig2", "n=2 Beta(10,10) traces at eps=20 from (0.3, 0.3)", "-"},
       [](RunConfig& c) { scale(c, 1, 500, 0, 0, 1); },
       fig2},
      {{"fig3A", "acceptance vs eps, Beta(10,10) priors, with lower bounds", "4"},
       [](RunConfig& c) { scale(c, 1, 20000, 0, 0, 1); },
       [](const RunConfig& c, OutputDir& o, const std::string& d) { return acceptance_grid(c, o, d, true); }},
      {{"fig3B", "acceptance vs eps, Exp(1) priors (no bounded ratio)", "4"},
       [](RunConfig& c) { scale(c, 1, 20000, 0, 0, 1); },
       [](const RunConfig& c, OutputDir& o, const std::string& d) { return acceptance_grid(c, o, d, false); }},
      {{"fig4A", "coupling-based rate vs posterior correlation, Beta(10,10) priors", "6"},
       [](RunConfig& c) { scale(c, 50, 20000, 20000, 2000, 1); },
       [](const RunConfig& c, OutputDir& o, const std::string& d) { return rate_grid(c, o, d, true); }},
      {{"fig4B", "coupling-based rate vs posterior correlation, Exp(1) priors", "6"},
       [](RunConfig& c) { scale(c, 50, 20000, 20000, 2000, 1); },
       [](const RunConfig& c, OutputDir& o, const std::string& d) { return rate_grid(c, o, d, false); }},
      {{"fig5", "histogram state quartile traces, n in {20, 50}", "-"},
       [](RunConfig& c) { scale(c, 10, 10000, 0, 0, 100); },
       fig5},
      {{"fig6", "histogram acceptance and meeting times over n", "8"},
       [](RunConfig& c) { scale(c, 20, 10000, 100000, 10000, 1); },
       fig6},
      {{"fig7", "W2 between coupled histogram states, n in {10, 20}", "9"},
       [](RunConfig& c) { scale(c, 20, 0, 20000, 10000, 100); },
       fig7},
      {{"fig8", "beta_0 across independent DAMCMC chains, n=100, eps=30", "-"},
       [](RunConfig& c) { scale(c, 50, 300, 0, 0, 1); },
       fig8},
      {{"fig9", "log-survival of meeting times, n=2, eps=20", "6"},
       [](RunConfig& c) { scale(c, 100, 0, 100000, 10000, 1); },
       fig9},
      {{"fig10", "MMD of theta across chains vs a long-run reference, eps=30 fixture", "-"},
       [](RunConfig& c) { scale(c, 50, 300, 0, 0, 10); },
       fig10},
      {{"fig11", "split R-hat and ESS of beta_0 over iterations, n=20, eps=30", "-"},
       [](RunConfig& c) { scale(c, 4, 2000, 0, 0, 1); },
       fig11},
      {{"table1", "DAMCMC coupling time, rate and acceptance at n=10, eps in {3, 30}", "10"},
       [](RunConfig& c) { scale(c, 20, 300, 20000, 0, 1); },
       table1},
  };
  return all;
}

const Recipe& find_recipe(const std::string& id) {
  for (const auto& r : recipes()) {
    if (r.info.id == id) return r;
  }
  std::string ids;
  for (const auto& r : recipes()) ids += (ids.empty() ? "" : ", ") + r.info.id;
  throw ConfigError("unknown experiment '" + id + "'; valid ids: " + ids);
}

}  // namespace

const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> v;
    for (const auto& r : recipes()) v.push_back(r.info);
    return v;
  }();
  return infos;
}

RunConfig recipe_defaults(const std::string& id) {
  RunConfig c;
  find_recipe(id).defaults(c);
  c.allow_censored = true;
  return c;
}

int cmd_experiment(const std::string& id, const RunConfig& scale_cfg, OutputDir& out,
                   const CommandContext&) {
  const Recipe& recipe = find_recipe(id);
  Stopwatch clock;
  if (scale_cfg.workers > 0) omp_set_num_threads(scale_cfg.workers);
  const Json params = recipe.run(scale_cfg, out, id);
  Json summary = summary_header(to_json(scale_cfg), scale_cfg.seed, clock.seconds());
  summary["experiment"] = id;
  summary["feeds_criterion"] = recipe.info.feeds;
  summary["parameters"] = params;
  out.write(id + "/summary.json", dump(summary));
  return kExitOk;
}

}  // namespace soma
