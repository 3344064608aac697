// Serial reference vs OpenMP paths: swap-one-out weights on a large state,
// and independent coupled replicates.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "soma/coupling.hpp"
#include "soma/targets.hpp"

namespace {

using namespace soma;

Model histogram(std::size_t n) {
  Rng rng = make_rng(1);
  std::vector<double> data(n);
  for (auto& x : data) x = uniform01(rng);
  const auto edges = uniform_bin_edges(10);
  return perturbed_histogram_target(edges, privatize_histogram(data, edges, 5.0, rng), 5.0, n);
}

void run_weights(benchmark::State& st, Execution exec, bool additive) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Model m = beta_laplace_target(10, 10, 1.0, 0.5, n);
  Rng rng = make_rng(2);
  const State x = initial_state(m, rng);
  const Point y = m.proposal->sample(rng);
  for (auto _ : st) {
    auto w = additive ? compute_weights_additive(*m.target, *m.proposal, x, y, exec)
                      : compute_weights_generic(*m.target, *m.proposal, x, y, exec);
    benchmark::DoNotOptimize(w.log_W);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_WeightsAdditiveSerial(benchmark::State& st) { run_weights(st, Execution::Serial, true); }
void BM_WeightsAdditiveParallel(benchmark::State& st) { run_weights(st, Execution::Parallel, true); }
void BM_WeightsGenericSerial(benchmark::State& st) { run_weights(st, Execution::Serial, false); }
void BM_WeightsGenericParallel(benchmark::State& st) { run_weights(st, Execution::Parallel, false); }

BENCHMARK(BM_WeightsAdditiveSerial)->RangeMultiplier(8)->Range(64, 1 << 15);
BENCHMARK(BM_WeightsAdditiveParallel)->RangeMultiplier(8)->Range(64, 1 << 15);
BENCHMARK(BM_WeightsGenericSerial)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_WeightsGenericParallel)->RangeMultiplier(4)->Range(16, 1024);

// workers = 1 is the serial reference
void BM_CoupledReplicates(benchmark::State& st) {
  const Model m = histogram(10);
  ReplicateOptions o;
  o.t_max = 20000;
  o.burn_in = 1000;
  o.workers = static_cast<int>(st.range(0));
  for (auto _ : st) {
    auto out = run_coupled_replicates(SamplerKind::Soma, m, 32, 3, o);
    benchmark::DoNotOptimize(out.data());
  }
  st.counters["threads"] = static_cast<double>(o.workers);
}
BENCHMARK(BM_CoupledReplicates)->Arg(1)->Arg(omp_get_num_procs())->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
