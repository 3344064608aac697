#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "soma/diagnostics.hpp"
#include "soma/errors.hpp"
#include "soma/targets.hpp"

namespace soma {
namespace {

std::vector<double> normals(Rng& rng, std::size_t n, double mean = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = mean + standard_normal(rng);
  return v;
}

TEST(AcceptanceRate, Extremes) {
  ChainRecord r;
  r.step_count = 10;
  r.accept_count = 10;
  EXPECT_EQ(acceptance_rate(r), 1.0);
  r.accept_count = 0;
  EXPECT_EQ(acceptance_rate(r), 0.0);
  r.step_count = 0;
  EXPECT_THROW(acceptance_rate(r), PreconditionError);
}

TEST(AcceptanceRate, SomaAtLeastRanOnPairedRuns) {
  Rng rng = make_rng(3);
  const auto edges = uniform_bin_edges(10);
  std::vector<double> data(20);
  for (auto& d : data) d = uniform_open(rng);
  const std::vector<Model> models{beta_laplace_target(10, 10, 1.0, 0.5, 2), beta_laplace_target(10, 10, 5.0, 0.5, 2),
                                  exp_laplace_target(2.0, 1.0, 2),
                                  perturbed_histogram_target(edges, privatize_histogram(data, edges, 5, rng), 5, 20)};
  for (const auto& m : models) {
    const State init = initial_state(m, rng);
    const double soma = acceptance_rate(run_chain(SamplerKind::Soma, *m.target, *m.proposal, init, 20000, 4));
    const double ran = acceptance_rate(run_chain(SamplerKind::RanImwg, *m.target, *m.proposal, init, 20000, 4));
    EXPECT_GE(soma, ran) << m.target->name();
  }
}

TEST(SplitRhat, Examples) {
  Rng rng = make_rng(1);
  const auto c = normals(rng, 10000);
  const std::vector<std::vector<double>> same{c, c};
  EXPECT_LT(split_rhat(same).value, 1.01);

  std::vector<std::vector<double>> apart{normals(rng, 1000), normals(rng, 1000)};
  for (auto& v : apart[0]) v = 1.0 + 1e-3 * v;
  for (auto& v : apart[1]) v = -1.0 + 1e-3 * v;
  EXPECT_GT(split_rhat(apart).value, 1.5);

  const std::vector<std::vector<double>> flat{std::vector<double>(10, 2.0), std::vector<double>(10, 2.0)};
  const auto r = split_rhat(flat);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_TRUE(r.degenerate);

  const std::vector<std::vector<double>> ragged{std::vector<double>(10, 1.0), std::vector<double>(9, 1.0)};
  EXPECT_THROW(split_rhat(ragged), PreconditionError);
}

TEST(SplitRhat, NeverBelowOneAndShrinksWithLength) {
  Rng rng = make_rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const std::vector<std::vector<double>> iid{normals(rng, 50), normals(rng, 50), normals(rng, 50)};
    EXPECT_GE(split_rhat(iid).value, 1.0 - 1e-12);
  }
  auto m = beta_laplace_target(10, 10, 1.0, 0.5, 5);
  std::vector<std::vector<double>> chains;
  for (std::uint64_t s = 0; s < 4; ++s) {
    // overdispersed starts so early windows disagree
    const State init = State::scalars(std::vector<double>(5, s % 2 ? 0.05 : 0.95));
    const auto rec = run_chain(SamplerKind::Soma, *m.target, *m.proposal, init, 20000, 10 + s);
    std::vector<double> v;
    for (const auto& st : rec.trace) v.push_back(st[0][0]);
    chains.push_back(v);
  }
  auto window = [&](std::size_t len) {
    std::vector<std::vector<double>> w;
    for (const auto& c : chains) w.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(len));
    return split_rhat(w).value;
  };
  EXPECT_GT(window(20), window(20000));
  EXPECT_LT(window(20000), 1.01);
}

TEST(Ess, Examples) {
  Rng rng = make_rng(7);
  const auto iid = normals(rng, 10000);
  const double r = ess(iid) / 10000.0;
  EXPECT_GT(r, 0.8);
  EXPECT_LT(r, 1.2);

  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
  EXPECT_GT(ess(alt), 1000.0);

  const std::size_t N = 100000;
  const double rho = 0.9;
  std::vector<double> ar(N);
  ar[0] = standard_normal(rng) / std::sqrt(1 - rho * rho);
  for (std::size_t t = 1; t < N; ++t) ar[t] = rho * ar[t - 1] + standard_normal(rng);
  EXPECT_NEAR(ess(ar) / N, (1 - rho) / (1 + rho), 0.3 * (1 - rho) / (1 + rho));
  EXPECT_THROW(ess(std::vector<double>(5, 1.0)), PreconditionError);
}

TEST(Wasserstein1d, ExamplesAndMetric) {
  EXPECT_EQ(wasserstein2_1d(std::vector<double>{0.3, 0.1}, std::vector<double>{0.3, 0.1}), 0.0);
  EXPECT_EQ(wasserstein2_1d(std::vector<double>{0, 1}, std::vector<double>{1, 0}), 0.0);
  EXPECT_EQ(wasserstein2_1d(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  Rng rng = make_rng(4);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto a = normals(rng, 7), b = normals(rng, 7, 1.0), c = normals(rng, 7, -0.5);
    EXPECT_EQ(wasserstein2_1d(a, b), wasserstein2_1d(b, a));
    EXPECT_LE(wasserstein2_1d(a, c), wasserstein2_1d(a, b) + wasserstein2_1d(b, c) + 1e-12);
  }
  EXPECT_THROW(wasserstein2_1d(std::vector<double>{1}, std::vector<double>{1, 2}), PreconditionError);
}

TEST(Sinkhorn, Examples) {
  const EmpiricalMeasure a = State::scalars({0.0}), b = State::scalars({1.0});
  EXPECT_NEAR(sinkhorn_w2(a, b, 1e-3).distance, 1.0, 1e-6);

  Rng rng = make_rng(5);
  const auto x = normals(rng, 20), y = normals(rng, 20, 0.8);
  const double exact = wasserstein2_1d(x, y);
  const auto s = sinkhorn_w2(State::scalars(x), State::scalars(y), 1e-3);
  EXPECT_NEAR(s.distance, exact, 0.02 * exact);
  EXPECT_LT(s.marginal_violation, 1e-8);

  const double coarse = sinkhorn_w2(State::scalars(x), State::scalars(x), 1e-1).distance;
  const double fine = sinkhorn_w2(State::scalars(x), State::scalars(x), 1e-4).distance;
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 0.05);

  // vector-valued points
  State p(2, 2, {0, 0, 1, 1}), q(2, 2, {1, 1, 0, 0});
  EXPECT_NEAR(sinkhorn_w2(p, q, 1e-3).distance, 0.0, 1e-3);

  EXPECT_THROW(sinkhorn_w2(State::scalars(x), State::scalars(y), 1e-3, 1), ConvergenceError);
  EXPECT_THROW(sinkhorn_w2(a, b, 0.0), DomainError);
}

TEST(Mmd, Examples) {
  Rng rng = make_rng(6);
  const auto x = State::scalars(normals(rng, 500)), y = State::scalars(normals(rng, 500, 6.0));
  EXPECT_EQ(mmd_rbf(x, x), 0.0);
  EXPECT_GT(mmd_rbf(x, y), 0.5);
  EXPECT_EQ(mmd_rbf(x, y), mmd_rbf(y, x));
  std::vector<double> shuffled(x.flat().begin(), x.flat().end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_NEAR(mmd_rbf(State::scalars(shuffled), y), mmd_rbf(x, y), 1e-12);
  const auto z = State::scalars(normals(rng, 500));
  EXPECT_LT(mmd_rbf(x, z, 1.0), 0.02);
}

TEST(Quantiles, Examples) {
  EXPECT_EQ(quantile({1, 2, 3}, 0.5), 2.0);
  EXPECT_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  ChainRecord r;
  r.iterations = {1, 2};
  r.trace = {State::scalars({0.4, 0.4, 0.4}), State::scalars({0.1, 0.9, 0.5})};
  const std::vector<double> qs{0.0, 0.5, 1.0};
  const auto t = quantile_trace(r, qs);
  ASSERT_EQ(t.size(), 3u);
  for (const auto& s : t) EXPECT_EQ(s.values[0], 0.4);
  EXPECT_EQ(t[0].values[1], 0.1);
  EXPECT_EQ(t[1].values[1], 0.5);
  EXPECT_EQ(t[2].values[1], 0.9);
  EXPECT_EQ(t[1].label, "q0.5");
  EXPECT_THROW(quantile({}, 0.5), PreconditionError);
}

TEST(GoodnessOfFit, Helpers) {
  const std::vector<std::size_t> counts{50, 50};
  const auto r = chi_square_test(counts, std::vector<double>{0.5, 0.5});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.dof, 1u);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  EXPECT_EQ(ks_statistic({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_EQ(ks_statistic({1, 2}, {3, 4}), 1.0);
  EXPECT_NEAR(ks_critical_value(100, 100, 0.05), 1.358 * std::sqrt(2.0 / 100.0), 1e-3);
}

}  // namespace
}  // namespace soma
