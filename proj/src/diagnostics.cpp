#include "soma/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "soma/errors.hpp"

namespace soma {

double acceptance_rate(const ChainRecord& record) {
  if (record.step_count == 0) throw PreconditionError("chain has no steps");
  return static_cast<double>(record.accept_count) / static_cast<double>(record.step_count);
}

namespace {

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Classic R-hat on equal-length chains.
double basic_rhat(const std::vector<std::vector<double>>& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    vars.push_back(variance(c));
  }
  const double w = mean(vars);
  const double b = n * variance(means);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

/// Normal scores of pooled average ranks.
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (const auto& c : chains)
    for (double v : c) pooled.emplace_back(v, pooled.size());
  std::sort(pooled.begin(), pooled.end());
  const std::size_t total = pooled.size();
  std::vector<double> rank(total);
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 1);  // 1-based average rank
    for (std::size_t k = i; k < j; ++k) rank[pooled[k].second] = avg;
    i = j;
  }
  const boost::math::normal normal;
  std::vector<std::vector<double>> out;
  std::size_t pos = 0;
  for (const auto& c : chains) {
    std::vector<double> z(c.size());
    for (auto& v : z) {
      v = boost::math::quantile(normal, (rank[pos++] - 0.375) /
                                            (static_cast<double>(total) + 0.25));
    }
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace

RhatResult split_rhat(std::span<const std::vector<double>> chains) {
  if (chains.empty()) throw PreconditionError("R-hat needs at least one chain");
  const std::size_t len = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != len) throw PreconditionError("chains must have equal length");
  }
  if (len < 4) throw PreconditionError("R-hat needs chains of length >= 4");

  const double first = chains.front().front();
  const bool constant = std::all_of(chains.begin(), chains.end(), [&](const auto& c) {
    return std::all_of(c.begin(), c.end(), [&](double v) { return v == first; });
  });
  if (constant) return {1.0, true};

  const std::size_t half = len / 2;
  std::vector<std::vector<double>> split;
  for (const auto& c : chains) {
    split.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    split.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }

  std::vector<double> all;
  for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
  const double med = quantile(all, 0.5);
  auto folded = split;
  for (auto& c : folded)
    for (auto& v : c) v = std::abs(v - med);

  const double bulk = basic_rhat(rank_normalize(split));
  const double tail = basic_rhat(rank_normalize(folded));
  return {std::max({1.0, bulk, tail}), false};
}

double ess(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 8) throw PreconditionError("ESS needs at least 8 draws");
  const double nd = static_cast<double>(n);
  const double m = mean(chain);
  const auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (chain[t] - m) * (chain[t + lag] - m);
    return s / nd;
  };
  const double c0 = autocov(0);
  if (c0 == 0.0) return nd;

  double sum_pairs = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum_pairs += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / std::log10(nd));
  return nd / tau;
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw PreconditionError("W2 needs two non-empty samples of equal size");
  }
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return std::sqrt(s / static_cast<double>(sa.size()));
}

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return s;
}

void check_measures(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.size() == 0 || b.size() == 0) throw PreconditionError("empty empirical measure");
  if (a.width() != b.width()) throw PreconditionError("measures live in different spaces");
}

}  // namespace

SinkhornResult sinkhorn_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double reg,
                           std::size_t max_iter, double tol) {
  check_measures(a, b);
  if (!(reg > 0.0)) throw DomainError("Sinkhorn regularization must be positive");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> cost(n * m);
  double cmax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cost[i * m + j] = squared_distance(a[i], b[j]);
      cmax = std::max(cmax, cost[i * m + j]);
    }
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));

  std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
  SinkhornResult res;
  double eps = std::max(cmax, reg);
  while (true) {
    for (std::size_t it = 0; it < max_iter; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - cost[i * m + j]) / eps;
        f[i] = eps * log_a - eps * log_sum_exp(std::span<const double>(buf.data(), m));
      }
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - cost[i * m + j]) / eps;
        g[j] = eps * log_b - eps * log_sum_exp(std::span<const double>(buf.data(), n));
      }
      ++res.iterations;
      // columns are exact after the g update; measure the rows
      double violation = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) row += std::exp((f[i] + g[j] - cost[i * m + j]) / eps);
        violation += std::abs(row - std::exp(log_a));
      }
      res.marginal_violation = violation;
      if (violation < tol) break;
    }
    if (eps <= reg) break;
    eps = std::max(reg, eps / 2.0);
  }
  if (res.marginal_violation >= tol) {
    throw ConvergenceError("Sinkhorn did not reach the marginal tolerance",
                           res.marginal_violation);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      total += std::exp((f[i] + g[j] - cost[i * m + j]) / eps) * cost[i * m + j];
  res.distance = std::sqrt(std::max(total, 0.0));
  return res;
}

double mmd_rbf(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
               std::optional<double> bandwidth) {
  check_measures(a, b);
  double h = 0.0;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw DomainError("bandwidth must be positive");
    h = *bandwidth;
  } else {
    std::vector<std::span<const double>> pooled;
    for (std::size_t i = 0; i < a.size(); ++i) pooled.push_back(a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) pooled.push_back(b[i]);
    std::vector<double> dists;
    for (std::size_t i = 0; i < pooled.size(); ++i)
      for (std::size_t j = i + 1; j < pooled.size(); ++j)
        dists.push_back(std::sqrt(squared_distance(pooled[i], pooled[j])));
    h = dists.empty() ? 1.0 : quantile(std::move(dists), 0.5);
    if (h == 0.0) h = 1.0;
  }
  const double scale = 1.0 / (2.0 * h * h);
  const auto mean_kernel = [&](const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < y.size(); ++j) s += std::exp(-scale * squared_distance(x[i], y[j]));
    return s / static_cast<double>(x.size() * y.size());
  };
  // fixed orientation for the cross term keeps the statistic exactly symmetric
  const auto fa = a.flat(), fb = b.flat();
  const bool ordered = std::lexicographical_compare(fa.begin(), fa.end(), fb.begin(), fb.end());
  const double cross = ordered ? mean_kernel(a, b) : mean_kernel(b, a);
  return std::max(0.0, mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * cross);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw PreconditionError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ScalarSeries> quantile_trace(const ChainRecord& record, std::span<const double> qs) {
  std::vector<ScalarSeries> out;
  for (double q : qs) {
    ScalarSeries s;
    s.label = "q" + std::to_string(q);
    s.label.erase(s.label.find_last_not_of('0') + 1);
    if (s.label.back() == '.') s.label.pop_back();
    s.values.reserve(record.trace.size());
    out.push_back(std::move(s));
  }
  for (const State& state : record.trace) {
    if (state.width() != 1) throw PreconditionError("quantile traces need scalar components");
    std::vector<double> v(state.flat().begin(), state.flat().end());
    for (std::size_t k = 0; k < qs.size(); ++k) out[k].values.push_back(quantile(v, qs[k]));
  }
  return out;
}

ChiSquareResult chi_square_test(std::span<const std::size_t> counts,
                                std::span<const double> probs) {
  if (counts.size() != probs.size()) throw PreconditionError("counts and probabilities differ in length");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) throw PreconditionError("no observations");
  ChiSquareResult res;
  std::size_t cells = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double expected = total * probs[k];
    if (probs[k] <= 0.0) {
      if (counts[k] > 0) {
        res.statistic = std::numeric_limits<double>::infinity();
        res.p_value = 0.0;
      }
      continue;
    }
    ++cells;
    const double diff = static_cast<double>(counts[k]) - expected;
    res.statistic += diff * diff / expected;
  }
  if (cells < 2) throw PreconditionError("chi-square test needs two or more cells");
  res.dof = cells - 1;
  if (std::isfinite(res.statistic)) {
    res.p_value = boost::math::cdf(
        boost::math::complement(boost::math::chi_squared(static_cast<double>(res.dof)), res.statistic));
  }
  return res;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("KS needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(std::size_t n_a, std::size_t n_b, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) * std::sqrt((na + nb) / (na * nb));
}

}  // namespace soma
