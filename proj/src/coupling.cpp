#include "soma/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <omp.h>

#include "soma/diagnostics.hpp"
#include "soma/errors.hpp"

namespace soma {

namespace {

void check_simplex(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DomainError("probabilities must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("probabilities must sum to 1");
}

/// First index whose cumulative mass exceeds u; the last positive cell absorbs
/// rounding at the top end. Empty when all cells are zero.
std::optional<std::size_t> locate(double u, std::span<const double> mass) {
  double cumulative = 0.0;
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    cumulative += mass[i];
    last = i;
    if (u < cumulative) return i;
  }
  return last;
}

std::vector<double> selection_probs(const WeightVector& w) {
  std::vector<double> p(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w.log_w[i] != kNegInf) p[i] = std::exp(w.log_w[i] - w.log_W);
  }
  // normalize so the coupling sees an exact simplex up to rounding
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= sum;
  return p;
}

void draw_offers(Rng& rng, ChainSide side_a, ChainSide side_b, Point& ya, Point& yb) {
  ya.assign(side_a.target.width(), 0.0);
  yb.assign(side_b.target.width(), 0.0);
  side_a.proposal.sample_coupled(rng, side_b.proposal, ya, yb);
}

}  // namespace

IndexPair maximal_coupling_index(double u, std::span<const double> p,
                                 std::span<const double> p_tilde) {
  if (p.size() != p_tilde.size() || p.empty()) {
    throw DomainError("maximal coupling needs two distributions on the same cells");
  }
  check_simplex(p);
  check_simplex(p_tilde);
  const std::size_t n = p.size();
  std::vector<double> shared(n), rest(n), rest_tilde(n);
  for (std::size_t i = 0; i < n; ++i) {
    shared[i] = std::min(p[i], p_tilde[i]);
    rest[i] = p[i] - shared[i];
    rest_tilde[i] = p_tilde[i] - shared[i];
  }
  const double shared_mass = std::accumulate(shared.begin(), shared.end(), 0.0);
  if (u < shared_mass) {
    const auto i = locate(u, shared);
    return {*i, *i};
  }
  const double residual = u - shared_mass;
  const auto i = locate(residual, rest);
  const auto j = locate(residual, rest_tilde);
  if (i && j) return {*i, *j};
  // residual blocks vanished up to rounding: the distributions coincide
  const auto k = locate(shared_mass, shared);
  return {i.value_or(*k), j.value_or(*k)};
}

IndexPair maximal_coupling_index(Rng& rng, std::span<const double> p,
                                 std::span<const double> p_tilde) {
  return maximal_coupling_index(uniform01(rng), p, p_tilde);
}

CoupledPair::CoupledPair(State first, State second) : a(std::move(first)), b(std::move(second)) {
  if (a.size() != b.size() || a.width() != b.width()) {
    throw PreconditionError("coupled chains need states of the same shape");
  }
  refresh();
}

void CoupledPair::refresh() {
  distance = hamming_distance(a, b);
  met = distance == 0;
}

void coupled_soma_step(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair) {
  Point ya, yb;
  draw_offers(rng, side_a, side_b, ya, yb);
  const double u_index = uniform01(rng);
  const double xi = uniform01(rng);

  const WeightVector wa = compute_weights(side_a.target, side_a.proposal, pair.a, ya);
  const WeightVector wb = compute_weights(side_b.target, side_b.proposal, pair.b, yb);

  std::optional<std::size_t> ia, ib;
  if (!wa.dead() && !wb.dead()) {
    const auto pa = selection_probs(wa);
    const auto pb = selection_probs(wb);
    const IndexPair idx = maximal_coupling_index(u_index, pa, pb);
    ia = idx.first;
    ib = idx.second;
  } else {
    // a dead offer in one chain leaves the other to its own marginal draw
    ia = select_index(u_index, wa);
    ib = select_index(u_index, wb);
  }
  if (ia && xi < soma_acceptance(wa, *ia)) pair.a.set(*ia, ya);
  if (ib && xi < soma_acceptance(wb, *ib)) pair.b.set(*ib, yb);
  ++pair.t;
  pair.refresh();
}

namespace {

void coupled_imwg_update(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair,
                         std::size_t i) {
  Point ya, yb;
  draw_offers(rng, side_a, side_b, ya, yb);
  const double xi = uniform01(rng);
  const auto wa = pair_weights(side_a.target, side_a.proposal, pair.a, ya, i);
  const auto wb = pair_weights(side_b.target, side_b.proposal, pair.b, yb, i);
  if (xi < imwg_acceptance(wa.log_w0, wa.log_wi)) pair.a.set(i, ya);
  if (xi < imwg_acceptance(wb.log_w0, wb.log_wi)) pair.b.set(i, yb);
  ++pair.t;
  pair.refresh();
}

}  // namespace

void coupled_ran_step(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair) {
  const std::size_t n = pair.a.size();
  const std::size_t i =
      std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  coupled_imwg_update(rng, side_a, side_b, pair, i);
}

void coupled_sys_step(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair) {
  const std::size_t i = pair.cursor;
  pair.cursor = (pair.cursor + 1) % pair.a.size();
  coupled_imwg_update(rng, side_a, side_b, pair, i);
}

void coupled_step(SamplerKind kind, Rng& rng, ChainSide side_a, ChainSide side_b,
                  CoupledPair& pair) {
  switch (kind) {
    case SamplerKind::Soma:
      return coupled_soma_step(rng, side_a, side_b, pair);
    case SamplerKind::RanImwg:
      return coupled_ran_step(rng, side_a, side_b, pair);
    case SamplerKind::SysImwg:
      return coupled_sys_step(rng, side_a, side_b, pair);
  }
  throw std::logic_error("unhandled sampler kind");
}

CouplingOutcome run_coupled(SamplerKind kind, const Target& target, const Proposal& proposal,
                            const State& init_a, const State& init_b, std::size_t t_max,
                            std::uint64_t seed, CouplingOptions options) {
  for (const State* s : {&init_a, &init_b}) {
    if (s->size() != target.size() || s->width() != target.width()) {
      throw PreconditionError("initial state shape does not match the target");
    }
    if (!(target.log_density(*s) > kNegInf)) {
      throw PreconditionError("initial state has zero target density");
    }
  }
  if (options.record_wasserstein && target.width() != 1) {
    throw PreconditionError("W2 traces need scalar components");
  }

  CouplingOutcome out;
  out.t_max = t_max;
  CoupledPair pair(init_a, init_b);
  const auto record = [&] {
    if (options.record_distance) out.distance_trace.push_back(pair.distance);
    if (options.record_wasserstein) {
      out.wasserstein_trace.push_back(wasserstein2_1d(pair.a.flat(), pair.b.flat()));
    }
  };
  record();
  if (pair.met) out.meeting_time = 0;

  Rng rng = make_rng(seed);
  const ChainSide side{target, proposal};
  while (pair.t < t_max && (!pair.met || options.run_to_horizon)) {
    coupled_step(kind, rng, side, side, pair);
    record();
    if (pair.met && !out.meeting_time) out.meeting_time = pair.t;
  }
  out.censored = !out.meeting_time.has_value();
  return out;
}

std::vector<CouplingOutcome> run_coupled_replicates(SamplerKind kind, const Model& model,
                                                    std::size_t replicates,
                                                    std::uint64_t master_seed,
                                                    const ReplicateOptions& options) {
  std::vector<CouplingOutcome> outcomes(replicates);
  std::string error;
  const int threads = options.workers > 0 ? options.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(replicates); ++r) {
    try {
      const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(r));
      Rng init_rng = make_rng(derive_seed(seed, 1));
      const State init_a = initial_state(model, init_rng);
      State init_b = initial_state(model, init_rng);
      if (options.burn_in > 0) {
        const auto warm = run_chain(SamplerKind::Soma, *model.target, *model.proposal, init_b,
                                    options.burn_in, derive_seed(seed, 2),
                                    {.thin = options.burn_in});
        init_b = warm.trace.back();
      }
      outcomes[static_cast<std::size_t>(r)] =
          run_coupled(kind, *model.target, *model.proposal, init_a, init_b, options.t_max,
                      derive_seed(seed, 3), options.coupling);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);
  return outcomes;
}

std::vector<MeetingSample> meeting_samples(std::span<const CouplingOutcome> outcomes) {
  std::vector<MeetingSample> samples;
  samples.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    samples.push_back({o.meeting_time.value_or(o.t_max), o.censored});
  }
  return samples;
}

RateEstimate estimate_rate(std::span<const MeetingSample> samples, std::size_t censor_t) {
  RateEstimate est;
  est.n_replicates = samples.size();
  std::size_t uncensored = 0;
  std::size_t horizon = 0;
  for (const auto& s : samples) {
    if (s.censored) {
      ++est.censored_count;
    } else {
      ++uncensored;
      horizon = std::max(horizon, s.tau);
    }
  }
  if (uncensored == 0) throw EstimationError("all coupled runs were censored");
  if (uncensored < 30) throw EstimationError("rate estimation needs >= 30 uncensored meeting times");

  // S(t) = P(tau > t); censored runs survive every t below the censoring time
  const std::size_t t_end = std::min(horizon + 1, censor_t);
  const double total = static_cast<double>(samples.size());
  std::vector<double> survival(t_end, 0.0);
  for (std::size_t t = 0; t < t_end; ++t) {
    std::size_t alive = 0;
    for (const auto& s : samples) {
      if (s.censored || s.tau > t) ++alive;
    }
    survival[t] = static_cast<double>(alive) / total;
  }

  const auto fit = [&](auto keep) -> std::optional<double> {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t k = 0;
    for (std::size_t t = 0; t < survival.size(); ++t) {
      if (!keep(survival[t])) continue;
      const double x = static_cast<double>(t);
      const double y = std::log(survival[t]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++k;
    }
    est.points_used = k;
    if (k < 2) return std::nullopt;
    const double kk = static_cast<double>(k);
    return (kk * sxy - sx * sy) / (kk * sxx - sx * sx);
  };

  auto slope = fit([](double s) { return s >= 0.05 && s <= 0.95; });
  if (!slope) slope = fit([](double s) { return s > 0.0; });
  if (!slope) {
    est.r_hat = 0.0;  // survival collapses to zero immediately
    return est;
  }
  est.r_hat = std::exp(*slope);
  return est;
}

std::size_t min_permutation_distance(const State& a, const State& b) {
  if (a.size() != b.size() || a.width() != b.width()) {
    throw PreconditionError("states must have the same shape");
  }
  // Equality partitions components into classes, so a maximum matching pairs
  // min(count_a, count_b) members of every class.
  const auto sorted = [](const State& s) {
    std::vector<std::vector<double>> pts;
    pts.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) pts.emplace_back(s[i].begin(), s[i].end());
    std::sort(pts.begin(), pts.end());
    return pts;
  };
  const auto pa = sorted(a);
  const auto pb = sorted(b);
  std::size_t matched = 0;
  auto ia = pa.begin();
  auto ib = pb.begin();
  while (ia != pa.end() && ib != pb.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++matched;
      ++ia;
      ++ib;
    }
  }
  return a.size() - matched;
}

}  // namespace soma
