#include "soma/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "soma/errors.hpp"

namespace soma {

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Soma:
      return "soma";
    case SamplerKind::RanImwg:
      return "ran_imwg";
    case SamplerKind::SysImwg:
      return "sys_imwg";
  }
  return "unknown";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "soma") return SamplerKind::Soma;
  if (name == "ran_imwg") return SamplerKind::RanImwg;
  if (name == "sys_imwg") return SamplerKind::SysImwg;
  throw ConfigError("unknown sampler kind '" + std::string(name) +
                    "' (expected soma, ran_imwg or sys_imwg)");
}

// --- acceptance rules -------------------------------------------------------

double soma_log_acceptance(const WeightVector& weights, std::size_t i) {
  if (weights.dead()) return kNegInf;
  // same summation order as log W, so w_0 == w_i gives exactly 0
  std::vector<double> denom = weights.log_w;
  denom[i] = weights.log_w0;
  const double log_den = log_sum_exp(denom);
  if (log_den == kNegInf) return 0.0;
  return std::min(0.0, weights.log_W - log_den);
}

double soma_acceptance(const WeightVector& weights, std::size_t i) {
  return std::exp(soma_log_acceptance(weights, i));
}

double imwg_log_acceptance(double log_w0, double log_wi) {
  if (log_wi == kNegInf) return kNegInf;
  if (log_w0 == kNegInf) return 0.0;
  return std::min(0.0, log_wi - log_w0);
}

double imwg_acceptance(double log_w0, double log_wi) {
  return std::exp(imwg_log_acceptance(log_w0, log_wi));
}

std::optional<std::size_t> select_index(double u, const WeightVector& weights) {
  if (weights.dead()) return std::nullopt;
  double cumulative = 0.0;
  std::optional<std::size_t> last_positive;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights.log_w[i] == kNegInf) continue;
    cumulative += std::exp(weights.log_w[i] - weights.log_W);
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;  // rounding left the total just below u
}

std::optional<std::size_t> select_index(Rng& rng, const WeightVector& weights) {
  return select_index(uniform01(rng), weights);
}

PairWeights pair_weights(const Target& target, const Proposal& proposal, const State& state,
                         std::span<const double> offer, std::size_t i) {
  if (!target.in_support(offer)) throw DomainError("offer outside the target's component space");
  const double lq_x = proposal.log_density(state[i]);
  const double lq_y = proposal.log_density(offer);
  if (!std::isfinite(lq_x)) throw NumericalError("proposal density vanishes at a component", i);
  if (std::equal(offer.begin(), offer.end(), state[i].begin(), state[i].end())) {
    return {0.0, 0.0};
  }
  // only the ratio w_i / w_0 matters; w_0 is reported relative to 1
  double log_ratio;
  if (const AdditiveStructure* add = target.additive()) {
    std::vector<double> total(add->summary_dim(), 0.0);
    for (std::size_t j = 0; j < state.size(); ++j) add->accumulate(state[j], 1.0, total);
    std::vector<double> scratch(total.size());
    const double lg = add->log_observation(total);
    const double lg_swap = add->log_observation_swap(total, lg, state[i], offer, scratch);
    log_ratio = (lg_swap - lg) + (add->log_record(offer) - add->log_record(state[i])) +
                (lq_x - lq_y);
  } else {
    State work = state;
    const double lp = target.log_density(state);
    work.set(i, offer);
    const double lp_swap = target.log_density(work);
    if (std::isnan(lp_swap)) throw NumericalError("non-finite log-density", i);
    log_ratio = lp_swap == kNegInf ? kNegInf : (lp_swap - lp) + (lq_x - lq_y);
  }
  if (std::isnan(log_ratio)) throw NumericalError("non-finite weight ratio", i);
  return {0.0, log_ratio};
}

// --- kernels -----------------------------------------------------------------

StepInfo soma_step(Rng& rng, const Target& target, const Proposal& proposal, State& state,
                   Execution exec) {
  StepInfo info;
  info.offer = proposal.sample(rng);
  info.weights = compute_weights(target, proposal, state, info.offer, exec);
  const double u_index = uniform01(rng);
  const double u_accept = uniform01(rng);
  info.chosen_index = select_index(u_index, info.weights);
  if (!info.chosen_index) return info;
  info.acceptance_prob = soma_acceptance(info.weights, *info.chosen_index);
  info.accepted = u_accept < info.acceptance_prob;
  if (info.accepted) state.set(*info.chosen_index, info.offer);
  return info;
}

namespace {

StepInfo imwg_update(Rng& rng, const Target& target, const Proposal& proposal, State& state,
                     std::size_t i) {
  StepInfo info;
  info.offer = proposal.sample(rng);
  info.chosen_index = i;
  const auto w = pair_weights(target, proposal, state, info.offer, i);
  info.acceptance_prob = imwg_acceptance(w.log_w0, w.log_wi);
  info.accepted = uniform01(rng) < info.acceptance_prob;
  if (info.accepted) state.set(i, info.offer);
  return info;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace

StepInfo ran_imwg_step(Rng& rng, const Target& target, const Proposal& proposal, State& state) {
  const std::size_t i = uniform_index(rng, state.size());
  return imwg_update(rng, target, proposal, state, i);
}

StepInfo sys_imwg_step(Rng& rng, const Target& target, const Proposal& proposal, State& state,
                       std::size_t& cursor) {
  if (cursor >= state.size()) throw PreconditionError("sweep cursor out of range");
  const std::size_t i = cursor;
  cursor = (cursor + 1) % state.size();
  return imwg_update(rng, target, proposal, state, i);
}

StepInfo sampler_step(SamplerKind kind, Rng& rng, const Target& target, const Proposal& proposal,
                      State& state, std::size_t& cursor, Execution exec) {
  switch (kind) {
    case SamplerKind::Soma:
      return soma_step(rng, target, proposal, state, exec);
    case SamplerKind::RanImwg:
      return ran_imwg_step(rng, target, proposal, state);
    case SamplerKind::SysImwg:
      return sys_imwg_step(rng, target, proposal, state, cursor);
  }
  throw std::logic_error("unhandled sampler kind");
}

// --- chain driver ---------------------------------------------------------------

ChainRecord run_chain(SamplerKind kind, const Target& target, const Proposal& proposal,
                      const State& init, std::size_t iters, std::uint64_t seed,
                      ChainOptions options) {
  if (iters == 0) throw PreconditionError("run_chain needs iters >= 1");
  if (options.thin == 0) throw PreconditionError("thin must be >= 1");
  if (init.size() != target.size() || init.width() != target.width()) {
    throw PreconditionError("initial state shape does not match the target");
  }
  if (!(target.log_density(init) > kNegInf)) {
    throw PreconditionError("initial state has zero target density");
  }

  const auto start = std::chrono::steady_clock::now();
  ChainRecord record;
  record.kind = kind;
  record.seed = seed;
  record.thin = options.thin;
  record.proposed_by_index.assign(init.size(), 0);
  record.accepted_by_index.assign(init.size(), 0);
  record.trace.reserve(iters / options.thin);
  record.iterations.reserve(iters / options.thin);

  Rng rng = make_rng(seed);
  State state = init;
  std::size_t cursor = 0;
  for (std::size_t t = 1; t <= iters; ++t) {
    const StepInfo info = sampler_step(kind, rng, target, proposal, state, cursor, options.exec);
    ++record.step_count;
    if (info.chosen_index) {
      ++record.proposed_by_index[*info.chosen_index];
      if (info.accepted) {
        ++record.accept_count;
        ++record.accepted_by_index[*info.chosen_index];
      }
    } else {
      ++record.dead_offers;
    }
    if (t % options.thin == 0) {
      record.iterations.push_back(t);
      record.trace.push_back(state);
    }
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

// --- exact kernels for finite targets ---------------------------------------------

namespace {

struct Enumeration {
  std::vector<State> states;
  std::vector<double> pi;
  std::map<std::vector<double>, std::size_t> index;
};

Enumeration enumerate(const Target& target, std::size_t limit) {
  auto support = target.enumerate_support(limit);
  if (!support) throw PreconditionError("target '" + target.name() + "' is not enumerable");
  if (support->size() > limit) throw ResourceError("support exceeds the enumeration limit");
  Enumeration e;
  e.states = std::move(*support);
  std::vector<double> log_pi(e.states.size());
  for (std::size_t k = 0; k < e.states.size(); ++k) {
    log_pi[k] = target.log_density(e.states[k]);
    const auto flat = e.states[k].flat();
    e.index.emplace(std::vector<double>(flat.begin(), flat.end()), k);
  }
  const double log_z = log_sum_exp(log_pi);
  e.pi.resize(log_pi.size());
  for (std::size_t k = 0; k < log_pi.size(); ++k) e.pi[k] = std::exp(log_pi[k] - log_z);
  return e;
}

}  // namespace

TransitionMatrix transition_matrix(SamplerKind kind, const Target& target,
                                   const Proposal& proposal, std::size_t cursor,
                                   std::size_t limit) {
  const auto atoms = proposal.finite_support();
  if (!atoms) throw PreconditionError("proposal support is not finite");
  Enumeration e = enumerate(target, limit);
  const std::size_t dim = e.states.size();
  const std::size_t n = target.size();
  if (kind == SamplerKind::SysImwg && cursor >= n) {
    throw PreconditionError("sweep cursor out of range");
  }

  TransitionMatrix m;
  m.states = e.states;
  m.pi = e.pi;
  m.p.assign(dim * dim, 0.0);

  const auto add_move = [&](std::size_t from, const State& x, std::size_t i, const Point& y,
                            double prob, double& moved) {
    if (prob <= 0.0) return;
    State next = x;
    next.set(i, y);
    const auto flat = next.flat();
    const auto it = e.index.find(std::vector<double>(flat.begin(), flat.end()));
    if (it == e.index.end()) throw std::logic_error("positive mass on a zero-density state");
    m(from, it->second) += prob;
    moved += prob;
  };

  for (std::size_t a = 0; a < dim; ++a) {
    const State& x = e.states[a];
    double moved = 0.0;
    for (const auto& [y, q_y] : *atoms) {
      if (q_y <= 0.0) continue;
      switch (kind) {
        case SamplerKind::Soma: {
          const WeightVector w = compute_weights(target, proposal, x, y);
          if (w.dead()) break;
          for (std::size_t i = 0; i < n; ++i) {
            if (w.log_w[i] == kNegInf) continue;
            const double select = std::exp(w.log_w[i] - w.log_W);
            add_move(a, x, i, y, q_y * select * soma_acceptance(w, i), moved);
          }
          break;
        }
        case SamplerKind::RanImwg:
          for (std::size_t i = 0; i < n; ++i) {
            const auto pw = pair_weights(target, proposal, x, y, i);
            add_move(a, x, i, y, q_y / static_cast<double>(n) * imwg_acceptance(pw.log_w0, pw.log_wi),
                     moved);
          }
          break;
        case SamplerKind::SysImwg: {
          const auto pw = pair_weights(target, proposal, x, y, cursor);
          add_move(a, x, cursor, y, q_y * imwg_acceptance(pw.log_w0, pw.log_wi), moved);
          break;
        }
      }
    }
    m(a, a) += 1.0 - moved;
  }
  return m;
}

TransitionMatrix sweep_matrix(const Target& target, const Proposal& proposal, std::size_t limit) {
  TransitionMatrix sweep = transition_matrix(SamplerKind::SysImwg, target, proposal, 0, limit);
  const std::size_t dim = sweep.dim();
  for (std::size_t c = 1; c < target.size(); ++c) {
    const TransitionMatrix next =
        transition_matrix(SamplerKind::SysImwg, target, proposal, c, limit);
    std::vector<double> product(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double a = sweep(i, k);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < dim; ++j) product[i * dim + j] += a * next(k, j);
      }
    }
    sweep.p = std::move(product);
  }
  return sweep;
}

}  // namespace soma
