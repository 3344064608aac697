#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "soma/rng.hpp"
#include "soma/state.hpp"
#include "soma/target.hpp"

namespace soma {

enum class SamplerKind { Soma, RanImwg, SysImwg };

std::string_view to_string(SamplerKind kind);
/// Accepts "soma", "ran_imwg", "sys_imwg".
SamplerKind parse_sampler_kind(std::string_view name);
inline constexpr SamplerKind kAllSamplers[] = {SamplerKind::Soma, SamplerKind::RanImwg,
                                               SamplerKind::SysImwg};

struct StepInfo {
  Point offer;
  /// Empty for a dead offer (no slot can take it).
  std::optional<std::size_t> chosen_index;
  double acceptance_prob = 0.0;
  bool accepted = false;
  /// Full weight vector; filled by SOMA only.
  WeightVector weights;

  friend bool operator==(const StepInfo& a, const StepInfo& b) {
    return a.offer == b.offer && a.chosen_index == b.chosen_index &&
           a.acceptance_prob == b.acceptance_prob && a.accepted == b.accepted &&
           a.weights.log_w0 == b.weights.log_w0 && a.weights.log_w == b.weights.log_w &&
           a.weights.log_W == b.weights.log_W;
  }
};

// --- acceptance rules -------------------------------------------------------

/// log min{1, W / (W + w_0 - w_i)}, with W + w_0 - w_i formed as
/// w_0 + sum_{j != i} w_j so nothing is subtracted.
double soma_log_acceptance(const WeightVector& weights, std::size_t i);
double soma_acceptance(const WeightVector& weights, std::size_t i);

/// min{1, w_i / w_0}; 0 when w_i = 0, 1 when only w_0 = 0.
double imwg_log_acceptance(double log_w0, double log_wi);
double imwg_acceptance(double log_w0, double log_wi);
inline double imwg_acceptance(const WeightVector& weights, std::size_t i) {
  return imwg_acceptance(weights.log_w0, weights.log_w[i]);
}

/// Inverse-CDF draw of I with P(I = i) = w_i / W, from a single uniform u in [0, 1).
/// Empty when W = 0.
std::optional<std::size_t> select_index(double u, const WeightVector& weights);
std::optional<std::size_t> select_index(Rng& rng, const WeightVector& weights);

/// log w_0 and log w_i only; the cost of one Metropolis-within-Gibbs update.
struct PairWeights {
  double log_w0;
  double log_wi;
};
PairWeights pair_weights(const Target& target, const Proposal& proposal, const State& state,
                         std::span<const double> offer, std::size_t i);

// --- kernels -----------------------------------------------------------------

/// One SOMA iteration; the state is updated in place.
StepInfo soma_step(Rng& rng, const Target& target, const Proposal& proposal, State& state,
                   Execution exec = Execution::Serial);

/// Random-scan IMH-within-Gibbs: uniform index, one ratio.
StepInfo ran_imwg_step(Rng& rng, const Target& target, const Proposal& proposal, State& state);

/// Systematic scan: updates `cursor`, then advances it cyclically.
StepInfo sys_imwg_step(Rng& rng, const Target& target, const Proposal& proposal, State& state,
                       std::size_t& cursor);

/// Dispatches one iteration of `kind`. `cursor` is used by the systematic scan only.
StepInfo sampler_step(SamplerKind kind, Rng& rng, const Target& target, const Proposal& proposal,
                      State& state, std::size_t& cursor, Execution exec = Execution::Serial);

// --- chain driver ---------------------------------------------------------------

struct ChainRecord {
  SamplerKind kind = SamplerKind::Soma;
  std::uint64_t seed = 0;
  std::size_t thin = 1;
  /// Iteration number (1-based) of each recorded state.
  std::vector<std::size_t> iterations;
  std::vector<State> trace;
  std::size_t accept_count = 0;
  std::size_t step_count = 0;
  std::size_t dead_offers = 0;
  /// Per-index proposals and acceptances.
  std::vector<std::size_t> proposed_by_index;
  std::vector<std::size_t> accepted_by_index;
  double wall_seconds = 0.0;
};

struct ChainOptions {
  std::size_t thin = 1;
  Execution exec = Execution::Serial;
};

/// Runs `iters` single-component iterations (a systematic-scan iteration updates
/// one component, not a full sweep). Records every `thin`-th state.
ChainRecord run_chain(SamplerKind kind, const Target& target, const Proposal& proposal,
                      const State& init, std::size_t iters, std::uint64_t seed,
                      ChainOptions options = {});

// --- exact kernels for finite targets ---------------------------------------------

/// Row-stochastic matrix over the enumerated support.
struct TransitionMatrix {
  std::vector<State> states;
  std::vector<double> pi;
  std::vector<double> p;  // row-major

  std::size_t dim() const noexcept { return states.size(); }
  double operator()(std::size_t from, std::size_t to) const { return p[from * dim() + to]; }
  double& operator()(std::size_t from, std::size_t to) { return p[from * dim() + to]; }
};

/// Exact one-iteration kernel. For the systematic scan, `cursor` selects which
/// component the update touches. Throws ResourceError past `limit` states.
TransitionMatrix transition_matrix(SamplerKind kind, const Target& target,
                                   const Proposal& proposal, std::size_t cursor = 0,
                                   std::size_t limit = 10000);

/// Full systematic sweep: the product of the n single-component kernels.
TransitionMatrix sweep_matrix(const Target& target, const Proposal& proposal,
                              std::size_t limit = 10000);

}  // namespace soma
