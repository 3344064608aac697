#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "soma/rng.hpp"
#include "soma/samplers.hpp"
#include "soma/state.hpp"
#include "soma/target.hpp"
#include "soma/targets.hpp"

namespace soma {

struct IndexPair {
  std::size_t first;
  std::size_t second;
};

/// Maximal coupling of Multinomial(p) and Multinomial(p_tilde) from one uniform.
/// The shared block u_i = min(p_i, p~_i) is laid out first; past it the
/// residual U' = U - sum(u) is located in the v and v~ blocks separately.
/// Both inputs must sum to 1 within 1e-12.
IndexPair maximal_coupling_index(double u, std::span<const double> p,
                                 std::span<const double> p_tilde);
IndexPair maximal_coupling_index(Rng& rng, std::span<const double> p,
                                 std::span<const double> p_tilde);

/// Two aligned chains. `cursor` is the shared systematic-scan position.
struct CoupledPair {
  State a;
  State b;
  std::size_t distance = 0;
  bool met = false;
  std::size_t t = 0;
  std::size_t cursor = 0;

  CoupledPair() = default;
  CoupledPair(State first, State second);
  void refresh();
};

/// The target and proposal one chain of the pair uses. Both sides are the
/// same model except when the proposal depends on chain-specific parameters.
struct ChainSide {
  const Target& target;
  const Proposal& proposal;
};

/// Common offer, maximally coupled indices, shared acceptance uniform.
void coupled_soma_step(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair);
/// Common offer, common uniform index, shared acceptance uniform.
void coupled_ran_step(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair);
/// Common offer, shared cursor, shared acceptance uniform.
void coupled_sys_step(Rng& rng, ChainSide side_a, ChainSide side_b, CoupledPair& pair);

void coupled_step(SamplerKind kind, Rng& rng, ChainSide side_a, ChainSide side_b,
                  CoupledPair& pair);

inline void coupled_step(SamplerKind kind, Rng& rng, const Model& model, CoupledPair& pair) {
  coupled_step(kind, rng, {*model.target, *model.proposal}, {*model.target, *model.proposal},
               pair);
}

struct CouplingOutcome {
  /// Empty when censored at t_max.
  std::optional<std::size_t> meeting_time;
  bool censored = false;
  std::size_t t_max = 0;
  /// Hamming distance at t = 0, 1, ... (when recorded).
  std::vector<std::size_t> distance_trace;
  /// W2 between the two states' empirical measures (when recorded).
  std::vector<double> wasserstein_trace;
};

struct CouplingOptions {
  bool record_distance = true;
  /// Scalar components only.
  bool record_wasserstein = false;
  /// Keep stepping after meeting until t_max (traces stay at zero).
  bool run_to_horizon = false;
};

/// Iterates the coupled kernel until the chains meet or t_max steps elapse.
CouplingOutcome run_coupled(SamplerKind kind, const Target& target, const Proposal& proposal,
                            const State& init_a, const State& init_b, std::size_t t_max,
                            std::uint64_t seed, CouplingOptions options = {});

struct ReplicateOptions {
  std::size_t t_max = 100000;
  /// Warm-up length for the second chain, standing in for a stationary draw.
  std::size_t burn_in = 10000;
  CouplingOptions coupling{};
  /// OpenMP threads over replicates; 0 keeps the runtime default.
  int workers = 0;
};

/// Replicate r uses seed derive_seed(master, r). Chain a starts from proposal
/// draws; chain b from a SOMA warm-up of `burn_in` steps. Starting points do
/// not depend on `kind`, so runs of different kinds are paired.
std::vector<CouplingOutcome> run_coupled_replicates(SamplerKind kind, const Model& model,
                                                    std::size_t replicates,
                                                    std::uint64_t master_seed,
                                                    const ReplicateOptions& options);

struct MeetingSample {
  std::size_t tau = 0;
  bool censored = false;
};

std::vector<MeetingSample> meeting_samples(std::span<const CouplingOutcome> outcomes);

struct RateEstimate {
  double r_hat = 0.0;
  std::size_t n_replicates = 0;
  std::size_t censored_count = 0;
  /// Number of survival points the regression used.
  std::size_t points_used = 0;
};

/// Regresses log P(tau > t) on t where the survival lies in [0.05, 0.95] and
/// t < censor_t; returns exp(slope). Survival that falls straight to zero
/// gives r_hat = 0. Needs at least 30 uncensored samples.
RateEstimate estimate_rate(std::span<const MeetingSample> samples, std::size_t censor_t);

/// Minimum Hamming distance over all relabelings of b's components.
std::size_t min_permutation_distance(const State& a, const State& b);

}  // namespace soma
