#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "soma/rng.hpp"
#include "soma/state.hpp"

namespace soma {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Record-additive observation model: the density depends on the data only
/// through T = sum_j t(x_j), so swapping one component updates T in place.
class AdditiveStructure {
 public:
  virtual ~AdditiveStructure() = default;

  virtual std::size_t summary_dim() const = 0;

  /// acc += sign * t(point)
  virtual void accumulate(std::span<const double> point, double sign,
                          std::span<double> acc) const = 0;

  /// log g(s_dp, total)
  virtual double log_observation(std::span<const double> total) const = 0;

  /// log g(s_dp, total - t(out) + t(in)), given log_total = log g(s_dp, total).
  /// `scratch` has summary_dim() entries.
  virtual double log_observation_swap(std::span<const double> total, double log_total,
                                      std::span<const double> out, std::span<const double> in,
                                      std::span<double> scratch) const;

  /// Per-record log factor (the prior f); -inf outside the support.
  virtual double log_record(std::span<const double> point) const = 0;
};

/// A permutation-invariant density on X^n, evaluated in log space.
/// Immutable after construction; all members are safe to call concurrently.
class Target {
 public:
  virtual ~Target() = default;

  virtual std::string name() const = 0;
  virtual std::size_t size() const = 0;
  virtual std::size_t width() const { return 1; }
  virtual ComponentKind component_kind() const { return ComponentKind::Scalar; }

  /// Whether a point lies in X.
  virtual bool in_support(std::span<const double> point) const = 0;

  /// log pi(x) up to a constant; -inf marks a zero-density state.
  virtual double log_density(const State& x) const = 0;

  virtual const AdditiveStructure* additive() const { return nullptr; }

  /// Bounded weight ratio M for the target's default proposal, when known.
  virtual std::optional<double> ratio_bound() const { return std::nullopt; }

  /// All positive-density states, for finite targets with at most `limit` of them.
  virtual std::optional<std::vector<State>> enumerate_support(std::size_t /*limit*/) const {
    return std::nullopt;
  }
};

/// Independent proposal q on X.
class Proposal {
 public:
  virtual ~Proposal() = default;

  virtual std::size_t width() const { return 1; }
  virtual void sample(Rng& rng, std::span<double> out) const = 0;
  virtual double log_density(std::span<const double> point) const = 0;

  /// Atoms and their probabilities, for finite-support proposals.
  virtual std::optional<std::vector<std::pair<Point, double>>> finite_support() const {
    return std::nullopt;
  }

  Point sample(Rng& rng) const {
    Point p(width());
    sample(rng, p);
    return p;
  }

  /// Jointly draw an offer for this chain and one for a chain proposing from
  /// `other`. The default is a common offer, valid only for the same proposal.
  virtual void sample_coupled(Rng& rng, const Proposal& other, std::span<double> out_self,
                              std::span<double> out_other) const;
};

/// log w_0, log w_1..log w_n and log W = logsumexp(log w_1..log w_n).
struct WeightVector {
  double log_w0 = kNegInf;
  std::vector<double> log_w;
  double log_W = kNegInf;

  std::size_t size() const noexcept { return log_w.size(); }
  /// Every swap is impossible.
  bool dead() const noexcept { return log_W == kNegInf; }
};

enum class Execution { Serial, Parallel };

/// Swap-one-out weights for offer y at state x. Uses the record-additive fast
/// path when the target declares one, unless `use_additive` is false.
/// Parallel execution produces bitwise the same result as serial.
WeightVector compute_weights(const Target& target, const Proposal& proposal, const State& state,
                             std::span<const double> offer, Execution exec = Execution::Serial,
                             bool use_additive = true);

/// Generic path only: every weight from a full log-density evaluation.
WeightVector compute_weights_generic(const Target& target, const Proposal& proposal,
                                     const State& state, std::span<const double> offer,
                                     Execution exec = Execution::Serial);

/// Fast path only; the target must declare additive structure.
WeightVector compute_weights_additive(const Target& target, const Proposal& proposal,
                                      const State& state, std::span<const double> offer,
                                      Execution exec = Execution::Serial);

/// Fixed left-to-right log-sum-exp; the reduction order never depends on threads.
double log_sum_exp(std::span<const double> values);

}  // namespace soma
