#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "soma/rng.hpp"
#include "soma/target.hpp"

namespace soma {

/// A target paired with the independent proposal it is sampled with.
struct Model {
  std::shared_ptr<const Target> target;
  std::shared_ptr<const Proposal> proposal;
};

// ---------------------------------------------------------------------------
// Proposals

class BernoulliProposal final : public Proposal {
 public:
  explicit BernoulliProposal(double p);
  void sample(Rng& rng, std::span<double> out) const override;
  double log_density(std::span<const double> point) const override;
  std::optional<std::vector<std::pair<Point, double>>> finite_support() const override;

 private:
  double p_;
};

class BetaProposal final : public Proposal {
 public:
  BetaProposal(double a, double b);
  void sample(Rng& rng, std::span<double> out) const override;
  double log_density(std::span<const double> point) const override;

 private:
  double a_, b_, log_norm_;
};

class ExponentialProposal final : public Proposal {
 public:
  explicit ExponentialProposal(double rate);
  void sample(Rng& rng, std::span<double> out) const override;
  double log_density(std::span<const double> point) const override;

 private:
  double rate_;
};

/// Uniform on (0, 1).
class UniformProposal final : public Proposal {
 public:
  void sample(Rng& rng, std::span<double> out) const override;
  double log_density(std::span<const double> point) const override;
};

// ---------------------------------------------------------------------------
// Targets

/// Uniform over binary vectors with exactly s ones.
class BernoulliLaplaceTarget final : public Target {
 public:
  BernoulliLaplaceTarget(std::size_t n, std::size_t s);

  std::string name() const override { return "bernoulli_laplace"; }
  std::size_t size() const override { return n_; }
  ComponentKind component_kind() const override { return ComponentKind::Binary; }
  bool in_support(std::span<const double> point) const override;
  double log_density(const State& x) const override;
  std::optional<std::vector<State>> enumerate_support(std::size_t limit) const override;

  std::size_t ones() const noexcept { return s_; }

 private:
  std::size_t n_, s_;
  double log_mass_;
};

/// Laplace observation of the component mean times iid per-component priors.
/// Shared by the Beta- and Exp-prior synthetic targets.
class MeanLaplaceTarget : public Target, public AdditiveStructure {
 public:
  std::size_t size() const override { return n_; }
  bool in_support(std::span<const double> point) const override;
  double log_density(const State& x) const override;
  const AdditiveStructure* additive() const override { return this; }

  std::size_t summary_dim() const override { return 1; }
  void accumulate(std::span<const double> point, double sign,
                  std::span<double> acc) const override;
  double log_observation(std::span<const double> total) const override;

  double eps() const noexcept { return eps_; }
  double observed() const noexcept { return y_obs_; }

 protected:
  MeanLaplaceTarget(double eps, double y_obs, std::size_t n, double lower, double upper);
  virtual double log_prior(double x) const = 0;
  double log_laplace(double mean) const;

 private:
  double eps_, y_obs_;
  std::size_t n_;
  double lower_, upper_;
};

/// Beta(a0, b0) priors on (0, 1); weight ratios bounded by exp(eps) with q = prior.
class BetaLaplaceTarget final : public MeanLaplaceTarget {
 public:
  BetaLaplaceTarget(double a0, double b0, double eps, double y_obs, std::size_t n);
  std::string name() const override { return "beta_laplace"; }
  std::optional<double> ratio_bound() const override;
  double log_record(std::span<const double> point) const override;

 protected:
  double log_prior(double x) const override;

 private:
  double a0_, b0_, log_beta_;
};

/// Exp(1) priors on (0, inf). No bounded weight ratio.
class ExpLaplaceTarget final : public MeanLaplaceTarget {
 public:
  ExpLaplaceTarget(double eps, double y_obs, std::size_t n);
  std::string name() const override { return "exp_laplace"; }
  double log_record(std::span<const double> point) const override;

 protected:
  double log_prior(double x) const override;
};

/// Posterior of n uniform(0,1) points given Laplace(C_j, 2/eps) noisy bin counts.
class PerturbedHistogramTarget final : public Target, public AdditiveStructure {
 public:
  PerturbedHistogramTarget(std::vector<double> bin_edges, std::vector<double> noisy_counts,
                           double eps, std::size_t n);

  std::string name() const override { return "perturbed_histogram"; }
  std::size_t size() const override { return n_; }
  bool in_support(std::span<const double> point) const override;
  double log_density(const State& x) const override;
  const AdditiveStructure* additive() const override { return this; }
  std::optional<double> ratio_bound() const override;

  std::size_t summary_dim() const override { return noisy_.size(); }
  void accumulate(std::span<const double> point, double sign,
                  std::span<double> acc) const override;
  double log_observation(std::span<const double> total) const override;
  double log_observation_swap(std::span<const double> total, double log_total,
                              std::span<const double> out, std::span<const double> in,
                              std::span<double> scratch) const override;
  double log_record(std::span<const double> point) const override;

  /// Index of the bin containing x; bins are [e_j, e_{j+1}).
  std::size_t bin_of(double x) const;
  std::size_t bins() const noexcept { return noisy_.size(); }
  const std::vector<double>& noisy_counts() const noexcept { return noisy_; }

 private:
  double bin_term(double noisy, double count) const;

  std::vector<double> edges_;
  std::vector<double> noisy_;
  double eps_;
  std::size_t n_;
  double log_norm_;
};

// ---------------------------------------------------------------------------
// Constructors with their default proposals

/// Bernoulli(p) proposal; s > n is a config error.
Model bernoulli_laplace_target(std::size_t n, std::size_t s, double p = 0.5);
Model beta_laplace_target(double a0, double b0, double eps, double y_obs, std::size_t n);
Model exp_laplace_target(double eps, double y_obs, std::size_t n);
Model perturbed_histogram_target(std::vector<double> bin_edges, std::vector<double> noisy_counts,
                                 double eps, std::size_t n);

/// m equal-width bins on (0, 1).
std::vector<double> uniform_bin_edges(std::size_t m);

/// Raw counts C_j of the data in each bin.
std::vector<double> histogram_counts(std::span<const double> data, std::span<const double> edges);

/// D_j = C_j + Laplace(0, 2/eps). A scale below 1e-300 adds no noise.
std::vector<double> privatize_histogram(std::span<const double> data,
                                        std::span<const double> edges, double eps, Rng& rng);

/// A positive-density starting state: n proposal draws, or a support state for
/// enumerable targets whose random draws land on zero density.
State initial_state(const Model& model, Rng& rng);

}  // namespace soma
