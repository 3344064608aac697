#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "soma/coupling.hpp"
#include "soma/rng.hpp"
#include "soma/samplers.hpp"
#include "soma/state.hpp"
#include "soma/target.hpp"
#include "soma/targets.hpp"

namespace soma {

// Records are stored as (x_1, ..., x_p, y), one per state component, in the
// original (unclamped) units. Clamping and scaling happen inside the summary.

struct NIGParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd Lambda;
  double a = 1.0;
  double b = 1.0;

  /// Throws LinalgError / DomainError when Lambda is not SPD or a, b <= 0.
  void validate() const;
  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
};

/// mu = 0, Lambda = lambda * I, over p covariates plus an intercept.
NIGParams default_nig_prior(std::size_t p, double a0 = 10.0, double b0 = 10.0,
                            double lambda = 0.5);

struct RegressionTheta {
  Eigen::VectorXd beta;  // intercept first
  double sigma2 = 1.0;

  friend bool operator==(const RegressionTheta& l, const RegressionTheta& r) {
    return l.sigma2 == r.sigma2 && l.beta.size() == r.beta.size() && l.beta == r.beta;
  }
};

/// x ~ N(mean, I).
struct CovariatePrior {
  Eigen::VectorXd mean;
  std::size_t p() const { return static_cast<std::size_t>(mean.size()); }
};

/// Symmetric clamp interval [-B_k, B_k] per column: p covariates, then y.
using ClampBounds = std::vector<double>;
ClampBounds default_bounds(std::size_t p);

/// Number of privatized entries: the unique entries of the (p+2)x(p+2)
/// cross-moment matrix of (1, x, y), minus the constant (0, 0) entry.
constexpr std::size_t summary_dim(std::size_t p) { return (p + 2) * (p + 3) / 2 - 1; }

/// Per-entry Laplace sensitivity. Each record enters an entry as
/// z_a z_b / n with the scaled columns z = clamp(v, B) / B in [-1, 1], so a
/// changed record moves one entry by at most 2/n and the L1 sensitivity over
/// all entries is 2 * summary_dim(p) / n.
double summary_sensitivity(std::size_t p, std::size_t n);

struct PrivateSummary {
  /// Order: X^T y / n (p+1), y^T y / n, then the upper triangle of X^T X / n
  /// row by row without the (0, 0) entry. X carries the intercept column.
  Eigen::VectorXd values;
  double eps = 0.0;
  std::size_t n = 0;
  ClampBounds bounds;
  double delta = 0.0;

  std::size_t p() const { return bounds.size() - 1; }
  double noise_scale() const { return delta / eps; }
};

State clamp_data(const State& records, std::span<const double> bounds);

/// acc += sign * t(record), t being the record's share of the scaled summary.
void add_record_summary(std::span<const double> record, std::span<const double> bounds,
                        std::size_t n, double sign, std::span<double> acc);

Eigen::VectorXd exact_summaries(const State& records, std::span<const double> bounds);

/// Laplace(0, delta/eps) noise on every entry; eps = +inf releases the exact
/// summaries. Throws PreconditionError for records outside the bounds.
PrivateSummary privatize_summaries(const State& clamped, std::span<const double> bounds,
                                   double eps, Rng& rng);

struct Design {
  Eigen::MatrixXd X;  // n x (p+1), intercept column first
  Eigen::VectorXd y;
};
Design design_matrix(const State& records);

/// Conjugate update through a Cholesky factorization of Lambda_n.
NIGParams nig_posterior(const NIGParams& prior, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& y);

/// The randomness behind one theta draw: a standard Gamma(a) variate and
/// dim standard normals. Sharing it between two chains couples theta.
struct ThetaNoise {
  double gamma = 1.0;
  Eigen::VectorXd normals;
};
ThetaNoise draw_theta_noise(Rng& rng, double shape, std::size_t dim);

/// sigma2 = b / gamma; beta = mu + sqrt(sigma2) L^{-T} z with Lambda = L L^T.
RegressionTheta theta_from_noise(const NIGParams& nig, const ThetaNoise& noise);
RegressionTheta sample_theta(Rng& rng, const NIGParams& nig);

/// eta(s_dp | T(X, y)) * prod f(x_i, y_i | theta), with f = N(x; m, I) N(y; x beta, sigma2).
class ImputationTarget final : public Target, public AdditiveStructure {
 public:
  ImputationTarget(RegressionTheta theta, PrivateSummary summary, CovariatePrior covariates);

  std::string name() const override { return "linreg_imputation"; }
  std::size_t size() const override { return summary_.n; }
  std::size_t width() const override { return covariates_.p() + 1; }
  ComponentKind component_kind() const override { return ComponentKind::Vector; }
  bool in_support(std::span<const double> point) const override;
  double log_density(const State& x) const override;
  const AdditiveStructure* additive() const override { return this; }
  std::optional<double> ratio_bound() const override;

  std::size_t summary_dim() const override { return static_cast<std::size_t>(summary_.values.size()); }
  void accumulate(std::span<const double> point, double sign, std::span<double> acc) const override;
  double log_observation(std::span<const double> total) const override;
  double log_record(std::span<const double> point) const override;

  const RegressionTheta& theta() const noexcept { return theta_; }

 private:
  RegressionTheta theta_;
  PrivateSummary summary_;
  CovariatePrior covariates_;
  double log_norm_;  // per-entry Laplace normalizer
};

/// q = f: x from the covariate prior, y from the regression given x.
class ImputationProposal final : public Proposal {
 public:
  ImputationProposal(RegressionTheta theta, CovariatePrior covariates);

  std::size_t width() const override { return covariates_.p() + 1; }
  void sample(Rng& rng, std::span<double> out) const override;
  double log_density(std::span<const double> point) const override;

  /// Shared normals for x; y from a maximal coupling of the two regression
  /// conditionals, so equal parameters give equal offers.
  void sample_coupled(Rng& rng, const Proposal& other, std::span<double> out_self,
                      std::span<double> out_other) const override;

  double mean_response(std::span<const double> x) const;
  const RegressionTheta& theta() const noexcept { return theta_; }

 private:
  RegressionTheta theta_;
  CovariatePrior covariates_;
};

Model imputation_model(const RegressionTheta& theta, const PrivateSummary& summary,
                       const CovariatePrior& covariates);

/// n records drawn from the model at theta (unclamped).
State simulate_records(Rng& rng, std::size_t n, const RegressionTheta& theta,
                       const CovariatePrior& covariates);

struct LinregProblem {
  NIGParams prior;
  CovariatePrior covariates;
  PrivateSummary summary;
};

/// The experimental setting: p = 2, a0 = b0 = 10, mu0 = 0, Lambda0 = 0.5 I,
/// covariate mean (0.9, -1.17), with a summary supplied by the caller.
LinregProblem default_linreg_problem(PrivateSummary summary);

/// beta = (-1.79, -2.89, -0.66), sigma2 = 1.13.
RegressionTheta reference_theta();

/// Simulates n records at `truth`, clamps and privatizes them.
PrivateSummary simulate_private_summary(Rng& rng, std::size_t n, double eps,
                                        const RegressionTheta& truth,
                                        const CovariatePrior& covariates,
                                        const ClampBounds& bounds);

struct DamcmcOptions {
  std::size_t iters = 1000;
  /// Imputation updates per theta draw; defaults to n (one sweep).
  std::optional<std::size_t> imputation_steps;
  /// Keep every thin-th imputed dataset in the record.
  std::size_t thin = 1;
  /// Starting records; drawn from the prior predictive when empty.
  std::optional<State> init;
};

struct DamcmcResult {
  /// theta_0 (from the starting data) followed by one draw per iteration.
  std::vector<RegressionTheta> theta;
  ChainRecord imputation;
};

/// Iteration t draws theta_t | data, then runs the imputation steps given theta_t.
DamcmcResult damcmc_run(SamplerKind kind, const LinregProblem& problem, std::uint64_t seed,
                        const DamcmcOptions& options = {});

/// Records from the prior predictive: theta from the NIG prior, then simulate.
State prior_predictive_records(Rng& rng, const LinregProblem& problem);

struct DamcmcCouplingOutcome {
  /// First iteration where both imputed datasets and both thetas agree.
  std::optional<std::size_t> meeting_time;
  bool censored = false;
  std::size_t t_max = 0;
  /// First iteration whose imputation ended with equal datasets.
  std::optional<std::size_t> data_meeting_time;
  /// Whether theta agreed at the inference step right after every data meeting.
  bool theta_followed = true;
};

DamcmcCouplingOutcome coupled_damcmc_run(SamplerKind kind, const LinregProblem& problem,
                                         const State& init_a, const State& init_b,
                                         std::size_t t_max, std::uint64_t seed,
                                         std::optional<std::size_t> imputation_steps = {});

/// Replicate r: seed derive_seed(master, r); both chains start from independent
/// prior-predictive draws that do not depend on `kind`.
std::vector<DamcmcCouplingOutcome> coupled_damcmc_replicates(
    SamplerKind kind, const LinregProblem& problem, std::size_t replicates,
    std::uint64_t master_seed, std::size_t t_max, int workers = 0);

}  // namespace soma
