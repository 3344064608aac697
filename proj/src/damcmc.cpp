#include "soma/damcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include <omp.h>

#include "soma/errors.hpp"

namespace soma {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal(double v, double mean, double var) {
  const double d = v - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

double clamp_scaled(double v, double bound) { return std::clamp(v, -bound, bound) / bound; }

void check_bounds(std::span<const double> bounds, std::size_t width) {
  if (bounds.size() != width) throw PreconditionError("one clamp bound per record column is required");
  for (double b : bounds) {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("clamp bounds must be positive and finite");
  }
}

}  // namespace

void NIGParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("NIG shape and scale must be positive");
  if (Lambda.rows() != mu.size() || Lambda.cols() != mu.size()) {
    throw PreconditionError("NIG precision and mean dimensions differ");
  }
  if (!Lambda.isApprox(Lambda.transpose(), 1e-12)) throw LinalgError("NIG precision is not symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(Lambda).info() != Eigen::Success) {
    throw LinalgError("NIG precision is not positive definite");
  }
}

NIGParams default_nig_prior(std::size_t p, double a0, double b0, double lambda) {
  const auto d = static_cast<Eigen::Index>(p + 1);
  return {Eigen::VectorXd::Zero(d), lambda * Eigen::MatrixXd::Identity(d, d), a0, b0};
}

ClampBounds default_bounds(std::size_t p) { return ClampBounds(p + 1, 1.0); }

double summary_sensitivity(std::size_t p, std::size_t n) {
  if (n == 0) throw DomainError("sensitivity needs n >= 1");
  return 2.0 * static_cast<double>(summary_dim(p)) / static_cast<double>(n);
}

State clamp_data(const State& records, std::span<const double> bounds) {
  check_bounds(bounds, records.width());
  State out = records;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = out[i];
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::clamp(row[k], -bounds[k], bounds[k]);
  }
  return out;
}

void add_record_summary(std::span<const double> record, std::span<const double> bounds,
                        std::size_t n, double sign, std::span<double> acc) {
  const std::size_t p = record.size() - 1;
  const double scale = sign / static_cast<double>(n);
  double z[32];
  if (p + 2 > std::size(z)) throw PreconditionError("too many covariates");
  z[0] = 1.0;
  for (std::size_t k = 0; k <= p; ++k) z[k + 1] = clamp_scaled(record[k], bounds[k]);
  const double zy = z[p + 1];
  std::size_t idx = 0;
  for (std::size_t a = 0; a <= p; ++a) acc[idx++] += scale * z[a] * zy;
  acc[idx++] += scale * zy * zy;
  for (std::size_t a = 0; a <= p; ++a) {
    for (std::size_t b = a; b <= p; ++b) {
      if (a == 0 && b == 0) continue;
      acc[idx++] += scale * z[a] * z[b];
    }
  }
}

Eigen::VectorXd exact_summaries(const State& records, std::span<const double> bounds) {
  check_bounds(bounds, records.width());
  const std::size_t p = records.width() - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(summary_dim(p)));
  for (std::size_t i = 0; i < records.size(); ++i) {
    add_record_summary(records[i], bounds, records.size(), 1.0,
                       {out.data(), static_cast<std::size_t>(out.size())});
  }
  return out;
}

PrivateSummary privatize_summaries(const State& clamped, std::span<const double> bounds,
                                   double eps, Rng& rng) {
  check_bounds(bounds, clamped.width());
  if (clamped.size() == 0) throw PreconditionError("no records to privatize");
  if (!(eps > 0.0)) throw DomainError("privacy budget must be positive");
  for (std::size_t i = 0; i < clamped.size(); ++i) {
    const auto row = clamped[i];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!(std::abs(row[k]) <= bounds[k])) throw PreconditionError("records must be clamped before privatization");
    }
  }
  PrivateSummary s;
  s.values = exact_summaries(clamped, bounds);
  s.eps = eps;
  s.n = clamped.size();
  s.bounds.assign(bounds.begin(), bounds.end());
  s.delta = summary_sensitivity(clamped.width() - 1, s.n);
  if (std::isfinite(eps)) {
    for (auto& v : s.values) v += laplace_draw(rng, 0.0, s.noise_scale());
  }
  return s;
}

Design design_matrix(const State& records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto p = static_cast<Eigen::Index>(records.width()) - 1;
  Design d{Eigen::MatrixXd(n, p + 1), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = records[static_cast<std::size_t>(i)];
    d.X(i, 0) = 1.0;
    for (Eigen::Index k = 0; k < p; ++k) d.X(i, k + 1) = row[static_cast<std::size_t>(k)];
    d.y(i) = row[static_cast<std::size_t>(p)];
  }
  return d;
}

NIGParams nig_posterior(const NIGParams& prior, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  prior.validate();
  if (X.rows() != y.size() || X.cols() != prior.mu.size()) {
    throw PreconditionError("design shape does not match the prior");
  }
  if (X.rows() == 0) return prior;
  NIGParams post;
  post.Lambda = X.transpose() * X + prior.Lambda;
  const Eigen::LLT<Eigen::MatrixXd> llt(post.Lambda);
  if (llt.info() != Eigen::Success) throw LinalgError("posterior precision is not positive definite");
  post.mu = llt.solve(X.transpose() * y + prior.Lambda * prior.mu);
  post.a = prior.a + 0.5 * static_cast<double>(X.rows());
  post.b = prior.b + 0.5 * (y.squaredNorm() + prior.mu.dot(prior.Lambda * prior.mu) -
                            post.mu.dot(post.Lambda * post.mu));
  if (!(post.b > 0.0)) throw LinalgError("posterior scale lost positivity");
  return post;
}

ThetaNoise draw_theta_noise(Rng& rng, double shape, std::size_t dim) {
  ThetaNoise noise;
  noise.gamma = gamma_draw(rng, shape, 1.0);
  noise.normals.resize(static_cast<Eigen::Index>(dim));
  for (auto& z : noise.normals) z = standard_normal(rng);
  return noise;
}

RegressionTheta theta_from_noise(const NIGParams& nig, const ThetaNoise& noise) {
  const Eigen::LLT<Eigen::MatrixXd> llt(nig.Lambda);
  if (llt.info() != Eigen::Success) throw LinalgError("NIG precision is not positive definite");
  RegressionTheta theta;
  theta.sigma2 = nig.b / noise.gamma;
  theta.beta = nig.mu + std::sqrt(theta.sigma2) *
                            llt.matrixU().solve(noise.normals);
  return theta;
}

RegressionTheta sample_theta(Rng& rng, const NIGParams& nig) {
  nig.validate();
  return theta_from_noise(nig, draw_theta_noise(rng, nig.a, nig.dim()));
}

// --- imputation model ----------------------------------------------------------

ImputationTarget::ImputationTarget(RegressionTheta theta, PrivateSummary summary,
                                   CovariatePrior covariates)
    : theta_(std::move(theta)), summary_(std::move(summary)), covariates_(std::move(covariates)) {
  if (!(summary_.eps > 0.0) || !std::isfinite(summary_.eps)) {
    throw DomainError("the imputation target needs a finite positive privacy budget");
  }
  if (!(theta_.sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  const std::size_t p = covariates_.p();
  if (static_cast<std::size_t>(theta_.beta.size()) != p + 1 || summary_.bounds.size() != p + 1 ||
      static_cast<std::size_t>(summary_.values.size()) != soma::summary_dim(p)) {
    throw PreconditionError("parameter, summary and covariate dimensions disagree");
  }
  if (summary_.n == 0) throw PreconditionError("summary must cover at least one record");
  log_norm_ = -std::log(2.0 * summary_.noise_scale());
}

bool ImputationTarget::in_support(std::span<const double> point) const {
  return point.size() == width() &&
         std::all_of(point.begin(), point.end(), [](double v) { return std::isfinite(v); });
}

void ImputationTarget::accumulate(std::span<const double> point, double sign,
                                  std::span<double> acc) const {
  add_record_summary(point, summary_.bounds, summary_.n, sign, acc);
}

double ImputationTarget::log_observation(std::span<const double> total) const {
  const double inv_scale = 1.0 / summary_.noise_scale();
  double s = 0.0;
  for (std::size_t k = 0; k < total.size(); ++k) {
    s += log_norm_ - inv_scale * std::abs(summary_.values[static_cast<Eigen::Index>(k)] - total[k]);
  }
  return s;
}

double ImputationTarget::log_record(std::span<const double> point) const {
  const std::size_t p = covariates_.p();
  double lp = 0.0;
  double mean = theta_.beta[0];
  for (std::size_t k = 0; k < p; ++k) {
    lp += log_normal(point[k], covariates_.mean[static_cast<Eigen::Index>(k)], 1.0);
    mean += theta_.beta[static_cast<Eigen::Index>(k + 1)] * point[k];
  }
  return lp + log_normal(point[p], mean, theta_.sigma2);
}

double ImputationTarget::log_density(const State& x) const {
  if (x.size() != size() || x.width() != width()) throw PreconditionError("state shape does not match the target");
  std::vector<double> total(summary_dim(), 0.0);
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!in_support(x[i])) return kNegInf;
    accumulate(x[i], 1.0, total);
    lp += log_record(x[i]);
  }
  return log_observation(total) + lp;
}

std::optional<double> ImputationTarget::ratio_bound() const { return std::exp(summary_.eps); }

ImputationProposal::ImputationProposal(RegressionTheta theta, CovariatePrior covariates)
    : theta_(std::move(theta)), covariates_(std::move(covariates)) {
  if (!(theta_.sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  if (static_cast<std::size_t>(theta_.beta.size()) != covariates_.p() + 1) {
    throw PreconditionError("coefficient and covariate dimensions disagree");
  }
}

double ImputationProposal::mean_response(std::span<const double> x) const {
  double m = theta_.beta[0];
  for (std::size_t k = 0; k < covariates_.p(); ++k) m += theta_.beta[static_cast<Eigen::Index>(k + 1)] * x[k];
  return m;
}

void ImputationProposal::sample(Rng& rng, std::span<double> out) const {
  const std::size_t p = covariates_.p();
  for (std::size_t k = 0; k < p; ++k) out[k] = covariates_.mean[static_cast<Eigen::Index>(k)] + standard_normal(rng);
  out[p] = mean_response(out) + std::sqrt(theta_.sigma2) * standard_normal(rng);
}

double ImputationProposal::log_density(std::span<const double> point) const {
  const std::size_t p = covariates_.p();
  double lp = 0.0;
  for (std::size_t k = 0; k < p; ++k) lp += log_normal(point[k], covariates_.mean[static_cast<Eigen::Index>(k)], 1.0);
  return lp + log_normal(point[p], mean_response(point), theta_.sigma2);
}

void ImputationProposal::sample_coupled(Rng& rng, const Proposal& other, std::span<double> out_self,
                                        std::span<double> out_other) const {
  const auto* rhs = dynamic_cast<const ImputationProposal*>(&other);
  if (rhs == nullptr || rhs->covariates_.p() != covariates_.p()) {
    throw PreconditionError("coupled imputation offers need two imputation proposals");
  }
  const std::size_t p = covariates_.p();
  for (std::size_t k = 0; k < p; ++k) {
    const double z = standard_normal(rng);
    out_self[k] = covariates_.mean[static_cast<Eigen::Index>(k)] + z;
    out_other[k] = rhs->covariates_.mean[static_cast<Eigen::Index>(k)] + z;
  }
  // maximal coupling of N(m_a, s_a^2) and N(m_b, s_b^2) by rejection
  const double ma = mean_response(out_self), va = theta_.sigma2;
  const double mb = rhs->mean_response(out_other), vb = rhs->theta_.sigma2;
  const double ya = ma + std::sqrt(va) * standard_normal(rng);
  out_self[p] = ya;
  if (std::log(uniform_open(rng)) + log_normal(ya, ma, va) <= log_normal(ya, mb, vb)) {
    out_other[p] = ya;
    return;
  }
  while (true) {
    const double yb = mb + std::sqrt(vb) * standard_normal(rng);
    if (std::log(uniform_open(rng)) + log_normal(yb, mb, vb) > log_normal(yb, ma, va)) {
      out_other[p] = yb;
      return;
    }
  }
}

Model imputation_model(const RegressionTheta& theta, const PrivateSummary& summary,
                       const CovariatePrior& covariates) {
  return {std::make_shared<ImputationTarget>(theta, summary, covariates),
          std::make_shared<ImputationProposal>(theta, covariates)};
}

State simulate_records(Rng& rng, std::size_t n, const RegressionTheta& theta,
                       const CovariatePrior& covariates) {
  const ImputationProposal f(theta, covariates);
  State out(n, covariates.p() + 1);
  for (std::size_t i = 0; i < n; ++i) f.sample(rng, out[i]);
  return out;
}

LinregProblem default_linreg_problem(PrivateSummary summary) {
  CovariatePrior cov{Eigen::Vector2d(0.9, -1.17)};
  if (summary.p() != 2) throw PreconditionError("the default problem has two covariates");
  return {default_nig_prior(2), std::move(cov), std::move(summary)};
}

RegressionTheta reference_theta() { return {Eigen::Vector3d(-1.79, -2.89, -0.66), 1.13}; }

PrivateSummary simulate_private_summary(Rng& rng, std::size_t n, double eps,
                                        const RegressionTheta& truth,
                                        const CovariatePrior& covariates,
                                        const ClampBounds& bounds) {
  const State raw = simulate_records(rng, n, truth, covariates);
  return privatize_summaries(clamp_data(raw, bounds), bounds, eps, rng);
}

State prior_predictive_records(Rng& rng, const LinregProblem& problem) {
  const RegressionTheta theta = sample_theta(rng, problem.prior);
  return simulate_records(rng, problem.summary.n, theta, problem.covariates);
}

// --- drivers -----------------------------------------------------------------------

namespace {

NIGParams posterior_given(const LinregProblem& problem, const State& data) {
  const Design d = design_matrix(data);
  return nig_posterior(problem.prior, d.X, d.y);
}

void check_init(const LinregProblem& problem, const State& init) {
  if (init.size() != problem.summary.n || init.width() != problem.covariates.p() + 1) {
    throw PreconditionError("starting records do not match the summary shape");
  }
}

}  // namespace

DamcmcResult damcmc_run(SamplerKind kind, const LinregProblem& problem, std::uint64_t seed,
                        const DamcmcOptions& options) {
  if (options.thin == 0) throw PreconditionError("thin must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  Rng init_rng = make_rng(derive_seed(seed, 1));
  Rng rng = make_rng(derive_seed(seed, 2));
  State data = options.init ? *options.init : prior_predictive_records(init_rng, problem);
  check_init(problem, data);
  const std::size_t n = data.size();
  const std::size_t steps = options.imputation_steps.value_or(n);

  DamcmcResult out;
  ChainRecord& rec = out.imputation;
  rec.kind = kind;
  rec.seed = seed;
  rec.thin = options.thin;
  rec.proposed_by_index.assign(n, 0);
  rec.accepted_by_index.assign(n, 0);
  out.theta.reserve(options.iters + 1);
  out.theta.push_back(sample_theta(rng, posterior_given(problem, data)));

  std::size_t cursor = 0;
  for (std::size_t t = 1; t <= options.iters; ++t) {
    if (steps > 0) {
      const Model model = imputation_model(out.theta.back(), problem.summary, problem.covariates);
      for (std::size_t s = 0; s < steps; ++s) {
        const StepInfo info = sampler_step(kind, rng, *model.target, *model.proposal, data, cursor);
        ++rec.step_count;
        if (!info.chosen_index) {
          ++rec.dead_offers;
          continue;
        }
        ++rec.proposed_by_index[*info.chosen_index];
        if (info.accepted) {
          ++rec.accept_count;
          ++rec.accepted_by_index[*info.chosen_index];
        }
      }
    }
    out.theta.push_back(sample_theta(rng, posterior_given(problem, data)));
    if (t % options.thin == 0) {
      rec.iterations.push_back(t);
      rec.trace.push_back(data);
    }
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

DamcmcCouplingOutcome coupled_damcmc_run(SamplerKind kind, const LinregProblem& problem,
                                         const State& init_a, const State& init_b,
                                         std::size_t t_max, std::uint64_t seed,
                                         std::optional<std::size_t> imputation_steps) {
  check_init(problem, init_a);
  check_init(problem, init_b);
  const std::size_t steps = imputation_steps.value_or(init_a.size());
  Rng rng = make_rng(seed);

  CoupledPair pair(init_a, init_b);
  RegressionTheta theta_a, theta_b;
  const auto draw_thetas = [&] {
    const NIGParams pa = posterior_given(problem, pair.a);
    const NIGParams pb = posterior_given(problem, pair.b);
    // a_n depends on n only, so one standard gamma serves both chains
    const ThetaNoise noise = draw_theta_noise(rng, pa.a, pa.dim());
    theta_a = theta_from_noise(pa, noise);
    theta_b = theta_from_noise(pb, noise);
  };

  DamcmcCouplingOutcome out;
  out.t_max = t_max;
  draw_thetas();
  if (pair.met) {
    out.data_meeting_time = 0;
    out.theta_followed = theta_a == theta_b;
    if (out.theta_followed) {
      out.meeting_time = 0;
      return out;
    }
  }

  for (std::size_t t = 1; t <= t_max; ++t) {
    const Model ma = imputation_model(theta_a, problem.summary, problem.covariates);
    const Model mb = imputation_model(theta_b, problem.summary, problem.covariates);
    for (std::size_t s = 0; s < steps; ++s) {
      coupled_step(kind, rng, {*ma.target, *ma.proposal}, {*mb.target, *mb.proposal}, pair);
    }
    draw_thetas();
    if (pair.met) {
      if (!out.data_meeting_time) out.data_meeting_time = t;
      if (theta_a != theta_b) out.theta_followed = false;
      if (theta_a == theta_b) {
        out.meeting_time = t;
        break;
      }
    }
  }
  out.censored = !out.meeting_time.has_value();
  return out;
}

std::vector<DamcmcCouplingOutcome> coupled_damcmc_replicates(
    SamplerKind kind, const LinregProblem& problem, std::size_t replicates,
    std::uint64_t master_seed, std::size_t t_max, int workers) {
  std::vector<DamcmcCouplingOutcome> outcomes(replicates);
  std::string error;
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(replicates); ++r) {
    try {
      const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(r));
      Rng init_rng = make_rng(derive_seed(seed, 1));
      const State a = prior_predictive_records(init_rng, problem);
      const State b = prior_predictive_records(init_rng, problem);
      outcomes[static_cast<std::size_t>(r)] =
          coupled_damcmc_run(kind, problem, a, b, t_max, derive_seed(seed, 3));
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);
  return outcomes;
}

}  // namespace soma
