#include "soma/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "soma/errors.hpp"

namespace soma {

namespace {

double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

// --- proposals --------------------------------------------------------------

BernoulliProposal::BernoulliProposal(double p) : p_(p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("Bernoulli proposal needs p in (0, 1)");
}

void BernoulliProposal::sample(Rng& rng, std::span<double> out) const {
  out[0] = uniform01(rng) < p_ ? 1.0 : 0.0;
}

double BernoulliProposal::log_density(std::span<const double> point) const {
  if (point[0] == 1.0) return std::log(p_);
  if (point[0] == 0.0) return std::log1p(-p_);
  return kNegInf;
}

std::optional<std::vector<std::pair<Point, double>>> BernoulliProposal::finite_support() const {
  return std::vector<std::pair<Point, double>>{{Point{0.0}, 1.0 - p_}, {Point{1.0}, p_}};
}

BetaProposal::BetaProposal(double a, double b) : a_(a), b_(b), log_norm_(log_beta_fn(a, b)) {
  require_positive(a, "beta shape a");
  require_positive(b, "beta shape b");
}

void BetaProposal::sample(Rng& rng, std::span<double> out) const {
  double x;
  do {
    x = beta_draw(rng, a_, b_);
  } while (!(x > 0.0 && x < 1.0));
  out[0] = x;
}

double BetaProposal::log_density(std::span<const double> point) const {
  const double x = point[0];
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (a_ - 1.0) * std::log(x) + (b_ - 1.0) * std::log1p(-x) - log_norm_;
}

ExponentialProposal::ExponentialProposal(double rate) : rate_(rate) {
  require_positive(rate, "exponential rate");
}

void ExponentialProposal::sample(Rng& rng, std::span<double> out) const {
  out[0] = -std::log(uniform_open(rng)) / rate_;
}

double ExponentialProposal::log_density(std::span<const double> point) const {
  const double x = point[0];
  if (!(x > 0.0)) return kNegInf;
  return std::log(rate_) - rate_ * x;
}

void UniformProposal::sample(Rng& rng, std::span<double> out) const { out[0] = uniform_open(rng); }

double UniformProposal::log_density(std::span<const double> point) const {
  const double x = point[0];
  return (x > 0.0 && x < 1.0) ? 0.0 : kNegInf;
}

// --- Bernoulli-Laplace --------------------------------------------------------

BernoulliLaplaceTarget::BernoulliLaplaceTarget(std::size_t n, std::size_t s)
    : n_(n), s_(s), log_mass_(0.0) {
  if (n == 0) throw ConfigError("bernoulli_laplace needs n >= 1");
  if (s > n) throw ConfigError("bernoulli_laplace needs 0 <= s <= n");
  log_mass_ = -log_binomial(n, s);
}

bool BernoulliLaplaceTarget::in_support(std::span<const double> point) const {
  return point.size() == 1 && (point[0] == 0.0 || point[0] == 1.0);
}

double BernoulliLaplaceTarget::log_density(const State& x) const {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i][0];
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      return kNegInf;
    }
  }
  return ones == s_ ? log_mass_ : kNegInf;
}

std::optional<std::vector<State>> BernoulliLaplaceTarget::enumerate_support(
    std::size_t limit) const {
  if (std::exp(-log_mass_) > static_cast<double>(limit) + 0.5) {
    throw ResourceError("support of bernoulli_laplace exceeds the enumeration limit");
  }
  // lexicographic order over 0/1 vectors with s ones: start from 0..01..1
  std::vector<double> bits(n_, 0.0);
  std::fill(bits.end() - static_cast<std::ptrdiff_t>(s_), bits.end(), 1.0);
  std::vector<State> states;
  do {
    states.push_back(State::scalars(bits));
  } while (std::next_permutation(bits.begin(), bits.end()));
  return states;
}

// --- mean-Laplace family --------------------------------------------------------

MeanLaplaceTarget::MeanLaplaceTarget(double eps, double y_obs, std::size_t n, double lower,
                                     double upper)
    : eps_(eps), y_obs_(y_obs), n_(n), lower_(lower), upper_(upper) {
  require_positive(eps, "eps");
  if (n == 0) throw ConfigError("target needs n >= 1");
  if (!std::isfinite(y_obs)) throw ConfigError("y_obs must be finite");
}

bool MeanLaplaceTarget::in_support(std::span<const double> point) const {
  return point.size() == 1 && point[0] > lower_ && point[0] < upper_;
}

double MeanLaplaceTarget::log_laplace(double mean) const {
  // Laplace(mean, 1/eps) density of the released value
  return std::log(eps_ / 2.0) - eps_ * std::abs(y_obs_ - mean);
}

double MeanLaplaceTarget::log_density(const State& x) const {
  double sum = 0.0;
  double prior = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i][0];
    if (!(v > lower_ && v < upper_)) return kNegInf;
    sum += v;
    prior += log_prior(v);
  }
  return log_laplace(sum / static_cast<double>(x.size())) + prior;
}

void MeanLaplaceTarget::accumulate(std::span<const double> point, double sign,
                                   std::span<double> acc) const {
  acc[0] += sign * point[0] / static_cast<double>(n_);
}

double MeanLaplaceTarget::log_observation(std::span<const double> total) const {
  return log_laplace(total[0]);
}

BetaLaplaceTarget::BetaLaplaceTarget(double a0, double b0, double eps, double y_obs,
                                     std::size_t n)
    : MeanLaplaceTarget(eps, y_obs, n, 0.0, 1.0), a0_(a0), b0_(b0), log_beta_(0.0) {
  require_positive(a0, "a0");
  require_positive(b0, "b0");
  log_beta_ = log_beta_fn(a0, b0);
}

std::optional<double> BetaLaplaceTarget::ratio_bound() const { return std::exp(eps()); }

double BetaLaplaceTarget::log_prior(double x) const {
  return (a0_ - 1.0) * std::log(x) + (b0_ - 1.0) * std::log1p(-x) - log_beta_;
}

double BetaLaplaceTarget::log_record(std::span<const double> point) const {
  const double x = point[0];
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return log_prior(x);
}

ExpLaplaceTarget::ExpLaplaceTarget(double eps, double y_obs, std::size_t n)
    : MeanLaplaceTarget(eps, y_obs, n, 0.0, std::numeric_limits<double>::infinity()) {}

double ExpLaplaceTarget::log_prior(double x) const { return -x; }

double ExpLaplaceTarget::log_record(std::span<const double> point) const {
  const double x = point[0];
  if (!(x > 0.0)) return kNegInf;
  return -x;
}

// --- perturbed histogram -------------------------------------------------------

PerturbedHistogramTarget::PerturbedHistogramTarget(std::vector<double> bin_edges,
                                                   std::vector<double> noisy_counts, double eps,
                                                   std::size_t n)
    : edges_(std::move(bin_edges)), noisy_(std::move(noisy_counts)), eps_(eps), n_(n) {
  require_positive(eps, "eps");
  if (n == 0) throw ConfigError("perturbed_histogram needs n >= 1");
  if (edges_.size() < 2) throw ConfigError("need at least one bin");
  if (edges_.front() != 0.0 || edges_.back() != 1.0) {
    throw ConfigError("bin edges must start at 0 and end at 1");
  }
  if (std::adjacent_find(edges_.begin(), edges_.end(), std::greater_equal<>()) != edges_.end()) {
    throw ConfigError("bin edges must be strictly increasing");
  }
  if (noisy_.size() != edges_.size() - 1) {
    throw ConfigError("need one noisy count per bin");
  }
  // Laplace(C_j, 2/eps): log density -log(4/eps) - eps |D_j - C_j| / 2
  log_norm_ = -std::log(4.0 / eps_);
}

std::optional<double> PerturbedHistogramTarget::ratio_bound() const { return std::exp(eps_); }

bool PerturbedHistogramTarget::in_support(std::span<const double> point) const {
  return point.size() == 1 && point[0] > 0.0 && point[0] < 1.0;
}

std::size_t PerturbedHistogramTarget::bin_of(double x) const {
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

double PerturbedHistogramTarget::bin_term(double noisy, double count) const {
  return log_norm_ - 0.5 * eps_ * std::abs(noisy - count);
}

double PerturbedHistogramTarget::log_density(const State& x) const {
  std::vector<double> counts(noisy_.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i][0];
    if (!(v > 0.0 && v < 1.0)) return kNegInf;
    counts[bin_of(v)] += 1.0;
  }
  double lp = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) lp += bin_term(noisy_[j], counts[j]);
  return lp;
}

void PerturbedHistogramTarget::accumulate(std::span<const double> point, double sign,
                                          std::span<double> acc) const {
  acc[bin_of(point[0])] += sign;
}

double PerturbedHistogramTarget::log_observation(std::span<const double> total) const {
  double lp = 0.0;
  for (std::size_t j = 0; j < noisy_.size(); ++j) lp += bin_term(noisy_[j], total[j]);
  return lp;
}

double PerturbedHistogramTarget::log_observation_swap(std::span<const double> total,
                                                      double log_total,
                                                      std::span<const double> out,
                                                      std::span<const double> in,
                                                      std::span<double> /*scratch*/) const {
  const std::size_t from = bin_of(out[0]);
  const std::size_t to = bin_of(in[0]);
  if (from == to) return log_total;
  // only the two touched bins change
  return log_total - bin_term(noisy_[from], total[from]) -
         bin_term(noisy_[to], total[to]) + bin_term(noisy_[from], total[from] - 1.0) +
         bin_term(noisy_[to], total[to] + 1.0);
}

double PerturbedHistogramTarget::log_record(std::span<const double> point) const {
  return (point[0] > 0.0 && point[0] < 1.0) ? 0.0 : kNegInf;
}

// --- constructors -----------------------------------------------------------------

Model bernoulli_laplace_target(std::size_t n, std::size_t s, double p) {
  return {std::make_shared<BernoulliLaplaceTarget>(n, s), std::make_shared<BernoulliProposal>(p)};
}

Model beta_laplace_target(double a0, double b0, double eps, double y_obs, std::size_t n) {
  return {std::make_shared<BetaLaplaceTarget>(a0, b0, eps, y_obs, n),
          std::make_shared<BetaProposal>(a0, b0)};
}

Model exp_laplace_target(double eps, double y_obs, std::size_t n) {
  return {std::make_shared<ExpLaplaceTarget>(eps, y_obs, n),
          std::make_shared<ExponentialProposal>(1.0)};
}

Model perturbed_histogram_target(std::vector<double> bin_edges, std::vector<double> noisy_counts,
                                 double eps, std::size_t n) {
  return {std::make_shared<PerturbedHistogramTarget>(std::move(bin_edges),
                                                     std::move(noisy_counts), eps, n),
          std::make_shared<UniformProposal>()};
}

std::vector<double> uniform_bin_edges(std::size_t m) {
  if (m == 0) throw ConfigError("need at least one bin");
  std::vector<double> edges(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    edges[j] = static_cast<double>(j) / static_cast<double>(m);
  }
  edges.back() = 1.0;
  return edges;
}

std::vector<double> histogram_counts(std::span<const double> data,
                                     std::span<const double> edges) {
  std::vector<double> counts(edges.size() - 1, 0.0);
  for (double x : data) {
    if (!(x > edges.front() && x < edges.back())) {
      throw DomainError("histogram data must lie inside the bin range");
    }
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    counts[static_cast<std::size_t>(it - edges.begin()) - 1] += 1.0;
  }
  return counts;
}

std::vector<double> privatize_histogram(std::span<const double> data,
                                        std::span<const double> edges, double eps, Rng& rng) {
  auto counts = histogram_counts(data, edges);
  const double scale = 2.0 / eps;
  if (!(scale >= 1e-300)) return counts;
  for (auto& c : counts) c = laplace_draw(rng, c, scale);
  return counts;
}

State initial_state(const Model& model, Rng& rng) {
  const Target& target = *model.target;
  const std::size_t n = target.size();
  const std::size_t width = target.width();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    State x(n, width);
    for (std::size_t i = 0; i < n; ++i) model.proposal->sample(rng, x[i]);
    if (target.log_density(x) > kNegInf) return x;
    if (auto support = target.enumerate_support(1u << 20)) {
      std::uniform_int_distribution<std::size_t> pick(0, support->size() - 1);
      return (*support)[pick(rng)];
    }
  }
  throw PreconditionError("could not draw a positive-density initial state");
}

}  // namespace soma
