#include <algorithm>
#include <cmath>
#include <string>

#include "soma/errors.hpp"
#include "soma/target.hpp"

namespace soma {

double AdditiveStructure::log_observation_swap(std::span<const double> total, double /*log_total*/,
                                               std::span<const double> out,
                                               std::span<const double> in,
                                               std::span<double> scratch) const {
  std::copy(total.begin(), total.end(), scratch.begin());
  accumulate(out, -1.0, scratch);
  accumulate(in, 1.0, scratch);
  return log_observation(scratch);
}

void Proposal::sample_coupled(Rng& rng, const Proposal& other, std::span<double> out_self,
                              std::span<double> out_other) const {
  if (&other != this) {
    throw PreconditionError("common-offer coupling needs both chains to share one proposal");
  }
  sample(rng, out_self);
  std::copy(out_self.begin(), out_self.end(), out_other.begin());
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == kNegInf || std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

namespace {

bool same_point(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

void check_log_density(double v, std::size_t index) {
  if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
    throw NumericalError("non-finite log-density on an in-support point", index);
  }
}

struct ProposalTerms {
  std::vector<double> log_q;  // log q(x_j)
  double sum = 0.0;
  double log_q_offer = 0.0;
};

ProposalTerms proposal_terms(const Target& target, const Proposal& proposal, const State& state,
                             std::span<const double> offer) {
  if (offer.size() != target.width() || !target.in_support(offer)) {
    throw DomainError("offer outside the target's component space");
  }
  if (state.size() != target.size() || state.width() != target.width()) {
    throw PreconditionError("state shape does not match the target");
  }
  ProposalTerms terms;
  terms.log_q.resize(state.size());
  for (std::size_t j = 0; j < state.size(); ++j) {
    const double lq = proposal.log_density(state[j]);
    if (!std::isfinite(lq)) {
      throw NumericalError("proposal density vanishes at a state component", j);
    }
    terms.log_q[j] = lq;
    terms.sum += lq;
  }
  terms.log_q_offer = proposal.log_density(offer);
  if (!std::isfinite(terms.log_q_offer)) {
    throw DomainError("offer has zero proposal density");
  }
  return terms;
}

}  // namespace

WeightVector compute_weights_generic(const Target& target, const Proposal& proposal,
                                     const State& state, std::span<const double> offer,
                                     Execution exec) {
  const auto terms = proposal_terms(target, proposal, state, offer);
  const std::size_t n = state.size();

  WeightVector out;
  out.log_w.assign(n, kNegInf);
  const double log_pi = target.log_density(state);
  check_log_density(log_pi, n);
  out.log_w0 = log_pi - terms.sum;

  const auto fill = [&](State& work, std::size_t i) {
    if (same_point(state[i], offer)) {
      out.log_w[i] = out.log_w0;
      return;
    }
    work.set(i, offer);
    const double lp = target.log_density(work);
    work.set(i, state[i]);
    check_log_density(lp, i);
    // grouped so that a self-swap reproduces log w_0 exactly
    out.log_w[i] = (lp - terms.sum) + (terms.log_q[i] - terms.log_q_offer);
  };

  if (exec == Execution::Parallel) {
    std::string error;
    std::size_t error_index = 0;
#pragma omp parallel
    {
      State work = state;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
          fill(work, static_cast<std::size_t>(i));
        } catch (const NumericalError& e) {
#pragma omp critical
          if (error.empty()) {
            error = e.what();
            error_index = e.index();
          }
        }
      }
    }
    if (!error.empty()) throw NumericalError(error, error_index);
  } else {
    State work = state;
    for (std::size_t i = 0; i < n; ++i) fill(work, i);
  }
  out.log_W = log_sum_exp(out.log_w);
  return out;
}

WeightVector compute_weights_additive(const Target& target, const Proposal& proposal,
                                      const State& state, std::span<const double> offer,
                                      Execution exec) {
  const AdditiveStructure* add = target.additive();
  if (add == nullptr) {
    throw PreconditionError("target '" + target.name() + "' has no additive structure");
  }
  const auto terms = proposal_terms(target, proposal, state, offer);
  const std::size_t n = state.size();
  const std::size_t dim = add->summary_dim();

  // c(x) = log f(x) - log q(x); C = sum_j c(x_j)
  std::vector<double> record(n);
  std::vector<double> total(dim, 0.0);
  double sum_c = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    record[j] = add->log_record(state[j]) - terms.log_q[j];
    sum_c += record[j];
    add->accumulate(state[j], 1.0, total);
  }
  const double c_offer = add->log_record(offer) - terms.log_q_offer;
  const double log_total = add->log_observation(total);
  check_log_density(log_total, n);

  WeightVector out;
  out.log_w.assign(n, kNegInf);
  out.log_w0 = log_total + sum_c;

  const auto fill = [&](std::span<double> scratch, std::size_t i) {
    if (same_point(state[i], offer)) {
      out.log_w[i] = out.log_w0;
      return;
    }
    const double lg = add->log_observation_swap(total, log_total, state[i], offer, scratch);
    check_log_density(lg, i);
    out.log_w[i] = (lg + sum_c) + (c_offer - record[i]);
  };

  if (exec == Execution::Parallel) {
    std::string error;
    std::size_t error_index = 0;
#pragma omp parallel
    {
      std::vector<double> scratch(dim);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
          fill(scratch, static_cast<std::size_t>(i));
        } catch (const NumericalError& e) {
#pragma omp critical
          if (error.empty()) {
            error = e.what();
            error_index = e.index();
          }
        }
      }
    }
    if (!error.empty()) throw NumericalError(error, error_index);
  } else {
    std::vector<double> scratch(dim);
    for (std::size_t i = 0; i < n; ++i) fill(scratch, i);
  }
  out.log_W = log_sum_exp(out.log_w);
  return out;
}

WeightVector compute_weights(const Target& target, const Proposal& proposal, const State& state,
                             std::span<const double> offer, Execution exec, bool use_additive) {
  if (use_additive && target.additive() != nullptr) {
    return compute_weights_additive(target, proposal, state, offer, exec);
  }
  return compute_weights_generic(target, proposal, state, offer, exec);
}

}  // namespace soma
