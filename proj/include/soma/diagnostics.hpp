#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "soma/samplers.hpp"
#include "soma/state.hpp"

namespace soma {

/// n points with mass 1/n each; a point is one component of a State.
using EmpiricalMeasure = State;

struct ScalarSeries {
  std::string label;
  std::vector<double> values;
};

double acceptance_rate(const ChainRecord& record);

struct RhatResult {
  double value = 1.0;
  /// All draws identical; value is 1 by convention.
  bool degenerate = false;
};

/// Rank-normalized split R-hat: the larger of the bulk and folded statistics,
/// never below 1. Chains must share a length of at least 4.
RhatResult split_rhat(std::span<const std::vector<double>> chains);

/// N / tau with tau from Geyer's initial monotone positive sequence, capped at
/// N log10(N) for antithetic chains. Needs at least 8 draws.
double ess(std::span<const double> chain);

/// Sorted-matching W2 between equal-size scalar measures.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

struct SinkhornResult {
  double distance = 0.0;
  std::size_t iterations = 0;
  double marginal_violation = 0.0;
};

/// sqrt(<P, C>) for the entropic plan P on squared-Euclidean cost C, solved in
/// the log domain with reg annealed down to `reg`. Throws ConvergenceError if
/// the marginal violation stays above `tol` after max_iter iterations.
SinkhornResult sinkhorn_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double reg,
                           std::size_t max_iter = 100000, double tol = 1e-8);

/// Biased (V-statistic) MMD^2 with a Gaussian kernel exp(-|x-y|^2 / (2 h^2)).
/// Without a bandwidth, h is the median pairwise distance of the pooled sample.
double mmd_rbf(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
               std::optional<double> bandwidth = std::nullopt);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

/// Per recorded iteration, the q-quantiles of the scalar components.
std::vector<ScalarSeries> quantile_trace(const ChainRecord& record, std::span<const double> qs);

// --- goodness of fit helpers ------------------------------------------------

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness of fit; cells with zero expected probability must be empty.
ChiSquareResult chi_square_test(std::span<const std::size_t> counts,
                                std::span<const double> probs);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic two-sample critical value at level alpha.
double ks_critical_value(std::size_t n_a, std::size_t n_b, double alpha);

}  // namespace soma
