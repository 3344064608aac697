#pragma once

#include <cstddef>

namespace soma {

// Lower bounds on overall acceptance under a weight-ratio bound M >= 1.
// All functions throw DomainError for M < 1 (or n = 0).

/// n / (n + M - 1)
double accept_bound_soma(std::size_t n, double M);
/// 1 / M; applies to both scan orders.
double accept_bound_imwg(double M);

// Upper bounds on the geometric convergence rate at n = 2, from the
// second eigenvalue of the dominating distance chains.

double rate_bound_soma(double M);
double rate_bound_ran(double M);
double rate_bound_sys(double M);

/// One-step contraction lower bounds for coupled chains at distance d.
double contraction_bound_soma(std::size_t n, std::size_t d, double M);
double contraction_bound_ran(std::size_t n, std::size_t d, double M);

/// One-step expansion upper bound for coupled SOMA at distance d.
double expansion_bound_soma(std::size_t n, std::size_t d, double M);

}  // namespace soma
