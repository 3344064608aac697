#include "soma/bounds.hpp"

#include <cmath>

#include "soma/errors.hpp"

namespace soma {

namespace {

void check_ratio(double M) {
  if (!(M >= 1.0)) throw DomainError("weight-ratio bound M must be >= 1");
}

void check_count(std::size_t n) {
  if (n == 0) throw DomainError("component count must be >= 1");
}

}  // namespace

double accept_bound_soma(std::size_t n, double M) {
  check_ratio(M);
  check_count(n);
  const double nn = static_cast<double>(n);
  return nn / (nn + M - 1.0);
}

double accept_bound_imwg(double M) {
  check_ratio(M);
  return 1.0 / M;
}

double rate_bound_soma(double M) {
  check_ratio(M);
  const double M2 = M * M;
  const double disc = M2 * M2 + 2.0 * M2 * M + 9.0 * M2 - 8.0 * M;
  return (M2 + 3.0 * M - 2.0 + std::sqrt(disc)) / (2.0 * (1.0 + M) * (1.0 + M));
}

double rate_bound_ran(double M) {
  check_ratio(M);
  return (3.0 * M - 2.0 + std::sqrt(M * M + 4.0 * M - 4.0)) / (4.0 * M);
}

double rate_bound_sys(double M) {
  check_ratio(M);
  return std::sqrt((M + 1.0) * (M - 1.0)) / M;
}

double contraction_bound_soma(std::size_t n, std::size_t d, double M) {
  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  if (d > n) throw DomainError("distance exceeds component count");
  return accept_bound_soma(n, M) * dd / (dd + M * (nn - dd));
}

double contraction_bound_ran(std::size_t n, std::size_t d, double M) {
  check_count(n);
  if (d > n) throw DomainError("distance exceeds component count");
  return accept_bound_imwg(M) * static_cast<double>(d) / static_cast<double>(n);
}

double expansion_bound_soma(std::size_t n, std::size_t d, double M) {
  check_ratio(M);
  check_count(n);
  if (d > n) throw DomainError("distance exceeds component count");
  if (n == 2 && d == 1) return M * (M - 1.0) / ((M + 1.0) * (M + 1.0));
  const double dd = static_cast<double>(d);
  const double free = static_cast<double>(n - d);
  return free * M / (free * M + dd) - accept_bound_soma(n, M) * free / (free + dd * M);
}

}  // namespace soma
