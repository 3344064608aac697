#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace soma {

/// One stream per chain. The engine is fixed so traces replay bit-for-bit
/// for a given seed on a given build.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-replicate seeds.
constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Split rule: stream k of a master seed is mix(master ^ mix(k + 1)).
/// Stream 0 is never the master seed itself.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return mix_seed(master ^ mix_seed(stream + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1); safe for logs and inverse CDFs.
inline double uniform_open(Rng& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u == 0.0);
  return u;
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>{0.0, 1.0}(rng);
}

inline double gamma_draw(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>{shape, scale}(rng);
}

inline double beta_draw(Rng& rng, double a, double b) {
  const double x = gamma_draw(rng, a, 1.0);
  const double y = gamma_draw(rng, b, 1.0);
  return x / (x + y);
}

/// Laplace(location, scale) by inverse CDF.
inline double laplace_draw(Rng& rng, double location, double scale) {
  const double u = uniform_open(rng) - 0.5;
  return location - scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

}  // namespace soma
