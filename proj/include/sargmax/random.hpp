#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sargmax {

// Engine for a (seed, stream) pair. std::seed_seq and std::mt19937_64 are
// fully specified by the standard, so sequences are portable.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Uniform on the open interval (0,1) from the top 53 bits.
inline double open_uniform(std::mt19937_64& engine) {
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform on [lo, hi).
inline double uniform_in(std::mt19937_64& engine, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(engine() >> 11) * 0x1.0p-53);
}

// Gumbel(0,1) by inversion, with u clamped to [1e-12, 1 - 1e-12].
inline double gumbel_from_uniform(double u) {
  const double clamped = std::fmin(std::fmax(u, 1e-12), 1.0 - 1e-12);
  return -std::log(-std::log(clamped));
}

// Standard normal via Box-Muller on two open uniforms.
inline double standard_normal(std::mt19937_64& engine) {
  const double u1 = open_uniform(engine);
  const double u2 = open_uniform(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace sargmax
