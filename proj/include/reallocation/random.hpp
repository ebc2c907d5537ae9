#pragma once

#include <cstdint>
#include <random>

namespace reallocation {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, trial); the same pair always yields the same
/// stream regardless of which thread runs the trial.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ trial));
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(std::mt19937_64& g, std::size_t n) {
  return static_cast<std::size_t>(unit_uniform(g) * static_cast<double>(n)) % n;
}

}  // namespace reallocation
