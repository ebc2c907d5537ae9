#pragma once

// Tiny seeded generators for property tests. A failing case reports its index
// so it can be replayed with the same seed.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "reallocation/distributions.hpp"
#include "reallocation/random.hpp"

namespace gen {

struct Gen {
  std::mt19937_64 rng;

  double uniform(double lo, double hi) { return lo + (hi - lo) * reallocation::unit_uniform(rng); }
  std::size_t index(std::size_t n) { return reallocation::uniform_index(rng, n); }
  int integer(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1))); }
  bool coin() { return index(2) == 1; }

  // Values on a coarse grid so ties actually happen.
  double grid_value(int levels, double step) { return step * static_cast<double>(index(static_cast<std::size_t>(levels))); }

  std::vector<double> simplex(std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (double& x : w) total += (x = uniform(0.05, 1.0));
    double used = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) used += (w[i] /= total);
    w[n - 1] = 1.0 - used;
    return w;
  }

  reallocation::DiscreteDist discrete(int max_atoms, int levels, double step, bool equal = false) {
    const int k = integer(1, max_atoms);
    std::vector<double> values;
    for (int i = 0; i < k; ++i) values.push_back(grid_value(levels, step));
    if (equal) return reallocation::DiscreteDist::uniform_over(values);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const auto p = simplex(values.size());
    std::vector<reallocation::Atom> atoms;
    for (std::size_t i = 0; i < values.size(); ++i) atoms.push_back({values[i], p[i]});
    return reallocation::DiscreteDist(std::move(atoms));
  }
};

/// Runs `body(g, case_index)` for `cases` independent generator streams.
template <class Body>
void for_all(std::uint64_t seed, int cases, Body&& body) {
  for (int c = 0; c < cases; ++c) {
    SCOPED_TRACE("seed " + std::to_string(seed) + " case " + std::to_string(c));
    Gen g{reallocation::trial_rng(seed, static_cast<std::uint64_t>(c))};
    body(g, c);
    if (::testing::Test::HasFatalFailure()) return;
  }
}

}  // namespace gen
