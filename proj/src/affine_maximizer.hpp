#pragma once

// Exhaustive affine maximization over item assignments. Shared by the
// welfare oracle, the global-reserve auction and the combinatorial median
// mechanism.

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reallocation/combinatorial.hpp"
#include "reallocation/errors.hpp"

namespace reallocation::combinatorial::detail {

struct AffineSearch {
  std::vector<Bundle> bundles;       // chosen allocation, one bundle per bidder
  std::vector<double> values;        // value_i(bundles[i])
  double penalty = 0.0;
  double objective = -std::numeric_limits<double>::infinity();
  // Max over allocations with bidder i empty of sum_{k != i} value_k - penalty.
  std::vector<double> best_without;
};

inline std::uint64_t saturating_power(std::uint64_t base, std::size_t exp) {
  std::uint64_t out = 1;
  for (std::size_t k = 0; k < exp; ++k) {
    if (base != 0 && out > std::numeric_limits<std::uint64_t>::max() / base)
      return std::numeric_limits<std::uint64_t>::max();
    out *= base;
  }
  return out;
}

inline std::vector<int> item_list(Bundle items) {
  std::vector<int> out;
  for (int k = 0; k < kMaxItems; ++k)
    if (items & (Bundle{1} << k)) out.push_back(k);
  return out;
}

// Assignment vectors are enumerated in lexicographic order (first item most
// significant, bidder 0 smallest, "unsold" largest) and only strict
// improvements replace the incumbent, so ties keep the smallest vector.
template <class ValueFn, class PenaltyFn>
AffineSearch search_affine(std::size_t bidders, std::span<const int> items, bool allow_unsold,
                           ValueFn&& value, PenaltyFn&& penalty, std::uint64_t budget,
                           const char* what) {
  const std::size_t base = bidders + (allow_unsold ? 1 : 0);
  const std::size_t k = items.size();
  if (base == 0 && k > 0)
    throw std::invalid_argument(std::string(what) + ": items but nobody to assign them to");
  const std::uint64_t count = saturating_power(base, k);
  if (count > budget) throw BudgetExceeded(what, count, budget);

  AffineSearch best;
  best.best_without.assign(bidders, -std::numeric_limits<double>::infinity());

  std::vector<std::size_t> digit(k, 0);
  std::vector<Bundle> bundles(bidders, 0);
  std::vector<double> vals(bidders, 0.0);
  auto owner_add = [&](std::size_t pos) {
    if (digit[pos] < bidders) bundles[digit[pos]] |= Bundle{1} << items[pos];
  };
  auto owner_remove = [&](std::size_t pos) {
    if (digit[pos] < bidders) bundles[digit[pos]] &= ~(Bundle{1} << items[pos]);
  };
  for (std::size_t pos = 0; pos < k; ++pos) owner_add(pos);

  while (true) {
    double total = 0.0;
    for (std::size_t i = 0; i < bidders; ++i) {
      vals[i] = value(i, bundles[i]);
      total += vals[i];
    }
    const double pen = penalty(std::span<const Bundle>(bundles));
    const double obj = total - pen;
    if (obj > best.objective) {
      best.objective = obj;
      best.bundles = bundles;
      best.values = vals;
      best.penalty = pen;
    }
    for (std::size_t i = 0; i < bidders; ++i) {
      if (bundles[i] != 0) continue;
      const double others = total - vals[i] - pen;
      if (others > best.best_without[i]) best.best_without[i] = others;
    }

    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      owner_remove(pos);
      if (++digit[pos] < base) {
        owner_add(pos);
        break;
      }
      digit[pos] = 0;
      owner_add(pos);
      if (pos == 0) return best;
    }
    if (k == 0) return best;
  }
}

}  // namespace reallocation::combinatorial::detail
