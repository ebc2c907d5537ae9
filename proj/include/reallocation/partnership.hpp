#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "reallocation/distributions.hpp"

namespace reallocation::partnership {

/// n agents with linear values for one divisible asset. Agent i values the
/// whole asset at values[i] and initially owns shares[i].
struct Instance {
  std::vector<double> values;
  std::vector<double> shares;

  /// Throws std::invalid_argument on length mismatch, negative values,
  /// shares outside [0,1] or shares not summing to 1 within 1e-12.
  void validate() const;
  std::size_t size() const { return values.size(); }
  double max_share() const;
};

/// Final shares and payments. Positive payments are paid by the agent.
struct ShareOutcome {
  std::vector<double> holdings;
  std::vector<double> payments;

  double welfare(const std::vector<double>& values) const;
  double payment_sum() const;
};

ShareOutcome no_trade(const Instance& inst);

/// Prior-free mechanism: the highest-value agent buys every share except the
/// second-highest agent's, paying the second-highest value per unit.
/// Ranks break ties by lower index.
ShareOutcome pivot(const Instance& inst);

/// Which two agents a lottery is run between.
struct LotteryPair {
  std::size_t first;
  std::size_t second;
};

/// Turns a partial dissolution into a full one.
///
/// With x_a, x_b the pair's holdings and p_a, p_b their payments, agent a
/// takes x_a + x_b with probability t_a = x_a / (x_a + x_b) and pays p_a / t_a;
/// otherwise b does the same. coin < t_a selects a. Expected payments equal
/// the inputs; guarantees hold only in expectation over the coin.
ShareOutcome full_dissolve(const ShareOutcome& partial, LotteryPair pair, double coin);

/// The two-agent pair the pivot lottery uses: the two top-ranked agents.
LotteryPair pivot_pair(const Instance& inst);

/// Agent `seller` offers its whole share to the others at a posted price.
///
/// The best other agent j (lowest index on ties) buys at per-unit price
/// p* = max(price, m2), m2 being the best value among the remaining agents
/// (0 if none), when v_seller <= p* <= v_j. The seller receives r_seller * p*.
/// `holdings`/`payments` are updated in place, so calls compose.
void single_seller(std::size_t seller, double price, const std::vector<double>& values,
                   double share, ShareOutcome& state);

/// Convenience overload starting from the instance's endowment.
ShareOutcome single_seller(std::size_t seller, double price, const Instance& inst);

/// Sells every agent's endowment in ascending index order, each through
/// single_seller with that agent's precomputed posted price.
ShareOutcome reduction_mechanism(const Instance& inst, const std::vector<double>& seller_prices);

/// Maps (seller distribution, distribution of the best competing value) to a
/// posted price, e.g. bilateral::median_price or bilateral::price_55_28.
using BilateralPriceRule = std::function<double(const Distribution&, const Distribution&)>;

/// Per-seller prices from declared per-agent value distributions.
std::vector<double> reduction_prices(const std::vector<DiscreteDist>& value_dists,
                                     const BilateralPriceRule& rule);

}  // namespace reallocation::partnership
