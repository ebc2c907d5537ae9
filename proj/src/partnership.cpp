#include "reallocation/partnership.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reallocation/detail/compensated_sum.hpp"

namespace reallocation::partnership {

using detail::CompensatedSum;

void Instance::validate() const {
  if (values.size() != shares.size())
    throw std::invalid_argument("values and shares must have the same length");
  if (values.empty()) throw std::invalid_argument("partnership needs at least one agent");
  CompensatedSum total;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0)
      throw std::invalid_argument("values must be finite and non-negative");
    if (!(shares[i] >= 0.0 && shares[i] <= 1.0))
      throw std::invalid_argument("shares must lie in [0, 1]");
    total += shares[i];
  }
  if (std::abs(total.value() - 1.0) > 1e-12)
    throw std::invalid_argument("shares must sum to 1");
}

double Instance::max_share() const { return *std::max_element(shares.begin(), shares.end()); }

double ShareOutcome::welfare(const std::vector<double>& values) const {
  CompensatedSum s;
  for (std::size_t i = 0; i < values.size(); ++i) s += holdings[i] * values[i];
  return s.value();
}

double ShareOutcome::payment_sum() const {
  CompensatedSum s;
  for (double p : payments) s += p;
  return s.value();
}

ShareOutcome no_trade(const Instance& inst) {
  return {inst.shares, std::vector<double>(inst.size(), 0.0)};
}

namespace {

// Agent indices ordered by value, highest first, lower index first on ties.
std::vector<std::size_t> ranking(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

}  // namespace

ShareOutcome pivot(const Instance& inst) {
  inst.validate();
  ShareOutcome out = no_trade(inst);
  if (inst.size() < 3) return out;

  const auto order = ranking(inst.values);
  const std::size_t top = order[0];
  const double second_value = inst.values[order[1]];
  for (std::size_t k = 2; k < order.size(); ++k) {
    const std::size_t i = order[k];
    const double amount = inst.shares[i] * second_value;
    out.holdings[top] += inst.shares[i];
    out.holdings[i] = 0.0;
    out.payments[top] += amount;
    out.payments[i] -= amount;
  }
  return out;
}

LotteryPair pivot_pair(const Instance& inst) {
  if (inst.size() < 2) throw std::invalid_argument("lottery needs two agents");
  const auto order = ranking(inst.values);
  return {order[0], order[1]};
}

ShareOutcome full_dissolve(const ShareOutcome& partial, LotteryPair pair, double coin) {
  if (!(coin >= 0.0 && coin < 1.0)) throw std::invalid_argument("coin must lie in [0, 1)");
  const double xa = partial.holdings.at(pair.first);
  const double xb = partial.holdings.at(pair.second);
  const double total = xa + xb;
  if (total <= 0.0) return partial;

  const double ta = xa / total;
  const bool first_wins = coin < ta;
  const std::size_t winner = first_wins ? pair.first : pair.second;
  const std::size_t loser = first_wins ? pair.second : pair.first;
  const double tw = first_wins ? ta : xb / total;

  ShareOutcome out = partial;
  out.holdings[winner] = total;
  out.holdings[loser] = 0.0;
  out.payments[winner] = partial.payments[winner] / tw;
  out.payments[loser] = 0.0;
  return out;
}

void single_seller(std::size_t seller, double price, const std::vector<double>& values,
                   double share, ShareOutcome& state) {
  const std::size_t n = values.size();
  if (n < 2) return;
  if (seller >= n) throw std::out_of_range("seller index out of range");
  if (!(price >= 0.0)) throw std::invalid_argument("posted price must be non-negative");

  std::size_t buyer = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == seller) continue;
    if (buyer == n || values[k] > values[buyer]) buyer = k;
  }
  double runner_up = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (k != seller && k != buyer) runner_up = std::max(runner_up, values[k]);

  const double p_star = std::max(price, runner_up);
  if (values[seller] <= p_star && values[buyer] >= p_star) {
    const double amount = share * p_star;
    state.holdings[seller] -= share;
    state.holdings[buyer] += share;
    state.payments[buyer] += amount;
    state.payments[seller] -= amount;
  }
}

ShareOutcome single_seller(std::size_t seller, double price, const Instance& inst) {
  inst.validate();
  ShareOutcome out = no_trade(inst);
  single_seller(seller, price, inst.values, inst.shares.at(seller), out);
  return out;
}

ShareOutcome reduction_mechanism(const Instance& inst, const std::vector<double>& seller_prices) {
  inst.validate();
  if (seller_prices.size() != inst.size())
    throw std::invalid_argument("need one posted price per seller");
  ShareOutcome out = no_trade(inst);
  for (std::size_t i = 0; i < inst.size(); ++i)
    single_seller(i, seller_prices[i], inst.values, inst.shares[i], out);
  return out;
}

std::vector<double> reduction_prices(const std::vector<DiscreteDist>& value_dists,
                                     const BilateralPriceRule& rule) {
  const std::size_t n = value_dists.size();
  std::vector<double> prices(n, 0.0);
  if (n < 2) return prices;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<DiscreteDist> others;
    others.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) others.push_back(value_dists[k]);
    prices[i] = rule(Distribution{value_dists[i]}, Distribution{max_of(others)});
  }
  return prices;
}

}  // namespace reallocation::partnership
