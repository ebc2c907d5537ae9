#include "reallocation/combinatorial.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "affine_maximizer.hpp"
#include "reallocation/detail/compensated_sum.hpp"

namespace reallocation::combinatorial {

namespace {

constexpr double kBudgetTolerance = 1e-9;

Bundle full_set(int items) { return items == 0 ? 0 : (Bundle{1} << items) - 1; }

}  // namespace

SetValuation::SetValuation(int items, std::vector<double> table)
    : items_(items), table_(std::move(table)) {
  if (items < 0 || items > kMaxItems)
    throw std::invalid_argument("item count must lie in [0, " + std::to_string(kMaxItems) + "]");
  if (table_.size() != (std::size_t{1} << items))
    throw std::invalid_argument("valuation table needs 2^items entries");
  if (table_[0] != 0.0) throw std::invalid_argument("valuation must be normalized: v(empty) = 0");
  for (Bundle b = 0; b < table_.size(); ++b) {
    if (!std::isfinite(table_[b]) || table_[b] < 0.0)
      throw std::invalid_argument("bundle values must be finite and non-negative");
    // Monotone iff adding any single item never lowers the value.
    for (int k = 0; k < items; ++k) {
      const Bundle bigger = b | (Bundle{1} << k);
      if (bigger != b && table_[bigger] < table_[b])
        throw std::invalid_argument("valuation must be monotone: v(" + std::to_string(b) +
                                    ") > v(" + std::to_string(bigger) + ")");
    }
  }
}

SetValuation SetValuation::additive(std::span<const double> item_values) {
  const int m = static_cast<int>(item_values.size());
  std::vector<double> table(std::size_t{1} << m, 0.0);
  for (Bundle b = 1; b < table.size(); ++b) {
    const int low = __builtin_ctz(b);
    table[b] = table[b & (b - 1)] + item_values[static_cast<std::size_t>(low)];
  }
  return SetValuation(m, std::move(table));
}

SetValuation SetValuation::unit_demand(std::span<const double> item_values) {
  const int m = static_cast<int>(item_values.size());
  std::vector<double> table(std::size_t{1} << m, 0.0);
  for (Bundle b = 1; b < table.size(); ++b) {
    const int low = __builtin_ctz(b);
    table[b] = std::max(table[b & (b - 1)], item_values[static_cast<std::size_t>(low)]);
  }
  return SetValuation(m, std::move(table));
}

SetValuation SetValuation::xos(std::span<const std::vector<double>> clauses) {
  if (clauses.empty()) throw std::invalid_argument("XOS valuation needs at least one clause");
  const int m = static_cast<int>(clauses.front().size());
  std::vector<double> table(std::size_t{1} << m, 0.0);
  for (const auto& clause : clauses) {
    if (static_cast<int>(clause.size()) != m)
      throw std::invalid_argument("XOS clauses must cover the same items");
    const SetValuation add = additive(clause);
    for (Bundle b = 0; b < table.size(); ++b) table[b] = std::max(table[b], add(b));
  }
  return SetValuation(m, std::move(table));
}

std::optional<std::pair<Bundle, Bundle>> SetValuation::subadditivity_violation() const {
  const Bundle all = full_set(items_);
  for (Bundle s = 1; s <= all; ++s) {
    // T ranges over non-empty subsets of the complement of S with T > S, so
    // each unordered pair is visited once.
    const Bundle rest = all & ~s;
    for (Bundle t = rest; t != 0; t = (t - 1) & rest) {
      if (t < s) continue;
      if (table_[s] + table_[t] < table_[s | t] - 1e-12) return std::make_pair(s, t);
    }
  }
  return std::nullopt;
}

SetValuation read_valuation_table(std::istream& in, int items) {
  if (items < 0 || items > kMaxItems) throw std::invalid_argument("unsupported item count");
  const std::size_t size = std::size_t{1} << items;
  std::vector<double> table(size, 0.0);
  std::vector<bool> seen(size, false);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("valuation table line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string mask_text;
    if (!(fields >> mask_text)) continue;
    double value = 0.0;
    if (!(fields >> value)) fail("expected `bitmask value`");
    std::string extra;
    if (fields >> extra) fail("trailing text `" + extra + "`");

    unsigned long mask = 0;
    try {
      std::size_t used = 0;
      if (mask_text.rfind("0b", 0) == 0) {
        mask = std::stoul(mask_text.substr(2), &used, 2);
        used += 2;
      } else if (mask_text.rfind("0x", 0) == 0) {
        mask = std::stoul(mask_text.substr(2), &used, 16);
        used += 2;
      } else {
        mask = std::stoul(mask_text, &used, 10);
      }
      if (used != mask_text.size()) fail("malformed bitmask `" + mask_text + "`");
    } catch (const std::logic_error&) {
      fail("malformed bitmask `" + mask_text + "`");
    }
    if (mask >= size) fail("bitmask " + mask_text + " names an item beyond " + std::to_string(items));
    if (seen[mask]) fail("bundle " + mask_text + " listed twice");
    seen[mask] = true;
    table[mask] = value;
  }
  for (std::size_t b = 0; b < size; ++b)
    if (!seen[b]) throw std::invalid_argument("valuation table misses bundle " + std::to_string(b));
  return SetValuation(items, std::move(table));
}

const SetValuation& ValuationDist::sample(double coin) const {
  if (types.empty() || types.size() != probs.size())
    throw std::invalid_argument("valuation distribution needs one probability per type");
  double cumulative = 0.0;
  for (std::size_t k = 0; k < types.size(); ++k) {
    cumulative += probs[k];
    if (coin < cumulative) return types[k];
  }
  return types.back();
}

DiscreteDist ValuationDist::value_of(Bundle bundle) const {
  if (types.empty() || types.size() != probs.size())
    throw std::invalid_argument("valuation distribution needs one probability per type");
  std::map<double, double> merged;
  for (std::size_t k = 0; k < types.size(); ++k) merged[types[k](bundle)] += probs[k];
  std::vector<Atom> atoms;
  for (auto [v, p] : merged)
    if (p > 0.0) atoms.push_back({v, p});
  return DiscreteDist(std::move(atoms));
}

void ExchangeInstance::validate() const {
  if (items < 0 || items > kMaxItems) throw std::invalid_argument("unsupported item count");
  const std::size_t n = valuations.size();
  if (endowments.size() != n || medians.size() != n)
    throw std::invalid_argument("need one endowment and one median per agent");
  Bundle used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (valuations[i].items() != items)
      throw std::invalid_argument("valuation " + std::to_string(i) + " has the wrong item count");
    if (endowments[i] & ~full_set(items))
      throw std::invalid_argument("endowment " + std::to_string(i) + " names unknown items");
    if (endowments[i] & used) throw std::invalid_argument("endowments must be disjoint");
    used |= endowments[i];
    if (!(medians[i] >= 0.0)) throw std::invalid_argument("medians must be non-negative");
  }
}

int ExchangeInstance::max_endowment_size() const {
  int t = 0;
  for (Bundle e : endowments) t = std::max(t, bundle_size(e));
  return t;
}

double ItemOutcome::welfare(std::span<const SetValuation> valuations) const {
  reallocation::detail::CompensatedSum s;
  for (std::size_t i = 0; i < valuations.size(); ++i) s += valuations[i](holdings[i]);
  return s.value();
}

double harmonic(std::size_t n) {
  double h = 0.0;
  for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
  return h;
}

Allocation optimal_allocation(std::span<const SetValuation> valuations, Bundle items,
                              std::uint64_t budget) {
  const auto list = detail::item_list(items);
  auto search = detail::search_affine(
      valuations.size(), list, /*allow_unsold=*/false,
      [&](std::size_t i, Bundle b) { return valuations[i](b); },
      [](std::span<const Bundle>) { return 0.0; }, budget, "optimal_allocation");
  return {std::move(search.bundles), search.objective};
}

ItemOutcome global_reserve_auction(std::span<const SetValuation> valuations, Bundle items,
                                   double reserve, std::uint64_t budget) {
  if (!(reserve >= 0.0)) throw std::invalid_argument("reserve must be non-negative");
  const std::size_t n = valuations.size();
  std::vector<double> h(n + 1);
  for (std::size_t k = 0; k <= n; ++k) h[k] = harmonic(k);

  const auto list = detail::item_list(items);
  auto search = detail::search_affine(
      n, list, /*allow_unsold=*/true, [&](std::size_t i, Bundle b) { return valuations[i](b); },
      [&](std::span<const Bundle> bundles) {
        std::size_t winners = 0;
        for (Bundle b : bundles) winners += b != 0;
        return h[winners] * reserve;
      },
      budget, "global_reserve_auction");

  ItemOutcome out;
  out.holdings = search.bundles;
  out.payments.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (search.bundles[i] == 0) continue;
    out.payments[i] = search.best_without[i] - (search.objective - search.values[i]);
  }
  for (double p : out.payments) out.burned += p;
  return out;
}

double penalty_c(std::span<const Bundle> allocation, const ExchangeInstance& inst,
                 const std::vector<bool>& accepted_sellers) {
  double c = 0.0;
  for (std::size_t s = 0; s < inst.agents(); ++s) {
    if (!accepted_sellers.at(s)) continue;
    std::size_t touching = 0;
    for (Bundle b : allocation) touching += (b & inst.endowments[s]) != 0;
    c += harmonic(touching) * inst.medians[s];
  }
  return c;
}

CombinatorialMedianResult combinatorial_median(const ExchangeInstance& inst,
                                               const std::vector<bool>& is_seller,
                                               std::uint64_t budget) {
  inst.validate();
  const std::size_t n = inst.agents();
  if (is_seller.size() != n) throw std::invalid_argument("need one group coin per agent");

  CombinatorialMedianResult res;
  res.accepted.assign(n, false);
  res.sold.assign(n, false);
  res.won.assign(n, 0);

  std::vector<std::size_t> buyers;
  std::vector<std::size_t> sellers;
  Bundle pool = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_seller[i]) {
      buyers.push_back(i);
      continue;
    }
    if (inst.valuations[i](inst.endowments[i]) <= inst.medians[i]) {
      res.accepted[i] = true;
      sellers.push_back(i);
      pool |= inst.endowments[i];
    }
  }

  std::vector<double> h(buyers.size() + 1);
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = harmonic(k);

  const auto list = detail::item_list(pool);
  auto search = detail::search_affine(
      buyers.size(), list, /*allow_unsold=*/true,
      [&](std::size_t b, Bundle won) {
        const std::size_t i = buyers[b];
        return inst.valuations[i](won | inst.endowments[i]);
      },
      [&](std::span<const Bundle> bundles) {
        double c = 0.0;
        for (std::size_t s : sellers) {
          std::size_t touching = 0;
          for (Bundle b : bundles) touching += (b & inst.endowments[s]) != 0;
          c += h[touching] * inst.medians[s];
        }
        return c;
      },
      budget, "combinatorial_median");
  res.objective = search.objective;

  ItemOutcome& out = res.outcome;
  out.holdings = inst.endowments;
  out.payments.assign(n, 0.0);

  Bundle sold_items = 0;
  for (std::size_t b = 0; b < buyers.size(); ++b) {
    const std::size_t i = buyers[b];
    res.won[i] = search.bundles[b];
    sold_items |= search.bundles[b];
    out.holdings[i] = inst.endowments[i] | search.bundles[b];
    if (search.bundles[b] != 0)
      out.payments[i] = search.best_without[b] - (search.objective - search.values[b]);
  }
  for (std::size_t s : sellers) {
    if ((inst.endowments[s] & sold_items) == 0) continue;
    res.sold[s] = true;
    out.holdings[s] = 0;
    out.payments[s] = -inst.medians[s];
  }

  for (double p : out.payments) out.burned += p;
  if (out.burned < -kBudgetTolerance)
    throw std::logic_error("combinatorial_median ran a deficit of " + std::to_string(-out.burned));
  return res;
}

}  // namespace reallocation::combinatorial
