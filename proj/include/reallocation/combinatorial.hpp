#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "reallocation/distributions.hpp"
#include "reallocation/errors.hpp"

namespace reallocation::combinatorial {

/// Bitmask over at most 16 items; bit k set means item k is in the bundle.
using Bundle = std::uint32_t;

inline constexpr int kMaxItems = 16;

inline int bundle_size(Bundle b) { return __builtin_popcount(b); }

/// Set function over all 2^m bundles, normalized and monotone.
class SetValuation {
 public:
  /// `table[b]` is the value of bundle b. Throws std::invalid_argument unless
  /// the table has 2^items entries, v(empty) = 0, and v is monotone.
  SetValuation(int items, std::vector<double> table);

  static SetValuation additive(std::span<const double> item_values);
  static SetValuation unit_demand(std::span<const double> item_values);
  /// Maximum over additive clauses (fractionally subadditive).
  static SetValuation xos(std::span<const std::vector<double>> clauses);

  int items() const { return items_; }
  double operator()(Bundle b) const { return table_[b]; }
  std::span<const double> table() const { return table_; }

  /// First pair of disjoint bundles with v(S) + v(T) < v(S u T), if any.
  /// Disjoint pairs suffice under monotonicity.
  std::optional<std::pair<Bundle, Bundle>> subadditivity_violation() const;
  bool is_subadditive() const { return !subadditivity_violation(); }

  friend bool operator==(const SetValuation&, const SetValuation&) = default;

 private:
  int items_;
  std::vector<double> table_;
};

/// Reads one `bitmask value` pair per line; `#` starts a comment. Every
/// bundle must appear exactly once. Throws std::invalid_argument with the
/// offending line number.
SetValuation read_valuation_table(std::istream& in, int items);

/// Finite distribution over valuations, used to draw agents and to derive the
/// median value of an endowment.
struct ValuationDist {
  std::vector<SetValuation> types;
  std::vector<double> probs;

  const SetValuation& sample(double coin) const;
  /// Distribution of v(bundle) when v is drawn from this distribution.
  DiscreteDist value_of(Bundle bundle) const;
};

struct ExchangeInstance {
  int items = 0;
  std::vector<SetValuation> valuations;
  std::vector<Bundle> endowments;
  std::vector<double> medians;

  /// Pairwise-disjoint endowments inside the item set, non-negative medians,
  /// matching sizes.
  void validate() const;
  std::size_t agents() const { return valuations.size(); }
  /// t = max_i |E_i|.
  int max_endowment_size() const;
};

/// Final bundles and payments; positive payments flow to the mechanism.
/// `burned` is the money the mechanism keeps: it equals the payment sum.
struct ItemOutcome {
  std::vector<Bundle> holdings;
  std::vector<double> payments;
  double burned = 0.0;

  double welfare(std::span<const SetValuation> valuations) const;
};

struct Allocation {
  std::vector<Bundle> bundles;
  double welfare = 0.0;
};

/// H_n = 1 + 1/2 + ... + 1/n, H_0 = 0.
double harmonic(std::size_t n);

/// Welfare-maximizing assignment of every item in `items` to some agent by
/// exhaustive enumeration of the n^|items| assignment vectors. Ties keep the
/// lexicographically smallest vector (item order ascending, agent order
/// ascending). Throws BudgetExceeded past `budget` assignments.
Allocation optimal_allocation(std::span<const SetValuation> valuations, Bundle items,
                              std::uint64_t budget = kDefaultOracleBudget);

/// Affine maximizer with a global reserve r: picks the allocation (items may
/// stay unsold) maximizing sum_i v_i(A_i) - H_{n_A} r, n_A being the number
/// of non-empty bundles, and charges VCG-style externalities against that
/// objective. The empty allocation is chosen only when every non-empty
/// allocation has negative adjusted welfare. `burned` is the revenue.
ItemOutcome global_reserve_auction(std::span<const SetValuation> valuations, Bundle items,
                                   double reserve, std::uint64_t budget = kDefaultOracleBudget);

/// c_A = sum over accepted sellers of H_{t_i} MED_i, where t_i counts the
/// agents whose bundle in `allocation` touches E_i.
double penalty_c(std::span<const Bundle> allocation, const ExchangeInstance& inst,
                 const std::vector<bool>& accepted_sellers);

struct CombinatorialMedianResult {
  ItemOutcome outcome;
  std::vector<bool> accepted;  // sellers that took the MED offer
  std::vector<bool> sold;      // accepted sellers with at least one item sold
  std::vector<Bundle> won;     // items each buyer won on top of its endowment
  double objective = 0.0;      // penalized buyer welfare of the chosen allocation
};

/// Randomized exchange for subadditive agents, run for a fixed coin vector:
/// `is_seller[i]` puts agent i in the seller group.
///
/// Sellers accept MED_i iff v_i(E_i) <= MED_i. Items of accepted sellers go to
/// buyers by maximizing sum_{buyers} v_i(A_i u E_i) - c_A; buyers pay their
/// externality on that objective. A seller with any item sold is paid MED_i
/// and gives up all of E_i (unsold items of that seller are discarded). Other
/// sellers keep their endowment.
CombinatorialMedianResult combinatorial_median(const ExchangeInstance& inst,
                                               const std::vector<bool>& is_seller,
                                               std::uint64_t budget = kDefaultOracleBudget);

}  // namespace reallocation::combinatorial
