#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace reallocation::arrow_debreu {

struct Breakpoint {
  double x;
  double v;
};

/// Piecewise-linear concave, non-decreasing valuation of a fraction of one
/// divisible good.
///
/// Breakpoints start at (0, 0) with strictly increasing x <= 1; between
/// breakpoints the function is linear and past the last one it stays flat.
/// Slopes must be non-negative and non-increasing (1e-12 slack).
class ConcaveFn {
 public:
  explicit ConcaveFn(std::vector<Breakpoint> breakpoints);

  static ConcaveFn linear(double slope);
  static ConcaveFn zero();

  double operator()(double x) const;
  std::span<const Breakpoint> breakpoints() const { return points_; }
  /// Slope of segment k, i.e. between breakpoints k and k+1. The implicit flat
  /// tail after the last breakpoint has slope 0 and is not listed.
  std::span<const double> slopes() const { return slopes_; }

  /// v'(s) = v(s + r) - v(r) on [0, 1 - r], flat afterwards.
  ConcaveFn shifted(double r) const;

 private:
  std::vector<Breakpoint> points_;
  std::vector<double> slopes_;
};

/// v(x | y) = v(x + y) - v(y). Rejects x < 0, y < 0 or x + y > 1.
double marginal(const ConcaveFn& v, double x, double y);

/// Largest x in [0, r] maximizing p x + v(r - x): every retained unit whose
/// marginal value is at most p is sold, so indifference resolves to selling.
double supply_at_price(const ConcaveFn& v, double r, double p);

struct Instance {
  std::vector<ConcaveFn> valuations;
  std::vector<double> endowments;

  /// Same length, endowments in [0,1] summing to 1 within 1e-12.
  void validate() const;
  std::size_t agents() const { return valuations.size(); }
};

/// Minimal price at which the members' total supply reaches `target`.
///
/// Supply is a right-continuous step function of p that jumps only at segment
/// slopes, so the infimum is found exactly among {0} and those slopes.
/// Rejects groups holding less than 2 * target (for the default target 1/8:
/// groups that are not substantial, i.e. hold less than 1/4).
double mid_supply_price(std::span<const std::size_t> members, const Instance& inst,
                        double target = 1.0 / 8.0);

/// Caps total supply at `cap` by keeping reports from the highest index down:
/// x_i = x'_i while the suffix fits, the crossing index gets the remainder,
/// lower indices get 0. Unchanged if the total is already within cap.
std::vector<double> truncate_supplies(std::span<const double> reported, double cap = 1.0 / 8.0);

struct VcgResult {
  std::vector<double> allocation;  // per buyer
  std::vector<double> payments;    // per buyer
  double dummy_amount = 0.0;       // t'
};

/// Sells t of the good to `buyers` (valuations already shifted by their
/// endowment) plus an additive dummy bidder worth p per unit up to t.
///
/// Allocation is greedy by marginal value over the uniform grid of
/// grid_steps units refined at every buyer breakpoint. On that grid each cell
/// is linear for every buyer, so the greedy is the exact continuous optimum and
/// the result does not depend on grid_steps. The dummy wins ties at slope p;
/// among buyers the lower index wins. Payments are VCG externalities including
/// the dummy's value. Rejects grid_steps < 8 and t outside [0, 1/8].
VcgResult divisible_vcg(std::span<const ConcaveFn> buyers, double p, double t, int grid_steps);

struct Groups {
  // Case with two agents holding at least 1/8: groups[0], groups[1] are those
  // two singletons and groups[2] (everyone else) always buys.
  // Otherwise three substantial groups whose roles are all randomized.
  std::array<std::vector<std::size_t>, 3> members;
  double t_max = 1.0 / 8.0;
  bool buyers_fixed = false;
};

/// Splits agents into the three groups the mechanism needs. Rejects instances
/// where some agent holds more than 1/3 of the good.
Groups build_groups(const Instance& inst);

/// Index into the 6 orderings of (buyers, statistics, sellers) over the three
/// groups, lexicographic in (buyer group, statistics group).
struct RoleCoin {
  int permutation = 0;
};

struct Roles {
  std::vector<std::size_t> buyers;
  std::vector<std::size_t> statistics;
  std::vector<std::size_t> sellers;
};

Roles assign_roles(const Groups& groups, RoleCoin coin);

struct FractionOutcome {
  std::vector<double> holdings;
  std::vector<double> payments;
  double burned = 0.0;

  double welfare(std::span<const ConcaveFn> valuations) const;
};

/// Everything the pipeline computed, for inspection and property checks.
struct MechanismTrace {
  FractionOutcome outcome;
  Roles roles;
  double price = 0.0;
  double t = 0.0;
  double t_max = 0.0;
  double dummy_amount = 0.0;
  std::vector<double> reported_supply;  // x'_i per agent (0 outside sellers)
  std::vector<double> truncated;        // x_i
  std::vector<double> sold;             // x''_i
  std::vector<double> bought;           // buyer quantities on top of r_i
};

/// Optional deviations used by truthfulness checks: a seller's reported
/// supply replaces its truthful supply at the posted price.
struct SupplyReports {
  std::vector<std::size_t> agents;
  std::vector<double> quantities;
};

/// Prior-free mechanism for one divisible good, run for a fixed role coin.
///
/// The statistics group's mid-supply price p is offered to sellers; their
/// supplies are truncated to t_max and t = min(t_max, sum x_i) is auctioned to
/// the buyers against the dummy bidder. What the dummy keeps goes back to the
/// sellers starting from the lowest index, every seller is paid p per unit
/// actually sold, and the statistics group is untouched.
MechanismTrace ad_mechanism(const Instance& inst, RoleCoin coin, int grid_steps = 1024,
                            const SupplyReports* deviations = nullptr);

/// First-best welfare: fills the good greedily along the agents' segments in
/// decreasing slope order.
double optimal_welfare(const Instance& inst);

}  // namespace reallocation::arrow_debreu
