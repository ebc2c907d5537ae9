#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reallocation/arrow_debreu.hpp"
#include "reallocation/bilateral.hpp"
#include "reallocation/combinatorial.hpp"
#include "reallocation/distributions.hpp"
#include "reallocation/errors.hpp"
#include "reallocation/partnership.hpp"

namespace reallocation::verify {

inline constexpr double kTolerance = 1e-9;

enum class Property { IR, StrongBB, WeakBB, Truthful, Ratio };

std::string_view to_string(Property p);

/// Counterexample record. `values` holds labelled numbers such as the two
/// utilities being compared.
struct Witness {
  std::string instance{};
  std::optional<std::size_t> agent{};
  std::string coin{};
  std::string misreport{};
  std::vector<std::pair<std::string, double>> values{};
};

struct PropertyReport {
  Property property = Property::IR;
  bool holds = true;
  std::optional<Witness> witness{};  // present whenever holds is false
  std::optional<double> measured{};
  std::optional<double> ci_half_width{};
  std::uint64_t checked = 0;  // number of cases examined
};

/// Structured text, one `key: value` per line, witness fields indented.
std::string format_report(const PropertyReport& report);

// ---- settlement ----------------------------------------------------------

/// One agent's realized position. Utility is final_value - payment.
struct AgentLedger {
  double final_value = 0.0;
  double payment = 0.0;
  double endowment_value = 0.0;
};

std::vector<AgentLedger> settle(const bilateral::Outcome& out, double seller_value,
                                double buyer_value);
std::vector<AgentLedger> settle(const partnership::Instance& inst,
                                const partnership::ShareOutcome& out);
std::vector<AgentLedger> settle(std::span<const combinatorial::SetValuation> valuations,
                                std::span<const combinatorial::Bundle> endowments,
                                const combinatorial::ItemOutcome& out);
std::vector<AgentLedger> settle(const arrow_debreu::Instance& inst,
                                const arrow_debreu::FractionOutcome& out);

std::vector<double> payments_of(std::span<const AgentLedger> ledgers);

// ---- ex-post checks ------------------------------------------------------

/// final_value - payment >= endowment_value - 1e-9 for every agent; the
/// witness names the first violating agent.
PropertyReport check_ir(std::span<const AgentLedger> agents, std::string_view instance = "");

enum class BudgetMode { Strong, Weak };

/// Strong: |sum| <= 1e-9. Weak: sum >= -1e-9. `measured` is the sum.
PropertyReport check_budget(std::span<const double> payments, BudgetMode mode,
                            std::string_view instance = "");

// ---- truthfulness --------------------------------------------------------

/// Deterministic core of a mechanism with an enumerable coin space.
///
/// utility(coin, agent, report) is the agent's true utility when it reports
/// grid entry `report` (nullopt = truth) and everyone else is truthful.
struct TruthfulnessProblem {
  std::string instance;
  std::size_t agents = 0;
  std::size_t coins = 1;
  std::vector<std::size_t> grid_sizes;  // misreports per agent
  std::function<double(std::size_t coin, std::size_t agent, std::optional<std::size_t> report)>
      utility;
  std::function<std::string(std::size_t agent, std::size_t report)> describe_report;
  std::function<std::string(std::size_t coin)> describe_coin;

  /// coins * sum_i (grid_sizes[i] + 1) mechanism runs.
  std::uint64_t evaluations() const;
};

/// For every coin, agent and misreport: u(truth) >= u(misreport) - 1e-9.
/// Refuses with BudgetExceeded (carrying the run count) past `budget`. The
/// witness is the first failure in (coin, agent, report) order regardless of
/// `jobs`.
PropertyReport check_truthful(const TruthfulnessProblem& problem,
                              std::uint64_t budget = kDefaultOracleBudget, unsigned jobs = 1);

// Ready-made problems for every mechanism in the library.

TruthfulnessProblem fixed_price_problem(double price, double seller_value, double buyer_value,
                                        std::vector<double> report_grid);
TruthfulnessProblem pivot_problem(const partnership::Instance& inst,
                                  std::vector<double> report_grid);
TruthfulnessProblem single_seller_problem(std::size_t seller, double price,
                                          const partnership::Instance& inst,
                                          std::vector<double> report_grid);
TruthfulnessProblem reduction_problem(const partnership::Instance& inst,
                                      std::vector<double> seller_prices,
                                      std::vector<double> report_grid);
/// Expected utilities over the lottery coin (this mechanism is only truthful
/// in expectation).
TruthfulnessProblem pivot_lottery_problem(const partnership::Instance& inst,
                                          std::vector<double> report_grid);
TruthfulnessProblem global_reserve_problem(std::vector<combinatorial::SetValuation> valuations,
                                           combinatorial::Bundle items, double reserve,
                                           std::vector<combinatorial::SetValuation> report_grid,
                                           std::uint64_t budget = kDefaultOracleBudget);
/// Coins are the 2^n seller/buyer splits.
TruthfulnessProblem combinatorial_median_problem(
    combinatorial::ExchangeInstance inst, std::vector<combinatorial::SetValuation> report_grid,
    std::uint64_t budget = kDefaultOracleBudget);
/// Coins are the six role permutations. Reports are supply quantities
/// (clamped to the endowment; only sellers are affected) followed by
/// valuation reports.
TruthfulnessProblem ad_problem(arrow_debreu::Instance inst, std::vector<double> quantity_grid,
                               std::vector<arrow_debreu::ConcaveFn> valuation_grid,
                               int grid_steps = 1024);

/// Deliberately broken fixture: the seller's posted price is its own reported
/// value, so overstating raises the price it is paid.
partnership::ShareOutcome report_priced_single_seller(std::size_t seller,
                                                      const partnership::Instance& reported);
TruthfulnessProblem report_priced_problem(std::size_t seller, const partnership::Instance& inst,
                                          std::vector<double> report_grid);

// ---- approximation ratio -------------------------------------------------

struct TrialResult {
  double welfare = 0.0;
  double opt = 0.0;
  double revenue_balance = 0.0;  // sum of payments
  double burned = 0.0;
  bool properties_hold = true;
  std::string failure;  // first failed property, if any
};

using TrialFn = std::function<TrialResult(std::uint64_t trial, std::mt19937_64& rng)>;

struct RatioRun {
  PropertyReport report;  // Property::Ratio; measured = E[OPT] / E[welfare]
  std::vector<TrialResult> trials;
  double mean_welfare = 0.0;
  double mean_opt = 0.0;
};

/// Monte Carlo E[OPT] / E[welfare] with a delta-method 95% half-width. Each
/// trial draws from trial_rng(seed, trial), so results are identical for any
/// `jobs`. holds iff measured <= bound + half-width. An oracle failure in any
/// trial propagates (BudgetExceeded carries the count).
RatioRun estimate_ratio(const TrialFn& trial, std::size_t trials, std::uint64_t seed,
                        double bound = std::numeric_limits<double>::infinity(), unsigned jobs = 1);

/// expected_max / expected_welfare at `price`, computed exactly.
PropertyReport exact_ratio_bilateral(const Distribution& ds, const Distribution& db, double price,
                                     double bound = std::numeric_limits<double>::infinity());

}  // namespace reallocation::verify
