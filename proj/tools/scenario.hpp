#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reallocation/arrow_debreu.hpp"
#include "reallocation/combinatorial.hpp"
#include "reallocation/distributions.hpp"
#include "reallocation/errors.hpp"
#include "reallocation/partnership.hpp"

namespace reallocation::cli {

/// Bad scenario file. line/column are 1-based; 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

enum class Setting { Bilateral, Partnership, Combinatorial, ArrowDebreu };

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
};

struct BilateralCorpus {
  std::size_t pairs = 0;  // 0: use the declared seller/buyer pair
  int max_atoms = 8;
  double max_value = 10.0;
  bool equal_probability = false;
};

struct CombinatorialAgent {
  std::vector<combinatorial::SetValuation> types;
  std::vector<double> probs;
  combinatorial::Bundle endowment = 0;
  std::optional<double> median;  // derived from the types when absent
};

struct RandomMarket {
  std::size_t agents = 0;  // 0: use the declared agents
  int max_pieces = 3;
  double max_slope = 4.0;
};

struct Scenario {
  std::string name;
  Setting setting = Setting::Bilateral;
  std::string mechanism;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::uint64_t oracle_budget = kDefaultOracleBudget;
  std::optional<double> ratio_bound;
  std::optional<SweepSpec> sweep;

  // bilateral
  std::optional<Distribution> seller;
  std::optional<Distribution> buyer;
  std::optional<double> price;
  std::optional<double> threshold;
  BilateralCorpus corpus;

  // partnership
  std::optional<partnership::Instance> partnership;
  std::vector<double> shares;                // with value distributions
  std::vector<DiscreteDist> value_distributions;
  std::string price_rule = "median";
  std::size_t random_agents = 0;
  double random_max_value = 10.0;
  std::size_t seller_index = 0;
  std::vector<double> report_grid;

  // combinatorial
  int items = 0;
  std::vector<CombinatorialAgent> agents;
  double reserve = 0.0;
  std::vector<combinatorial::SetValuation> valuation_grid;

  // arrow_debreu
  std::optional<arrow_debreu::Instance> market;
  RandomMarket random_market;
  int grid_steps = 1024;
  std::vector<double> quantity_grid;
  std::vector<arrow_debreu::ConcaveFn> concave_grid;
};

/// Parses and validates a scenario. Throws ConfigError with the position of
/// the offending node.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> oracle_budget;
  unsigned jobs = 1;
};

struct CommandResult {
  int exit_code = 0;
  std::string csv;      // empty for verify
  std::string summary;  // human-readable report for stdout
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitPropertyFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitBudgetExceeded = 3;

// These throw ConfigError for scenarios the command cannot handle and
// BudgetExceeded when an oracle refuses.
CommandResult run(const Scenario& s, const RunOptions& opt);
CommandResult verify(const Scenario& s, const RunOptions& opt);
CommandResult sweep(const Scenario& s, const RunOptions& opt);

/// Loads, runs and maps every failure to its exit code; `error` receives the
/// message for exit codes 2 and 3.
CommandResult execute(const std::string& command, const std::string& config_path,
                      const RunOptions& opt, std::string& error);

}  // namespace reallocation::cli
