#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace reallocation {

/// Thrown when an exhaustive enumeration would exceed the caller's budget.
/// `required` is the number of evaluations the enumeration needs.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, std::uint64_t required, std::uint64_t budget)
      : std::runtime_error(what + ": needs " + std::to_string(required) +
                           " evaluations, budget is " + std::to_string(budget)),
        required_(required),
        budget_(budget) {}

  std::uint64_t required() const { return required_; }
  std::uint64_t budget() const { return budget_; }

 private:
  std::uint64_t required_;
  std::uint64_t budget_;
};

inline constexpr std::uint64_t kDefaultOracleBudget = 10'000'000;

}  // namespace reallocation
