#pragma once

#include <span>
#include <variant>
#include <vector>

namespace reallocation {

struct Atom {
  double value;
  double prob;
};

/// Finite distribution over non-negative values.
///
/// Atoms are kept strictly increasing in value; probabilities must sum to one
/// within 1e-12. Construction validates and throws std::invalid_argument.
class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<Atom> atoms);

  /// Equal-probability atoms at the given values (duplicates are merged).
  static DiscreteDist uniform_over(std::vector<double> values);
  static DiscreteDist point(double value);

  std::span<const Atom> atoms() const { return atoms_; }
  double min_value() const { return atoms_.front().value; }
  double max_value() const { return atoms_.back().value; }

  /// True when every atom carries the same probability.
  bool equal_probability() const;

 private:
  std::vector<Atom> atoms_;
};

/// Exponential distribution with CDF 1 - exp(-rate * v).
class ExpDist {
 public:
  explicit ExpDist(double rate);
  double rate() const { return rate_; }

 private:
  double rate_;
};

using Distribution = std::variant<DiscreteDist, ExpDist>;

// Median convention: the smallest m with Pr[v <= m] >= 1/2. For an atom whose
// CDF jumps over 1/2 that atom is the median. Exponential: ln(2) / rate.
double median(const Distribution& d);
double expectation(const Distribution& d);

/// E[max(v_s, v_b)] for independent draws.
double expected_max(const Distribution& ds, const Distribution& db);

/// E[max(v_b - v_s, 0)] for independent draws.
double expected_gft(const Distribution& ds, const Distribution& db);

/// Inverse-CDF draw; coin in [0, 1).
double sample(const Distribution& d, double coin);

// Tail quantities used by the posted-price formulas. All are exact.
double cdf(const Distribution& d, double x);                 // Pr[v <= x]
double survival_inclusive(const Distribution& d, double x);  // Pr[v >= x]
double partial_mean_below(const Distribution& d, double x);  // E[v * 1{v <= x}]
double partial_mean_above(const Distribution& d, double x);  // E[v * 1{v >= x}]

/// Distribution of max_k v_k for independent discrete v_k, computed exactly
/// from the product of CDFs over the union of supports.
DiscreteDist max_of(std::span<const DiscreteDist> dists);

/// Replace an exponential by `atoms` equal-probability atoms placed at the
/// quantile midpoints (k + 1/2) / atoms. Discrete inputs pass through.
DiscreteDist discretize(const Distribution& d, int atoms);

}  // namespace reallocation
