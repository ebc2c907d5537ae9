#pragma once

#include "reallocation/distributions.hpp"

namespace reallocation::bilateral {

/// Result of a posted-price trade between one seller and one buyer.
///
/// When the item changes hands the buyer pays exactly what the seller receives,
/// so payments always sum to zero.
struct Outcome {
  bool traded = false;
  double price = 0.0;
  double welfare = 0.0;
  double seller_payment_received = 0.0;
  double buyer_payment_made = 0.0;
};

/// Trade iff v_s <= p and v_b >= p. Both inequalities are weak.
Outcome fixed_price(double price, double seller_value, double buyer_value);

/// Exact expected welfare of posting `price`. The price may be +infinity
/// (never trades).
double expected_welfare(const Distribution& ds, const Distribution& db, double price);

/// Exact E[(v_b - v_s) * 1{v_s <= p <= v_b}].
double gft_of_price(const Distribution& ds, const Distribution& db, double price);

/// Posts the seller's median.
double median_price(const Distribution& ds);

/// t * E[v_s]; rejects t <= 1 with std::invalid_argument.
double t_threshold_price(const Distribution& ds, double t);

/// Price selection that combines both medians with the seller's mean.
///
/// With OPT = E[max(v_s, v_b)] and r = E[v_s] / OPT:
///  - medians ordered M_b >= M_s: post M_s when r >= 1/13, otherwise post
///    the 3-threshold price 3 E[v_s];
///  - medians reversed: post whichever of M_s, M_b has higher expected
///    welfare (M_s on ties).
/// Returns 0 when OPT is 0.
double price_55_28(const Distribution& ds, const Distribution& db);

struct PriceChoice {
  double price;
  double welfare;
};

/// Best deterministic posted price.
///
/// For two discrete distributions the welfare is piecewise constant in p with
/// breakpoints at support atoms, so scanning the atoms (plus one price above
/// every atom) is exact; ties go to the smallest price. When an exponential is
/// involved the closed form is scanned on a grid and refined by golden-section
/// search to a price tolerance of 1e-6.
PriceChoice optimal_fixed_price(const Distribution& ds, const Distribution& db);

}  // namespace reallocation::bilateral
