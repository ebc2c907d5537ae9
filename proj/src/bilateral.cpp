#include "reallocation/bilateral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace reallocation::bilateral {

Outcome fixed_price(double price, double seller_value, double buyer_value) {
  Outcome out;
  out.price = price;
  out.traded = seller_value <= price && buyer_value >= price;
  if (out.traded) {
    out.welfare = buyer_value;
    out.seller_payment_received = price;
    out.buyer_payment_made = price;
  } else {
    out.welfare = seller_value;
  }
  return out;
}

double gft_of_price(const Distribution& ds, const Distribution& db, double price) {
  // Independence factorizes the trade event.
  return cdf(ds, price) * partial_mean_above(db, price) -
         partial_mean_below(ds, price) * survival_inclusive(db, price);
}

double expected_welfare(const Distribution& ds, const Distribution& db, double price) {
  return expectation(ds) + gft_of_price(ds, db, price);
}

double median_price(const Distribution& ds) { return median(ds); }

double t_threshold_price(const Distribution& ds, double t) {
  if (!(t > 1.0)) throw std::invalid_argument("t-threshold needs t > 1");
  return t * expectation(ds);
}

double price_55_28(const Distribution& ds, const Distribution& db) {
  const double opt = expected_max(ds, db);
  if (opt <= 0.0) return 0.0;
  const double ms = median(ds);
  const double mb = median(db);
  const double r = expectation(ds) / opt;
  if (mb >= ms) return r >= 1.0 / 13.0 ? ms : t_threshold_price(ds, 3.0);
  return expected_welfare(ds, db, ms) >= expected_welfare(ds, db, mb) ? ms : mb;
}

namespace {

void collect_atoms(const Distribution& d, std::vector<double>& out) {
  if (const auto* dd = std::get_if<DiscreteDist>(&d))
    for (const Atom& a : dd->atoms()) out.push_back(a.value);
}

double min_rate(const Distribution& a, const Distribution& b) {
  double rate = std::numeric_limits<double>::infinity();
  if (const auto* e = std::get_if<ExpDist>(&a)) rate = std::min(rate, e->rate());
  if (const auto* e = std::get_if<ExpDist>(&b)) rate = std::min(rate, e->rate());
  return rate;
}

}  // namespace

PriceChoice optimal_fixed_price(const Distribution& ds, const Distribution& db) {
  std::vector<double> candidates;
  collect_atoms(ds, candidates);
  collect_atoms(db, candidates);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const double top = candidates.empty() ? 0.0 : candidates.back();

  PriceChoice best{0.0, -std::numeric_limits<double>::infinity()};
  auto consider = [&](double p) {
    const double w = expected_welfare(ds, db, p);
    if (w > best.welfare) best = {p, w};
  };

  for (double p : candidates) consider(p);
  consider(top + 1.0);

  const double rate = min_rate(ds, db);
  if (std::isfinite(rate)) {
    const double hi = std::max(top, 0.0) + 60.0 / rate;
    constexpr int kGrid = 6000;
    const double step = hi / kGrid;
    double grid_best = 0.0;
    double grid_welfare = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kGrid; ++k) {
      const double p = k * step;
      const double w = expected_welfare(ds, db, p);
      if (w > grid_welfare) {
        grid_welfare = w;
        grid_best = p;
      }
    }
    // Golden-section refinement inside the neighbouring grid cells.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::max(0.0, grid_best - step);
    double b = grid_best + step;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = expected_welfare(ds, db, c);
    double fd = expected_welfare(ds, db, d);
    while (b - a > 1e-9) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = expected_welfare(ds, db, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = expected_welfare(ds, db, d);
      }
    }
    consider(grid_best);
    consider(0.5 * (a + b));
  }
  return best;
}

}  // namespace reallocation::bilateral
