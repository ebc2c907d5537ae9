#include <cmath>
#include <limits>
#include <stdexcept>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "reallocation/bilateral.hpp"
#include "reallocation/verify.hpp"

using namespace reallocation;
using namespace reallocation::bilateral;

namespace {

DiscreteDist atoms(std::vector<Atom> a) { return DiscreteDist(std::move(a)); }
const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(FixedPrice, TradesOnWeakInequalities) {
  auto o = fixed_price(1, 0.5, 2);
  EXPECT_TRUE(o.traded);
  EXPECT_DOUBLE_EQ(o.welfare, 2.0);
  o = fixed_price(1, 1.5, 2);
  EXPECT_FALSE(o.traded);
  EXPECT_DOUBLE_EQ(o.welfare, 1.5);
  o = fixed_price(1, 1, 1);
  EXPECT_TRUE(o.traded);
  EXPECT_DOUBLE_EQ(o.welfare, 1.0);
  EXPECT_DOUBLE_EQ(o.seller_payment_received, o.buyer_payment_made);
}

TEST(ExpectedWelfare, Examples) {
  EXPECT_NEAR(expected_welfare(ExpDist(1), ExpDist(0.5), 1.603), 2.0775, 1e-3);
  const auto ds = atoms({{1, .5}, {3, .5}});
  EXPECT_DOUBLE_EQ(expected_welfare(ds, DiscreteDist::point(2), kInf), 2.0);
  EXPECT_DOUBLE_EQ(expected_welfare(ExpDist(2), ExpDist(1), kInf), 0.5);
  EXPECT_DOUBLE_EQ(expected_welfare(ds, DiscreteDist::point(2), 1), 2.5);
}

TEST(ExpectedWelfare, ExponentialMatchesClosedForm) {
  for (double p : {0.0, 0.3, 1.0, 1.603, 2.5, 7.0})
    EXPECT_NEAR(expected_welfare(ExpDist(1), ExpDist(0.5), p), oracle::exp_welfare(1, 0.5, p), 1e-12)
        << "p = " << p;
}

TEST(MedianPrice, DelegatesToMedian) {
  EXPECT_DOUBLE_EQ(median_price(atoms({{1, .5}, {3, .5}})), 1.0);
  EXPECT_NEAR(median_price(ExpDist(1)), std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(median_price(atoms({{0, .25}, {2, .25}, {5, .5}})), 2.0);
}

TEST(ThresholdPrice, Examples) {
  EXPECT_DOUBLE_EQ(t_threshold_price(atoms({{1, .5}, {3, .5}}), 3), 6.0);
  EXPECT_DOUBLE_EQ(t_threshold_price(ExpDist(1), 3), 3.0);
  EXPECT_NEAR(t_threshold_price(atoms({{0, .9}, {10, .1}}), 3), 3.0, 1e-12);
  EXPECT_THROW(t_threshold_price(ExpDist(1), 1.0), std::invalid_argument);
}

TEST(Price5528, Examples) {
  EXPECT_DOUBLE_EQ(price_55_28(atoms({{1, .5}, {3, .5}}), DiscreteDist::point(5)), 1.0);

  const auto zero = DiscreteDist::point(0), one = DiscreteDist::point(1);
  const double p = price_55_28(zero, one);
  EXPECT_DOUBLE_EQ(p, 0.0);
  EXPECT_DOUBLE_EQ(expected_welfare(zero, one, p), 1.0);

  // Reversed medians: W(2) = 3.25 beats W(1) = 3.
  const auto ds = atoms({{2, .5}, {4, .5}}), db = atoms({{1, .5}, {3, .5}});
  EXPECT_DOUBLE_EQ(oracle::welfare_at(ds, db, 2), 3.25);
  EXPECT_DOUBLE_EQ(oracle::welfare_at(ds, db, 1), 3.0);
  EXPECT_DOUBLE_EQ(price_55_28(ds, db), 2.0);
}

TEST(OptimalFixedPrice, ExponentialPair) {
  const auto c = optimal_fixed_price(ExpDist(1), ExpDist(0.5));
  EXPECT_NEAR(c.price, 1.603, 1e-3);
  EXPECT_NEAR(c.welfare, 2.0775, 1e-3);
  // The closed form is flat near the optimum; the price is stationary there.
  const double h = 1e-4;
  EXPECT_GE(c.welfare, oracle::exp_welfare(1, 0.5, c.price - h) - 1e-12);
  EXPECT_GE(c.welfare, oracle::exp_welfare(1, 0.5, c.price + h) - 1e-12);
}

TEST(OptimalFixedPrice, DiscreteExamples) {
  auto c = optimal_fixed_price(DiscreteDist::point(0), DiscreteDist::point(5));
  EXPECT_DOUBLE_EQ(c.welfare, 5.0);
  EXPECT_GE(c.price, 0.0);
  EXPECT_LE(c.price, 5.0);

  c = optimal_fixed_price(atoms({{1, .5}, {3, .5}}), DiscreteDist::point(2));
  EXPECT_DOUBLE_EQ(c.welfare, 2.5);
  EXPECT_GE(c.price, 1.0);
  EXPECT_LE(c.price, 2.0);
}

TEST(GftOfPrice, Examples) {
  const auto ds = atoms({{1, .5}, {3, .5}}), db = atoms({{2, .5}, {4, .5}});
  EXPECT_DOUBLE_EQ(gft_of_price(ds, db, median(ds)), 1.0);
  EXPECT_DOUBLE_EQ(expected_gft(ds, db), 1.25);
  EXPECT_DOUBLE_EQ(gft_of_price(ds, db, 0.5), 0.0);
}

TEST(BilateralProperty, FixedPriceIsBalancedAndRational) {
  gen::for_all(21, 1000, [](gen::Gen& g, int) {
    const double p = g.grid_value(10, 0.5), vs = g.grid_value(10, 0.5), vb = g.grid_value(10, 0.5);
    const auto ledgers = verify::settle(fixed_price(p, vs, vb), vs, vb);
    EXPECT_TRUE(verify::check_ir(ledgers).holds);
    const auto pay = verify::payments_of(ledgers);
    EXPECT_TRUE(verify::check_budget(pay, verify::BudgetMode::Strong).holds);
  });
}

TEST(BilateralProperty, FixedPriceIsTruthful) {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(0.5 * k);
  gen::for_all(22, 200, [&](gen::Gen& g, int) {
    const double p = g.grid_value(10, 0.5), vs = g.grid_value(10, 0.5), vb = g.grid_value(10, 0.5);
    const auto r = verify::check_truthful(verify::fixed_price_problem(p, vs, vb, grid));
    EXPECT_TRUE(r.holds) << verify::format_report(r);
  });
}

TEST(BilateralProperty, ExactWelfareMatchesEnumeration) {
  gen::for_all(23, 500, [](gen::Gen& g, int) {
    const auto ds = g.discrete(8, 20, 0.5), db = g.discrete(8, 20, 0.5);
    const double p = g.grid_value(22, 0.5);
    EXPECT_NEAR(expected_welfare(ds, db, p), oracle::welfare_at(ds, db, p), 1e-12);
    EXPECT_NEAR(gft_of_price(ds, db, p), oracle::gft_at(ds, db, p), 1e-12);
  });
}

TEST(BilateralProperty, OptimalFixedPriceBeatsEveryAtom) {
  gen::for_all(24, 300, [](gen::Gen& g, int) {
    const auto ds = g.discrete(8, 20, 0.5), db = g.discrete(8, 20, 0.5);
    const auto c = optimal_fixed_price(ds, db);
    double best = oracle::mean(ds);  // never trading
    for (auto a : ds.atoms()) best = std::max(best, oracle::welfare_at(ds, db, a.value));
    for (auto a : db.atoms()) best = std::max(best, oracle::welfare_at(ds, db, a.value));
    EXPECT_NEAR(c.welfare, best, 1e-12);
    EXPECT_NEAR(oracle::welfare_at(ds, db, c.price), c.welfare, 1e-12);
  });
}

TEST(BilateralProperty, MedianHalvesOpt) {
  gen::for_all(25, 1000, [](gen::Gen& g, int) {
    const auto ds = g.discrete(8, 40, 0.25), db = g.discrete(8, 40, 0.25);
    EXPECT_GE(expected_welfare(ds, db, median(ds)), expected_max(ds, db) / 2.0);
  });
}

TEST(BilateralProperty, SellerMedianHalvesGft) {
  int checked = 0;
  gen::for_all(26, 2000, [&](gen::Gen& g, int) {
    const auto ds = g.discrete(8, 40, 0.25, true), db = g.discrete(8, 40, 0.25, true);
    if (median(db) < median(ds)) return;
    ++checked;
    EXPECT_GE(gft_of_price(ds, db, median(ds)), expected_gft(ds, db) / 2.0);
  });
  EXPECT_GT(checked, 500);
}

TEST(BilateralProperty, ThresholdLowerBound) {
  int checked = 0;
  gen::for_all(27, 3000, [&](gen::Gen& g, int) {
    const auto ds = g.discrete(6, 40, 0.25), db = g.discrete(6, 40, 0.25);
    const double opt = expected_max(ds, db);
    if (opt <= 0.0) return;
    const double r = expectation(ds) / opt;
    if (r <= 0.0) return;
    const double t_hi = (1.0 - r) / (2.0 * r);
    if (t_hi <= 1.0) return;
    const double t = g.uniform(1.0, t_hi);
    if (t <= 1.0) return;
    ++checked;
    const double w = expected_welfare(ds, db, t_threshold_price(ds, t)) / opt;
    EXPECT_GE(w, 1.0 + r - 1.0 / t + r / t - t * r - 1e-9) << "r = " << r << " t = " << t;
  });
  EXPECT_GT(checked, 100);
}

TEST(BilateralProperty, Rule5528Bound) {
  gen::for_all(28, 1000, [](gen::Gen& g, int) {
    const auto ds = g.discrete(8, 40, 0.25, true), db = g.discrete(8, 40, 0.25, true);
    EXPECT_GE(expected_welfare(ds, db, price_55_28(ds, db)),
              (28.0 / 55.0 - 1e-9) * expected_max(ds, db));
  });
}

TEST(BilateralProperty, NoFixedPriceBeatsTheExponentialBarrier) {
  const auto c = optimal_fixed_price(ExpDist(1), ExpDist(0.5));
  EXPECT_LE(c.welfare, (7.0 / 3.0) / 1.1231 + 1e-3);
  for (int k = 0; k <= 1000; ++k)
    EXPECT_LE(oracle::exp_welfare(1, 0.5, 0.01 * k), c.welfare + 1e-9);
}
