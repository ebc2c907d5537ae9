// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails. Every tolerance and time limit is pinned below.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "reallocation/arrow_debreu.hpp"
#include "reallocation/bilateral.hpp"
#include "reallocation/combinatorial.hpp"
#include "reallocation/corpus.hpp"
#include "reallocation/partnership.hpp"
#include "reallocation/random.hpp"
#include "reallocation/verify.hpp"
#include "scenario.hpp"

using namespace reallocation;
namespace ad = reallocation::arrow_debreu;
namespace cx = reallocation::combinatorial;

namespace {

// ---- pinned tolerances -------------------------------------------------------
constexpr double kPriceTarget = 1.603, kPriceTol = 0.002;
constexpr double kWelfareTarget = 2.0775, kWelfareTol = 0.002;
constexpr double kRatioTarget = 1.1231, kRatioTol = 0.002;
constexpr double kClosedFormTol = 1e-12;  // 7/3 in double precision
constexpr double kBoundSlack = 1e-9;
constexpr double kHardRatioFloor = 1.99;
constexpr double kHardEps = 1e-3;
constexpr double kExactSlack = 1e-12;  // rounding between two exact formulas
constexpr double kSupplyTol = 1e-4;
constexpr double kSupplyStep = 1e-4;
constexpr std::uint64_t kSeed = 20240611;

struct Line {
  int id;
  std::string status;  // PASS, FAIL or N/A
  std::string text;
  double seconds;
};

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <class F>
Line timed(int id, double limit_s, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string text;
  bool ok = false;
  try {
    ok = body(text);
  } catch (const std::exception& e) {
    text += fmt::format(" exception: {}", e.what());
  }
  const double s = elapsed(start);
  if (s >= limit_s) {
    ok = false;
    text += fmt::format(" over time limit {} s", limit_s);
  }
  return {id, ok ? "PASS" : "FAIL", text, s};
}

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- 1 ------------------------------------------------------------------------
Line exponential_lower_bound() {
  return timed(1, 1.0, [](std::string& t) {
    const auto c = bilateral::optimal_fixed_price(ExpDist(1), ExpDist(0.5));
    const double em = expected_max(ExpDist(1), ExpDist(0.5));
    const double ratio = em / c.welfare;
    t = fmt::format("exponential lower bound: price {:.5f} (target {} +- {}), welfare {:.5f} "
                    "(target {} +- {}), expected_max {} (7/3 +- {}), ratio {:.5f} (target {} +- {})",
                    c.price, kPriceTarget, kPriceTol, c.welfare, kWelfareTarget, kWelfareTol, em,
                    kClosedFormTol, ratio, kRatioTarget, kRatioTol);
    return std::abs(c.price - kPriceTarget) <= kPriceTol &&
           std::abs(c.welfare - kWelfareTarget) <= kWelfareTol &&
           std::abs(em - 7.0 / 3.0) <= kClosedFormTol && std::abs(ratio - kRatioTarget) <= kRatioTol;
  });
}

// ---- 2 ------------------------------------------------------------------------
Line median_two_approximation() {
  return timed(2, 10.0, [](std::string& t) {
    constexpr int kPairs = 500;
    double worst = 0.0;
    bool ok = true;
    for (int k = 0; k < kPairs; ++k) {
      auto rng = trial_rng(kSeed + 2, static_cast<std::uint64_t>(k));
      const auto ds = corpus::random_discrete(rng, 8, 10.0);
      const auto db = corpus::random_discrete(rng, 8, 10.0);
      const auto r = verify::exact_ratio_bilateral(ds, db, median(ds));
      if (std::isfinite(*r.measured)) worst = std::max(worst, *r.measured);
      ok = ok && *r.measured <= 2.0 + kBoundSlack;
    }
    double hard_min = std::numeric_limits<double>::infinity();
    for (int atoms : {20, 200, 2000}) {
      const auto [ds, db] = corpus::two_cluster_instance(kHardEps, atoms, 1e6);
      hard_min = std::min(hard_min, *verify::exact_ratio_bilateral(ds, db, median(ds)).measured);
    }
    ok = ok && hard_min >= kHardRatioFloor;
    t = fmt::format("median 2-approximation: worst ratio {:.6f} over {} pairs (<= 2 + {}), "
                    "hard instances eps {} min ratio {:.6f} (>= {})",
                    worst, kPairs, kBoundSlack, kHardEps, hard_min, kHardRatioFloor);
    return ok;
  });
}

// ---- 3 and 4 share the equal-probability corpus --------------------------------
std::vector<std::pair<DiscreteDist, DiscreteDist>> equal_probability_corpus(int pairs) {
  std::vector<std::pair<DiscreteDist, DiscreteDist>> out;
  for (int k = 0; k < pairs; ++k) {
    auto rng = trial_rng(kSeed + 3, static_cast<std::uint64_t>(k));
    auto ds = corpus::random_discrete(rng, 8, 10.0, true);
    auto db = corpus::random_discrete(rng, 8, 10.0, true);
    out.emplace_back(std::move(ds), std::move(db));
  }
  return out;
}

Line rule_55_28() {
  return timed(3, 30.0, [](std::string& t) {
    const auto pairs = equal_probability_corpus(1000);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& [ds, db] : pairs) {
      const double w = bilateral::expected_welfare(ds, db, bilateral::price_55_28(ds, db));
      worst = std::min(worst, w / expected_max(ds, db));
    }
    t = fmt::format("55/28 rule: worst welfare/expected_max {:.6f} over {} equal-probability pairs "
                    "(>= 28/55 - {} = {:.6f})",
                    worst, pairs.size(), kBoundSlack, 28.0 / 55.0 - kBoundSlack);
    return worst >= 28.0 / 55.0 - kBoundSlack;
  });
}

Line seller_median_gft() {
  return timed(4, 10.0, [](std::string& t) {
    const auto pairs = equal_probability_corpus(1000);
    int checked = 0, violations = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& [ds, db] : pairs) {
      if (median(db) < median(ds)) continue;
      ++checked;
      const double gft = bilateral::gft_of_price(ds, db, median(ds));
      const double half = expected_gft(ds, db) / 2.0;
      if (half > 0) worst = std::min(worst, gft / (2 * half));
      if (gft < half - kExactSlack) ++violations;
    }
    t = fmt::format("seller-median gains from trade: {} qualifying pairs, {} violations of "
                    "gft(M_s) >= E[gft]/2 (slack {}), worst fraction {:.6f}",
                    checked, violations, kExactSlack, worst);
    return checked >= 200 && violations == 0;
  });
}

// ---- 5 ------------------------------------------------------------------------
Line pivot_guarantee() {
  return timed(5, 5.0, [](std::string& t) {
    constexpr int kInstances = 2000;
    int bad_welfare = 0, bad_bb = 0, bad_ir = 0;
    for (int k = 0; k < kInstances; ++k) {
      auto rng = trial_rng(kSeed + 5, static_cast<std::uint64_t>(k));
      const std::size_t n = 2 + uniform_index(rng, 19);
      const auto inst = corpus::random_partnership(rng, n, 10.0);
      const auto out = partnership::pivot(inst);
      const double vmax = *std::max_element(inst.values.begin(), inst.values.end());
      if (out.welfare(inst.values) < (1.0 - inst.max_share()) * vmax - kExactSlack) ++bad_welfare;
      const auto ledgers = verify::settle(inst, out);
      if (!verify::check_ir(ledgers).holds) ++bad_ir;
      if (!verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Strong).holds) ++bad_bb;
    }
    t = fmt::format("pivot guarantee: {} instances (n <= 20), welfare < (1 - r_max) v_max: {}, "
                    "strong BB failures: {}, IR failures: {} (slack {})",
                    kInstances, bad_welfare, bad_bb, bad_ir, kExactSlack);
    return bad_welfare == 0 && bad_bb == 0 && bad_ir == 0;
  });
}

// ---- 6 ------------------------------------------------------------------------
std::vector<cx::SetValuation> value_grid_valuations(int items) {
  std::vector<cx::SetValuation> out;
  const int size = 1 << (2 * items);  // 4 levels per item
  for (int form = 0; form < 2; ++form)
    for (int code = 0; code < size; ++code) {
      std::vector<double> v(static_cast<std::size_t>(items));
      for (int k = 0; k < items; ++k) v[static_cast<std::size_t>(k)] = (code >> (2 * k)) & 3;
      auto val = form == 0 ? cx::SetValuation::additive(v) : cx::SetValuation::unit_demand(v);
      if (std::find(out.begin(), out.end(), val) == out.end()) out.push_back(std::move(val));
    }
  return out;
}

Line global_reserve_guarantee() {
  return timed(6, 60.0, [](std::string& t) {
    const double reserves[] = {0, 0.5, 1, 1.5, 2, 3};
    std::uint64_t instances = 0, runs = 0, allocating = 0, bad_alloc = 0, bad_revenue = 0,
                  bad_share = 0;
    for (int items = 1; items <= 3; ++items) {
      const auto pool = value_grid_valuations(items);
      const cx::Bundle all = (cx::Bundle{1} << items) - 1;
      for (std::size_t n = 1; n <= 3; ++n) {
        std::vector<std::size_t> idx(n, 0);
        std::vector<cx::SetValuation> vals(n, pool[0]);
        while (true) {
          for (std::size_t i = 0; i < n; ++i) vals[i] = pool[idx[i]];
          ++instances;
          const double opt = cx::optimal_allocation(vals, all).welfare;
          for (double r : reserves) {
            ++runs;
            const auto out = cx::global_reserve_auction(vals, all, r);
            std::size_t winners = 0;
            for (cx::Bundle b : out.holdings) winners += b != 0;
            if (winners > 0)
              for (std::size_t i = 0; i < n; ++i)
                if (out.holdings[i] && out.payments[i] < r / winners - kBoundSlack) ++bad_share;
            if (opt >= cx::harmonic(n) * r) {
              ++allocating;
              if (winners == 0) ++bad_alloc;
              else if (out.burned < r - kBoundSlack) ++bad_revenue;
            }
          }
          std::size_t pos = 0;
          while (pos < n && ++idx[pos] == pool.size()) idx[pos++] = 0;
          if (pos == n) break;
        }
      }
    }
    t = fmt::format("global reserve: {} instances x 6 reserves = {} runs (<= 3 agents, <= 3 items, "
                    "values 0..3, additive/unit-demand); OPT >= H_n r in {} runs: empty {}, "
                    "revenue < r: {}; winner pays < r/n_A: {} (slack {})",
                    instances, runs, allocating, bad_alloc, bad_revenue, bad_share, kBoundSlack);
    return bad_alloc == 0 && bad_revenue == 0 && bad_share == 0;
  });
}

// ---- 7 ------------------------------------------------------------------------
struct ExchangeCase {
  int items;
  std::vector<cx::ValuationDist> agents;
  std::vector<cx::Bundle> endowments;
  std::vector<double> medians;
};

cx::SetValuation random_subadditive(std::mt19937_64& rng, int items) {
  std::vector<double> a(static_cast<std::size_t>(items)), b(a.size());
  for (double& x : a) x = static_cast<double>(uniform_index(rng, 4));
  for (double& x : b) x = static_cast<double>(uniform_index(rng, 4));
  switch (uniform_index(rng, 3)) {
    case 0: return cx::SetValuation::additive(a);
    case 1: return cx::SetValuation::unit_demand(a);
    default: {
      const std::vector<std::vector<double>> clauses{a, b};
      return cx::SetValuation::xos(clauses);
    }
  }
}

std::vector<ExchangeCase> exchange_corpus() {
  std::vector<ExchangeCase> out;
  std::uint64_t k = 0;
  for (std::size_t n = 2; n <= 3; ++n)
    for (int items = 1; items <= 3; ++items)
      for (int rep = 0; rep < 4; ++rep) {
        auto rng = trial_rng(kSeed + 7, k++);
        ExchangeCase c{items, {}, std::vector<cx::Bundle>(n, 0), {}};
        for (int item = 0; item < items; ++item) c.endowments[uniform_index(rng, n)] |= cx::Bundle{1} << item;
        for (std::size_t i = 0; i < n; ++i) {
          cx::ValuationDist d;
          const std::size_t types = 2 + uniform_index(rng, 2);
          for (std::size_t s = 0; s < types; ++s) {
            d.types.push_back(random_subadditive(rng, items));
            d.probs.push_back(1.0 / static_cast<double>(types));
          }
          d.probs.back() = 1.0 - (types - 1) * (1.0 / static_cast<double>(types));
          c.medians.push_back(median(d.value_of(c.endowments[i])));
          c.agents.push_back(std::move(d));
        }
        out.push_back(std::move(c));
      }
  return out;
}

Line combinatorial_median_suite() {
  return timed(7, 300.0, [](std::string& t) {
    const auto cases = exchange_corpus();
    std::uint64_t runs = 0, bad_bb = 0, bad_ir = 0, bad_med = 0, truth_runs = 0, witnesses = 0;
    std::string first_witness;
    double worst_gap = -std::numeric_limits<double>::infinity();
    std::string worst_line;
    bool ratio_ok = true;

    for (std::size_t c = 0; c < cases.size(); ++c) {
      const auto& ec = cases[c];
      const std::size_t n = ec.agents.size();
      // Every type profile, every coin.
      std::vector<std::size_t> idx(n, 0);
      while (true) {
        cx::ExchangeInstance inst{ec.items, {}, ec.endowments, ec.medians};
        for (std::size_t i = 0; i < n; ++i) inst.valuations.push_back(ec.agents[i].types[idx[i]]);
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
          std::vector<bool> seller(n);
          for (std::size_t i = 0; i < n; ++i) seller[i] = (mask >> i) & 1u;
          const auto r = cx::combinatorial_median(inst, seller);
          ++runs;
          const auto ledgers = verify::settle(inst.valuations, inst.endowments, r.outcome);
          if (!verify::check_ir(ledgers).holds) ++bad_ir;
          if (!verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Weak).holds) ++bad_bb;
          for (std::size_t i = 0; i < n; ++i)
            if (r.sold[i] && r.outcome.payments[i] != -inst.medians[i]) ++bad_med;
        }
        // Three-point misreport grid shared by every agent.
        auto grid_rng = trial_rng(kSeed + 70, c);
        std::vector<cx::SetValuation> grid{
            cx::SetValuation::additive(std::vector<double>(static_cast<std::size_t>(ec.items), 0.0)),
            cx::SetValuation::additive(std::vector<double>(static_cast<std::size_t>(ec.items), 3.0)),
            random_subadditive(grid_rng, ec.items)};
        const auto tr = verify::check_truthful(verify::combinatorial_median_problem(inst, grid),
                                               kDefaultOracleBudget, jobs());
        truth_runs += tr.checked;
        if (!tr.holds) {
          ++witnesses;
          if (first_witness.empty()) first_witness = verify::format_report(tr);
        }
        std::size_t pos = 0;
        while (pos < n && ++idx[pos] == ec.agents[pos].types.size()) idx[pos++] = 0;
        if (pos == n) break;
      }

      // Monte Carlo ratio over types and coins.
      const int t_size = std::max(1, [&] {
        int m = 0;
        for (auto e : ec.endowments) m = std::max(m, cx::bundle_size(e));
        return m;
      }());
      const double bound = 8.0 * cx::harmonic(static_cast<std::size_t>(t_size));
      const cx::Bundle all = (cx::Bundle{1} << ec.items) - 1;
      const verify::TrialFn trial = [&](std::uint64_t, std::mt19937_64& rng) {
        cx::ExchangeInstance inst{ec.items, {}, ec.endowments, ec.medians};
        for (const auto& d : ec.agents) inst.valuations.push_back(d.sample(unit_uniform(rng)));
        std::vector<bool> seller(n);
        for (std::size_t i = 0; i < n; ++i) seller[i] = unit_uniform(rng) < 0.5;
        const auto r = cx::combinatorial_median(inst, seller);
        return verify::TrialResult{.welfare = r.outcome.welfare(inst.valuations),
                                   .opt = cx::optimal_allocation(inst.valuations, all).welfare};
      };
      const auto run = verify::estimate_ratio(trial, 10000, kSeed + 700 + c, bound, jobs());
      const double measured = *run.report.measured, ci = *run.report.ci_half_width;
      ratio_ok = ratio_ok && run.report.holds;
      if (measured - bound > worst_gap) {
        worst_gap = measured - bound;
        worst_line = fmt::format("{:.4f} +- {:.4f} vs 8H_{} = {:.4f}", measured, ci, t_size, bound);
      }
    }
    t = fmt::format("combinatorial median: {} corpus instances, {} runs over all types x coins: "
                    "weak BB failures {}, IR failures {}, sold-seller payment != MED {}; "
                    "truthfulness {} runs with 3-point grids, {} witnesses; MC ratio (1e4 trials "
                    "each) closest to bound {}",
                    cases.size(), runs, bad_bb, bad_ir, bad_med, truth_runs, witnesses, worst_line);
    if (!first_witness.empty()) t += "\n" + first_witness;
    return bad_bb == 0 && bad_ir == 0 && bad_med == 0 && witnesses == 0 && ratio_ok;
  });
}

// ---- 8 ------------------------------------------------------------------------
Line arrow_debreu_suite() {
  return timed(8, 120.0, [](std::string& t) {
    constexpr int kInstances = 200;
    std::uint64_t runs = 0, bad_bb = 0, bad_ir = 0, bad_pay = 0, bad_ratio = 0;
    double worst_ratio = 0.0;
    for (int k = 0; k < kInstances; ++k) {
      auto rng = trial_rng(kSeed + 8, static_cast<std::uint64_t>(k));
      const std::size_t n = 3 + uniform_index(rng, 8);
      const auto inst = corpus::random_market(rng, n, 3, 4.0);
      double mean = 0.0;
      for (int perm = 0; perm < 6; ++perm) {
        const auto tr = ad::ad_mechanism(inst, {perm});
        ++runs;
        const auto ledgers = verify::settle(inst, tr.outcome);
        if (!verify::check_ir(ledgers).holds) ++bad_ir;
        if (!verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Weak).holds) ++bad_bb;
        for (std::size_t b : tr.roles.buyers)
          if (tr.outcome.payments[b] < tr.bought[b] * tr.price - kBoundSlack) ++bad_pay;
        mean += tr.outcome.welfare(inst.valuations) / 6.0;
      }
      const double opt = ad::optimal_welfare(inst);
      if (mean < opt / 48.0) ++bad_ratio;
      if (mean > 0) worst_ratio = std::max(worst_ratio, opt / mean);
    }

    constexpr int kTriples = 1000;
    int bad_supply = 0;
    double worst_diff = 0.0;
    for (int k = 0; k < kTriples; ++k) {
      auto rng = trial_rng(kSeed + 80, static_cast<std::uint64_t>(k));
      const auto v = corpus::random_concave(rng, 4, 4.0);
      const double r = unit_uniform(rng);
      const double p = 4.5 * unit_uniform(rng);
      const double fast = ad::supply_at_price(v, r, p);
      // Largest maximizer of p x + v(r - x) on the brute-force grid.
      const long cells = static_cast<long>(std::floor(r / kSupplyStep + 1e-9));
      double best = v(r), best_x = 0.0;
      for (long c = 1; c <= cells + 1; ++c) {
        const double x = std::min(r, c * kSupplyStep);
        const double u = p * x + v(r - x);
        if (u >= best - 1e-12) {
          best = std::max(best, u);
          best_x = x;
        }
      }
      worst_diff = std::max(worst_diff, std::abs(fast - best_x));
      if (std::abs(fast - best_x) > kSupplyTol) ++bad_supply;
    }

    t = fmt::format("arrow-debreu: {} instances (3..10 agents, max share <= 1/3) x 6 role "
                    "permutations = {} runs: weak BB failures {}, IR failures {}, buyer paid < "
                    "holding*p {}; mean welfare < OPT/48 in {} instances (worst OPT/mean {:.3f}); "
                    "supply vs {}-step oracle on {} triples: max diff {:.2e} (tol {}), {} misses",
                    kInstances, runs, bad_bb, bad_ir, bad_pay, bad_ratio, worst_ratio, kSupplyStep,
                    kTriples, worst_diff, kSupplyTol, bad_supply);
    return bad_bb == 0 && bad_ir == 0 && bad_pay == 0 && bad_ratio == 0 && bad_supply == 0;
  });
}

// ---- 9 ------------------------------------------------------------------------
Line cli_determinism() {
  return timed(9, 600.0, [](std::string& t) {
    int compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : std::filesystem::directory_iterator(SCENARIO_DIR)) {
      if (entry.path().extension() != ".yaml") continue;
      cli::Scenario s;
      try {
        s = cli::load_scenario(entry.path().string());
      } catch (const cli::ConfigError&) {
        continue;  // the malformed fixture has no CSV to compare
      }
      const std::string name = entry.path().stem().string();
      std::vector<std::function<cli::CommandResult(const cli::RunOptions&)>> commands{
          [&](const cli::RunOptions& o) { return cli::run(s, o); }};
      if (s.sweep) commands.push_back([&](const cli::RunOptions& o) { return cli::sweep(s, o); });
      for (const auto& cmd : commands) {
        const auto a = cmd({.jobs = 1});
        const auto b = cmd({.jobs = 1});
        const auto c = cmd({.jobs = std::max(2u, jobs())});
        ++compared;
        if (a.csv.empty() || a.csv != b.csv || a.csv != c.csv) differing.push_back(name);
      }
    }
    t = fmt::format("CLI determinism: {} scenario commands re-run with the same seed (and other "
                    "--jobs): {} differ{}",
                    compared, differing.size(),
                    differing.empty() ? "" : fmt::format(" ({})", fmt::join(differing, ", ")));
    return compared > 0 && differing.empty();
  });
}

}  // namespace

int main() {
  std::vector<Line> lines;
  lines.push_back(exponential_lower_bound());
  lines.push_back(median_two_approximation());
  lines.push_back(rule_55_28());
  lines.push_back(seller_median_gft());
  lines.push_back(pivot_guarantee());
  lines.push_back(global_reserve_guarantee());
  lines.push_back(combinatorial_median_suite());
  lines.push_back(arrow_debreu_suite());
  lines.push_back(cli_determinism());
  lines.push_back({10, "N/A",
                   "asymptotic claims (efficiency loss vanishing for near-equal shares, tightness "
                   "of 1 - r_max, optimality of constants) are not reproducible at desk scale; "
                   "criteria 1-8 stand in for them",
                   0.0});

  int failures = 0;
  for (const auto& l : lines) {
    fmt::print("criterion {:>2} {:<4} {} [{:.2f} s]\n", l.id, l.status, l.text, l.seconds);
    failures += l.status == "FAIL";
  }
  fmt::print("{} of 9 checkable criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
