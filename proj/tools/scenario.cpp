#include "scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "reallocation/bilateral.hpp"
#include "reallocation/corpus.hpp"
#include "reallocation/random.hpp"
#include "reallocation/verify.hpp"

namespace reallocation::cli {

namespace {

using combinatorial::Bundle;
using combinatorial::SetValuation;
using verify::PropertyReport;
using verify::TrialResult;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::string_view kRunHeader =
    "trial,welfare,opt,ratio,revenue_balance,burned,ci_half_width,properties\n";
constexpr std::string_view kSweepHeader =
    "parameter,value,trials,welfare,opt,ratio,ci_half_width,revenue_balance,burned,properties\n";

struct Context {
  Scenario s;
  std::uint64_t seed;
  std::uint64_t budget;
  unsigned jobs;
};

Context make_context(const Scenario& s, const RunOptions& opt) {
  return {s, opt.seed.value_or(s.seed), opt.oracle_budget.value_or(s.oracle_budget),
          std::max(1u, opt.jobs)};
}

double ratio_of(double opt, double welfare) {
  if (welfare > 0.0) return opt / welfare;
  return opt > 0.0 ? kInf : 1.0;
}

double sum_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

// Records the first failed property of a trial.
void require(TrialResult& r, const PropertyReport& rep) {
  if (rep.holds || !r.properties_hold) return;
  r.properties_hold = false;
  r.failure = std::string(verify::to_string(rep.property));
}

void require(TrialResult& r, bool ok, std::string_view what) {
  if (ok || !r.properties_hold) return;
  r.properties_hold = false;
  r.failure = std::string(what);
}

// ---- bilateral -----------------------------------------------------------

double bilateral_price(const Scenario& s, const Distribution& ds, const Distribution& db) {
  if (s.mechanism == "fixed_price") return *s.price;
  if (s.mechanism == "median") return bilateral::median_price(ds);
  if (s.mechanism == "t_threshold") return bilateral::t_threshold_price(ds, *s.threshold);
  if (s.mechanism == "price_55_28") return bilateral::price_55_28(ds, db);
  return bilateral::optimal_fixed_price(ds, db).price;
}

std::optional<double> bilateral_bound(const Scenario& s) {
  if (s.ratio_bound) return s.ratio_bound;
  if (s.mechanism == "median") return 2.0;
  if (s.mechanism == "price_55_28") return 55.0 / 28.0;
  return std::nullopt;
}

std::pair<DiscreteDist, DiscreteDist> corpus_pair(const Context& c, std::uint64_t k) {
  auto rng = trial_rng(c.seed, k);
  auto ds = corpus::random_discrete(rng, c.s.corpus.max_atoms, c.s.corpus.max_value,
                                    c.s.corpus.equal_probability);
  auto db = corpus::random_discrete(rng, c.s.corpus.max_atoms, c.s.corpus.max_value,
                                    c.s.corpus.equal_probability);
  return {std::move(ds), std::move(db)};
}

verify::TrialFn bilateral_trials(const Context& c) {
  const Scenario& s = c.s;
  if (s.corpus.pairs > 0) {
    // Each trial is a fresh random pair scored by its exact expectations.
    return [&s](std::uint64_t, std::mt19937_64& rng) {
      const auto ds = corpus::random_discrete(rng, s.corpus.max_atoms, s.corpus.max_value,
                                              s.corpus.equal_probability);
      const auto db = corpus::random_discrete(rng, s.corpus.max_atoms, s.corpus.max_value,
                                              s.corpus.equal_probability);
      const double price = bilateral_price(s, ds, db);
      TrialResult r;
      r.welfare = bilateral::expected_welfare(ds, db, price);
      r.opt = expected_max(ds, db);
      const double vs = sample(ds, unit_uniform(rng));
      const double vb = sample(db, unit_uniform(rng));
      const auto ledgers = verify::settle(bilateral::fixed_price(price, vs, vb), vs, vb);
      require(r, verify::check_ir(ledgers));
      require(r, verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Strong));
      return r;
    };
  }
  const double price = bilateral_price(s, *s.seller, *s.buyer);
  return [&s, price](std::uint64_t, std::mt19937_64& rng) {
    const double vs = sample(*s.seller, unit_uniform(rng));
    const double vb = sample(*s.buyer, unit_uniform(rng));
    const auto out = bilateral::fixed_price(price, vs, vb);
    const auto ledgers = verify::settle(out, vs, vb);
    TrialResult r;
    r.welfare = out.welfare;
    r.opt = std::max(vs, vb);
    r.revenue_balance = sum_of(verify::payments_of(ledgers));
    require(r, verify::check_ir(ledgers));
    require(r, verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Strong));
    return r;
  };
}

// ---- partnership ---------------------------------------------------------

std::vector<double> reduction_prices(const Scenario& s) {
  if (s.value_distributions.empty()) return {};
  partnership::BilateralPriceRule rule =
      s.price_rule == "median"
          ? partnership::BilateralPriceRule(
                [](const Distribution& ds, const Distribution&) { return bilateral::median_price(ds); })
          : partnership::BilateralPriceRule(bilateral::price_55_28);
  return partnership::reduction_prices(s.value_distributions, rule);
}

partnership::Instance draw_partnership(const Scenario& s, std::mt19937_64& rng) {
  if (s.partnership) return *s.partnership;
  if (!s.value_distributions.empty()) {
    partnership::Instance inst{{}, s.shares};
    for (const auto& d : s.value_distributions) inst.values.push_back(sample(d, unit_uniform(rng)));
    return inst;
  }
  return corpus::random_partnership(rng, s.random_agents, s.random_max_value);
}

std::size_t partnership_agents(const Scenario& s) {
  if (s.partnership) return s.partnership->size();
  if (!s.value_distributions.empty()) return s.value_distributions.size();
  return s.random_agents;
}

// Deterministic part of each partnership mechanism (the lottery returns the
// pivot outcome it randomizes).
partnership::ShareOutcome partnership_core(const Scenario& s, const std::vector<double>& prices,
                                           const partnership::Instance& inst) {
  const auto& m = s.mechanism;
  if (m == "no_trade") return partnership::no_trade(inst);
  if (m == "pivot" || m == "pivot_lottery") return partnership::pivot(inst);
  if (m == "single_seller") return partnership::single_seller(s.seller_index, *s.price, inst);
  if (m == "reduction") return partnership::reduction_mechanism(inst, prices);
  return verify::report_priced_single_seller(s.seller_index, inst);
}

verify::TrialFn partnership_trials(const Context& c) {
  const Scenario& s = c.s;
  if (s.seller_index >= partnership_agents(s))
    throw ConfigError("seller index " + std::to_string(s.seller_index) + " is out of range");
  auto prices = std::make_shared<std::vector<double>>(reduction_prices(s));
  return [&s, prices](std::uint64_t, std::mt19937_64& rng) {
    const auto inst = draw_partnership(s, rng);
    const auto core = partnership_core(s, *prices, inst);
    auto out = core;
    if (s.mechanism == "pivot_lottery")
      out = partnership::full_dissolve(core, partnership::pivot_pair(inst), unit_uniform(rng));
    TrialResult r;
    r.welfare = out.welfare(inst.values);
    r.opt = *std::max_element(inst.values.begin(), inst.values.end());
    r.revenue_balance = out.payment_sum();
    r.burned = std::max(0.0, r.revenue_balance);
    // The lottery is only IR and budget balanced in expectation; its
    // expectation is the pivot outcome.
    const auto ledgers = verify::settle(inst, core);
    require(r, verify::check_ir(ledgers));
    require(r, verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Strong));
    return r;
  };
}

// ---- combinatorial -------------------------------------------------------

struct Exchange {
  std::vector<double> medians;
  Bundle endowed = 0;
  Bundle all_items = 0;
};

Exchange exchange_of(const Scenario& s) {
  Exchange e;
  e.all_items = s.items == 0 ? 0 : (Bundle{1} << s.items) - 1;
  for (const auto& a : s.agents) {
    e.endowed |= a.endowment;
    e.medians.push_back(a.median ? *a.median
                                 : median(combinatorial::ValuationDist{a.types, a.probs}.value_of(
                                       a.endowment)));
  }
  return e;
}

std::vector<SetValuation> draw_valuations(const Scenario& s, std::mt19937_64& rng) {
  std::vector<SetValuation> out;
  for (const auto& a : s.agents) {
    const double coin = unit_uniform(rng);
    out.push_back(combinatorial::ValuationDist{a.types, a.probs}.sample(coin));
  }
  return out;
}

std::vector<Bundle> endowments_of(const Scenario& s) {
  std::vector<Bundle> e;
  for (const auto& a : s.agents) e.push_back(a.endowment);
  return e;
}

std::size_t max_endowment(const Scenario& s) {
  int t = 0;
  for (const auto& a : s.agents) t = std::max(t, combinatorial::bundle_size(a.endowment));
  return static_cast<std::size_t>(t);
}

// Revenue guarantee of the global-reserve auction on one outcome.
bool reserve_guarantee(const combinatorial::ItemOutcome& out, double opt, double reserve) {
  const std::size_t n = out.holdings.size();
  std::size_t winners = 0;
  for (Bundle b : out.holdings) winners += b != 0;
  if (opt >= combinatorial::harmonic(n) * reserve && winners == 0 && opt > 0.0) return false;
  if (winners == 0) return true;
  if (opt >= combinatorial::harmonic(n) * reserve && sum_of(out.payments) < reserve - 1e-9)
    return false;
  for (std::size_t i = 0; i < n; ++i)
    if (out.holdings[i] != 0 && out.payments[i] < reserve / static_cast<double>(winners) - 1e-9)
      return false;
  return true;
}

verify::TrialFn combinatorial_trials(const Context& c) {
  const Scenario& s = c.s;
  const auto ex = std::make_shared<Exchange>(exchange_of(s));
  const std::uint64_t budget = c.budget;
  if (s.mechanism == "global_reserve") {
    return [&s, ex, budget](std::uint64_t, std::mt19937_64& rng) {
      const auto vals = draw_valuations(s, rng);
      const auto out = combinatorial::global_reserve_auction(vals, ex->all_items, s.reserve, budget);
      TrialResult r;
      r.welfare = out.welfare(vals);
      r.opt = combinatorial::optimal_allocation(vals, ex->all_items, budget).welfare;
      r.revenue_balance = sum_of(out.payments);
      r.burned = out.burned;
      const auto ledgers = verify::settle(vals, {}, out);
      require(r, verify::check_ir(ledgers));
      require(r, verify::check_budget(out.payments, verify::BudgetMode::Weak));
      require(r, reserve_guarantee(out, r.opt, s.reserve), "reserve_revenue");
      return r;
    };
  }
  return [&s, ex, budget](std::uint64_t, std::mt19937_64& rng) {
    combinatorial::ExchangeInstance inst{s.items, draw_valuations(s, rng), endowments_of(s),
                                         ex->medians};
    std::vector<bool> is_seller(inst.agents());
    for (std::size_t i = 0; i < is_seller.size(); ++i) is_seller[i] = unit_uniform(rng) < 0.5;
    const auto res = combinatorial::combinatorial_median(inst, is_seller, budget);
    TrialResult r;
    r.welfare = res.outcome.welfare(inst.valuations);
    r.opt = combinatorial::optimal_allocation(inst.valuations, ex->endowed, budget).welfare;
    r.revenue_balance = sum_of(res.outcome.payments);
    r.burned = res.outcome.burned;
    const auto ledgers = verify::settle(inst.valuations, inst.endowments, res.outcome);
    require(r, verify::check_ir(ledgers));
    require(r, verify::check_budget(res.outcome.payments, verify::BudgetMode::Weak));
    for (std::size_t i = 0; i < inst.agents(); ++i)
      if (res.sold[i]) require(r, res.outcome.payments[i] == -inst.medians[i], "seller_payment");
    return r;
  };
}

// ---- arrow-debreu --------------------------------------------------------

arrow_debreu::Instance draw_market(const Scenario& s, std::mt19937_64& rng) {
  if (s.market) return *s.market;
  return corpus::random_market(rng, s.random_market.agents, s.random_market.max_pieces,
                               s.random_market.max_slope);
}

void require_ad(TrialResult& r, const arrow_debreu::Instance& inst,
                const arrow_debreu::MechanismTrace& tr) {
  const auto ledgers = verify::settle(inst, tr.outcome);
  require(r, verify::check_ir(ledgers));
  require(r, verify::check_budget(tr.outcome.payments, verify::BudgetMode::Weak));
  for (std::size_t i : tr.roles.buyers)
    require(r, tr.outcome.payments[i] >= tr.bought[i] * tr.price - 1e-9, "buyer_payment");
}

verify::TrialFn ad_trials(const Context& c) {
  const Scenario& s = c.s;
  return [&s](std::uint64_t, std::mt19937_64& rng) {
    const auto inst = draw_market(s, rng);
    const int coin = static_cast<int>(uniform_index(rng, 6));
    const auto tr = arrow_debreu::ad_mechanism(inst, {coin}, s.grid_steps);
    TrialResult r;
    r.welfare = tr.outcome.welfare(inst.valuations);
    r.opt = arrow_debreu::optimal_welfare(inst);
    r.revenue_balance = sum_of(tr.outcome.payments);
    r.burned = tr.outcome.burned;
    require_ad(r, inst, tr);
    return r;
  };
}

verify::TrialFn trials_for(const Context& c) {
  switch (c.s.setting) {
    case Setting::Bilateral: return bilateral_trials(c);
    case Setting::Partnership: return partnership_trials(c);
    case Setting::Combinatorial: return combinatorial_trials(c);
    case Setting::ArrowDebreu: return ad_trials(c);
  }
  return {};
}

// ---- report aggregation --------------------------------------------------

// Folds many reports of one property into one: counts add up, the first
// failure is kept, `measured` keeps the maximum.
struct Aggregate {
  PropertyReport report;
  explicit Aggregate(verify::Property p) { report.property = p; }
  void add(const PropertyReport& r) {
    report.checked += r.checked;
    if (r.measured && (!report.measured || *r.measured > *report.measured))
      report.measured = r.measured;
    if (!r.holds && report.holds) {
      report.holds = false;
      report.witness = r.witness;
    }
  }
};

CommandResult finish_verify(const std::string& name, std::vector<PropertyReport> reports) {
  CommandResult res;
  res.summary = fmt::format("scenario: {}\n", name);
  for (const auto& r : reports) {
    res.summary += "\n" + verify::format_report(r);
    if (!r.holds) res.exit_code = kExitPropertyFailure;
  }
  res.summary += fmt::format("\nresult: {}\n", res.exit_code == kExitPass ? "pass" : "fail");
  return res;
}

std::vector<double> default_report_grid(std::span<const double> values) {
  std::vector<double> g{0.0};
  double top = 0.0;
  for (double v : values) {
    g.push_back(v);
    g.push_back(v + 0.5);
    if (v >= 0.5) g.push_back(v - 0.5);
    top = std::max(top, v);
  }
  g.push_back(top + 1.0);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<double> atom_values(const DiscreteDist& d) {
  std::vector<double> v;
  for (const auto& a : d.atoms()) v.push_back(a.value);
  return v;
}

CommandResult verify_bilateral(const Context& c) {
  const Scenario& s = c.s;
  std::vector<std::pair<Distribution, Distribution>> pairs;
  if (s.corpus.pairs > 0) {
    for (std::uint64_t k = 0; k < s.corpus.pairs; ++k) {
      auto [ds, db] = corpus_pair(c, k);
      pairs.emplace_back(std::move(ds), std::move(db));
    }
  } else {
    pairs.emplace_back(*s.seller, *s.buyer);
  }
  const auto bound = bilateral_bound(s);
  Aggregate ir(verify::Property::IR), bb(verify::Property::StrongBB),
      truthful(verify::Property::Truthful), ratio(verify::Property::Ratio);
  for (const auto& [ds, db] : pairs) {
    const double price = bilateral_price(s, ds, db);
    ratio.add(verify::exact_ratio_bilateral(ds, db, price, bound.value_or(kInf)));
    // Realizations: the atoms themselves (exponentials on a 16-atom grid).
    const auto sa = atom_values(discretize(ds, 16));
    const auto ba = atom_values(discretize(db, 16));
    std::vector<double> grid = sa;
    grid.insert(grid.end(), ba.begin(), ba.end());
    grid.push_back(price);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (double vs : sa) {
      for (double vb : ba) {
        const auto ledgers = verify::settle(bilateral::fixed_price(price, vs, vb), vs, vb);
        ir.add(verify::check_ir(ledgers));
        bb.add(verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Strong));
        truthful.add(verify::check_truthful(verify::fixed_price_problem(price, vs, vb, grid),
                                            c.budget));
      }
    }
  }
  return finish_verify(s.name, {ir.report, bb.report, truthful.report, ratio.report});
}

verify::TruthfulnessProblem partnership_problem(const Scenario& s, const std::vector<double>& prices,
                                                const partnership::Instance& inst) {
  auto grid = s.report_grid.empty() ? default_report_grid(inst.values) : s.report_grid;
  const auto& m = s.mechanism;
  if (m == "pivot") return verify::pivot_problem(inst, grid);
  if (m == "pivot_lottery") return verify::pivot_lottery_problem(inst, grid);
  if (m == "single_seller") return verify::single_seller_problem(s.seller_index, *s.price, inst, grid);
  if (m == "reduction") return verify::reduction_problem(inst, prices, grid);
  if (m == "report_priced_single_seller")
    return verify::report_priced_problem(s.seller_index, inst, grid);
  // no_trade: nothing depends on reports.
  return verify::single_seller_problem(0, kInf, inst, grid);
}

CommandResult verify_partnership(const Context& c) {
  const Scenario& s = c.s;
  if (s.seller_index >= partnership_agents(s))
    throw ConfigError("seller index " + std::to_string(s.seller_index) + " is out of range");
  const auto prices = reduction_prices(s);
  const std::size_t count = s.partnership ? 1 : std::min<std::size_t>(s.trials, 200);
  Aggregate ir(verify::Property::IR), bb(verify::Property::StrongBB),
      truthful(verify::Property::Truthful);
  for (std::size_t k = 0; k < count; ++k) {
    auto rng = trial_rng(c.seed, k);
    const auto inst = draw_partnership(s, rng);
    const auto out = partnership_core(s, prices, inst);
    const auto ledgers = verify::settle(inst, out);
    ir.add(verify::check_ir(ledgers));
    bb.add(verify::check_budget(verify::payments_of(ledgers), verify::BudgetMode::Strong));
    truthful.add(verify::check_truthful(partnership_problem(s, prices, inst), c.budget, c.jobs));
  }
  return finish_verify(s.name, {ir.report, bb.report, truthful.report});
}

CommandResult verify_combinatorial(const Context& c) {
  const Scenario& s = c.s;
  const Exchange ex = exchange_of(s);
  const auto endowments = endowments_of(s);

  // Every type profile, in lexicographic order.
  std::uint64_t profiles = 1;
  for (const auto& a : s.agents) profiles *= a.types.size();
  if (profiles > 4096) throw ConfigError("too many type profiles to enumerate (" +
                                         std::to_string(profiles) + " > 4096)");
  std::vector<SetValuation> grid = s.valuation_grid;
  if (grid.empty())
    for (const auto& a : s.agents)
      for (const auto& t : a.types)
        if (std::find(grid.begin(), grid.end(), t) == grid.end()) grid.push_back(t);

  Aggregate ir(verify::Property::IR), bb(verify::Property::WeakBB),
      truthful(verify::Property::Truthful);
  for (std::uint64_t p = 0; p < profiles; ++p) {
    std::vector<SetValuation> vals;
    std::uint64_t rest = p;
    for (const auto& a : s.agents) {
      vals.push_back(a.types[rest % a.types.size()]);
      rest /= a.types.size();
    }
    if (s.mechanism == "global_reserve") {
      const auto out = combinatorial::global_reserve_auction(vals, ex.all_items, s.reserve, c.budget);
      ir.add(verify::check_ir(verify::settle(vals, {}, out)));
      bb.add(verify::check_budget(out.payments, verify::BudgetMode::Weak));
      truthful.add(verify::check_truthful(
          verify::global_reserve_problem(vals, ex.all_items, s.reserve, grid, c.budget), c.budget,
          c.jobs));
      continue;
    }
    combinatorial::ExchangeInstance inst{s.items, vals, endowments, ex.medians};
    const std::size_t n = inst.agents();
    for (std::uint64_t coin = 0; coin < (std::uint64_t{1} << n); ++coin) {
      std::vector<bool> is_seller(n);
      for (std::size_t i = 0; i < n; ++i) is_seller[i] = (coin >> i) & 1U;
      const auto res = combinatorial::combinatorial_median(inst, is_seller, c.budget);
      ir.add(verify::check_ir(verify::settle(vals, endowments, res.outcome)));
      bb.add(verify::check_budget(res.outcome.payments, verify::BudgetMode::Weak));
    }
    truthful.add(verify::check_truthful(verify::combinatorial_median_problem(inst, grid, c.budget),
                                        c.budget, c.jobs));
  }
  std::vector<PropertyReport> reports{ir.report, bb.report, truthful.report};
  if (s.mechanism == "combinatorial_median" || s.ratio_bound) {
    const double bound = s.ratio_bound.value_or(8.0 * combinatorial::harmonic(max_endowment(s)));
    reports.push_back(
        verify::estimate_ratio(combinatorial_trials(c), s.trials, c.seed, bound, c.jobs).report);
  }
  return finish_verify(s.name, reports);
}

CommandResult verify_ad(const Context& c) {
  const Scenario& s = c.s;
  const std::size_t count = s.market ? 1 : std::min<std::size_t>(s.trials, 100);
  std::vector<double> qgrid = s.quantity_grid;
  if (qgrid.empty()) qgrid = {0.0, 1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 3};
  std::vector<arrow_debreu::ConcaveFn> vgrid = s.concave_grid;
  if (vgrid.empty())
    for (double slope : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) vgrid.push_back(arrow_debreu::ConcaveFn::linear(slope));

  Aggregate ir(verify::Property::IR), bb(verify::Property::WeakBB),
      truthful(verify::Property::Truthful), ratio(verify::Property::Ratio);
  const double bound = s.ratio_bound.value_or(48.0);
  for (std::size_t k = 0; k < count; ++k) {
    auto rng = trial_rng(c.seed, k);
    const auto inst = draw_market(s, rng);
    double total = 0.0;
    for (int coin = 0; coin < 6; ++coin) {
      const auto tr = arrow_debreu::ad_mechanism(inst, {coin}, s.grid_steps);
      ir.add(verify::check_ir(verify::settle(inst, tr.outcome)));
      bb.add(verify::check_budget(tr.outcome.payments, verify::BudgetMode::Weak));
      total += tr.outcome.welfare(inst.valuations);
    }
    PropertyReport r{.property = verify::Property::Ratio};
    r.checked = 6;
    r.measured = ratio_of(arrow_debreu::optimal_welfare(inst), total / 6.0);
    r.holds = *r.measured <= bound + verify::kTolerance;
    if (!r.holds) r.witness = verify::Witness{.instance = fmt::format("instance {}", k)};
    ratio.add(r);
    truthful.add(verify::check_truthful(verify::ad_problem(inst, qgrid, vgrid, s.grid_steps),
                                        c.budget, c.jobs));
  }
  return finish_verify(s.name, {ir.report, bb.report, truthful.report, ratio.report});
}

// ---- output --------------------------------------------------------------

std::string csv_number(double x) { return fmt::format("{}", x); }

std::string summary_line(std::string_view key, double x) {
  return fmt::format("{}: {}\n", key, x);
}

std::string extra_summary(const Context& c, const verify::RatioRun& rr) {
  const Scenario& s = c.s;
  std::string out;
  if (s.setting == Setting::Bilateral && s.corpus.pairs == 0) {
    const double price = bilateral_price(s, *s.seller, *s.buyer);
    const double w = bilateral::expected_welfare(*s.seller, *s.buyer, price);
    const double opt = expected_max(*s.seller, *s.buyer);
    out += summary_line("price", price);
    out += summary_line("expected_welfare", w);
    out += summary_line("expected_max", opt);
    out += summary_line("exact_ratio", ratio_of(opt, w));
  }
  if (rr.mean_opt > 0.0) out += summary_line("welfare_fraction", rr.mean_welfare / rr.mean_opt);
  return out;
}

}  // namespace

CommandResult run(const Scenario& scenario, const RunOptions& opt) {
  const Context c = make_context(scenario, opt);
  const auto rr = verify::estimate_ratio(trials_for(c), c.s.trials, c.seed,
                                         c.s.ratio_bound.value_or(kInf), c.jobs);
  CommandResult res;
  res.csv = "# csv_version: 1\n";
  res.csv += kRunHeader;
  double revenue = 0.0, burned = 0.0;
  for (std::size_t t = 0; t < rr.trials.size(); ++t) {
    const auto& r = rr.trials[t];
    revenue += r.revenue_balance;
    burned += r.burned;
    res.csv += fmt::format("{},{},{},{},{},{},,{}\n", t, csv_number(r.welfare), csv_number(r.opt),
                           csv_number(ratio_of(r.opt, r.welfare)), csv_number(r.revenue_balance),
                           csv_number(r.burned), r.properties_hold ? "pass" : "fail");
  }
  const double n = static_cast<double>(rr.trials.size());
  const char* verdict = rr.report.holds ? "pass" : "fail";
  res.csv += fmt::format("summary,{},{},{},{},{},{},{}\n", csv_number(rr.mean_welfare),
                         csv_number(rr.mean_opt), csv_number(*rr.report.measured),
                         csv_number(revenue / n), csv_number(burned / n),
                         csv_number(*rr.report.ci_half_width), verdict);

  res.summary = fmt::format("scenario: {}\nmechanism: {}\nseed: {}\ntrials: {}\n", c.s.name,
                            c.s.mechanism, c.seed, c.s.trials);
  res.summary += summary_line("mean_welfare", rr.mean_welfare);
  res.summary += summary_line("mean_opt", rr.mean_opt);
  res.summary += fmt::format("ratio: {} +- {}\n", *rr.report.measured, *rr.report.ci_half_width);
  res.summary += extra_summary(c, rr);
  res.summary += fmt::format("properties: {}\n", verdict);
  if (rr.report.witness) res.summary += verify::format_report(rr.report);
  res.exit_code = rr.report.holds ? kExitPass : kExitPropertyFailure;
  return res;
}

CommandResult verify(const Scenario& scenario, const RunOptions& opt) {
  const Context c = make_context(scenario, opt);
  switch (c.s.setting) {
    case Setting::Bilateral: return verify_bilateral(c);
    case Setting::Partnership: return verify_partnership(c);
    case Setting::Combinatorial: return verify_combinatorial(c);
    case Setting::ArrowDebreu: return verify_ad(c);
  }
  return {};
}

CommandResult sweep(const Scenario& scenario, const RunOptions& opt) {
  if (!scenario.sweep) throw ConfigError("sweep needs a 'sweep' section");
  const SweepSpec& spec = *scenario.sweep;
  if (spec.values.empty()) throw ConfigError("sweep grid is empty");

  // Which scenario field each parameter drives, per setting.
  std::function<void(Scenario&, double)> apply;
  const Setting setting = scenario.setting;
  if (spec.parameter == "price" &&
      (setting == Setting::Bilateral || setting == Setting::Partnership)) {
    apply = [](Scenario& s, double x) { s.price = x; };
  } else if (spec.parameter == "t" && setting == Setting::Bilateral) {
    apply = [](Scenario& s, double x) { s.threshold = x; };
  } else if (spec.parameter == "reserve" && setting == Setting::Combinatorial) {
    apply = [](Scenario& s, double x) { s.reserve = x; };
  } else if (spec.parameter == "grid_steps" && setting == Setting::ArrowDebreu) {
    apply = [](Scenario& s, double x) { s.grid_steps = static_cast<int>(x); };
  } else {
    throw ConfigError("parameter '" + spec.parameter + "' cannot be swept in this setting");
  }

  CommandResult res;
  res.csv = "# csv_version: 1\n";
  res.csv += kSweepHeader;
  res.summary = fmt::format("scenario: {}\nsweep: {}\n", scenario.name, spec.parameter);
  double best_value = 0.0, best_welfare = -kInf;
  for (double x : spec.values) {
    Scenario s = scenario;
    apply(s, x);
    if (setting == Setting::Bilateral && s.corpus.pairs == 0) {
      // Exact expectations: no sampling noise along the curve.
      const Context c = make_context(s, opt);
      const double price = bilateral_price(c.s, *s.seller, *s.buyer);
      const double w = bilateral::expected_welfare(*s.seller, *s.buyer, price);
      const double o = expected_max(*s.seller, *s.buyer);
      res.csv += fmt::format("{},{},0,{},{},{},0,0,0,pass\n", spec.parameter, csv_number(x),
                             csv_number(w), csv_number(o), csv_number(ratio_of(o, w)));
      if (w > best_welfare) {
        best_welfare = w;
        best_value = x;
      }
      continue;
    }
    if (setting == Setting::ArrowDebreu && s.grid_steps < 8)
      throw ConfigError("grid_steps must be at least 8");
    const Context c = make_context(s, opt);
    const auto rr = verify::estimate_ratio(trials_for(c), s.trials, c.seed,
                                           s.ratio_bound.value_or(kInf), c.jobs);
    double revenue = 0.0, burned = 0.0;
    for (const auto& r : rr.trials) {
      revenue += r.revenue_balance;
      burned += r.burned;
    }
    const double n = static_cast<double>(rr.trials.size());
    res.csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", spec.parameter, csv_number(x),
                           s.trials, csv_number(rr.mean_welfare), csv_number(rr.mean_opt),
                           csv_number(*rr.report.measured), csv_number(*rr.report.ci_half_width),
                           csv_number(revenue / n), csv_number(burned / n),
                           rr.report.holds ? "pass" : "fail");
    if (!rr.report.holds) res.exit_code = kExitPropertyFailure;
    if (rr.mean_welfare > best_welfare) {
      best_welfare = rr.mean_welfare;
      best_value = x;
    }
  }
  res.summary += fmt::format("points: {}\nbest_{}: {}\nbest_welfare: {}\nproperties: {}\n",
                             spec.values.size(), spec.parameter, best_value, best_welfare,
                             res.exit_code == kExitPass ? "pass" : "fail");
  return res;
}

CommandResult execute(const std::string& command, const std::string& config_path,
                      const RunOptions& opt, std::string& error) {
  CommandResult res;
  try {
    const Scenario s = load_scenario(config_path);
    if (command == "run") return run(s, opt);
    if (command == "verify") return verify(s, opt);
    if (command == "sweep") return sweep(s, opt);
    error = "unknown command '" + command + "'";
    res.exit_code = kExitConfigError;
  } catch (const ConfigError& e) {
    error = "config error: " + std::string(e.what());
    res.exit_code = kExitConfigError;
  } catch (const BudgetExceeded& e) {
    error = "oracle budget exceeded: " + std::string(e.what());
    res.exit_code = kExitBudgetExceeded;
  } catch (const std::invalid_argument& e) {
    error = "invalid scenario: " + std::string(e.what());
    res.exit_code = kExitConfigError;
  }
  return res;
}

}  // namespace reallocation::cli
