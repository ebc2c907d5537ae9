#include "reallocation/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reallocation/detail/compensated_sum.hpp"
#include "reallocation/detail/parallel.hpp"
#include "reallocation/random.hpp"

namespace reallocation::verify {

using detail::CompensatedSum;

std::string_view to_string(Property p) {
  switch (p) {
    case Property::IR: return "IR";
    case Property::StrongBB: return "strongBB";
    case Property::WeakBB: return "weakBB";
    case Property::Truthful: return "truthful";
    case Property::Ratio: return "ratio";
  }
  return "unknown";
}

std::string format_report(const PropertyReport& r) {
  std::string out = fmt::format("property: {}\nholds: {}\nchecked: {}\n", to_string(r.property),
                                r.holds, r.checked);
  if (r.measured) out += fmt::format("measured: {}\n", *r.measured);
  if (r.ci_half_width) out += fmt::format("ci_half_width: {}\n", *r.ci_half_width);
  if (r.witness) {
    const Witness& w = *r.witness;
    out += "witness:\n";
    if (!w.instance.empty()) out += fmt::format("  instance: {}\n", w.instance);
    if (w.agent) out += fmt::format("  agent: {}\n", *w.agent);
    if (!w.coin.empty()) out += fmt::format("  coin: {}\n", w.coin);
    if (!w.misreport.empty()) out += fmt::format("  misreport: {}\n", w.misreport);
    for (const auto& [label, value] : w.values) out += fmt::format("  {}: {}\n", label, value);
  }
  return out;
}

// ---- settlement ----------------------------------------------------------

std::vector<AgentLedger> settle(const bilateral::Outcome& out, double seller_value,
                                double buyer_value) {
  return {
      {out.traded ? 0.0 : seller_value, -out.seller_payment_received, seller_value},
      {out.traded ? buyer_value : 0.0, out.buyer_payment_made, 0.0},
  };
}

std::vector<AgentLedger> settle(const partnership::Instance& inst,
                                const partnership::ShareOutcome& out) {
  std::vector<AgentLedger> ledgers;
  for (std::size_t i = 0; i < inst.size(); ++i)
    ledgers.push_back({inst.values[i] * out.holdings[i], out.payments[i],
                       inst.values[i] * inst.shares[i]});
  return ledgers;
}

std::vector<AgentLedger> settle(std::span<const combinatorial::SetValuation> valuations,
                                std::span<const combinatorial::Bundle> endowments,
                                const combinatorial::ItemOutcome& out) {
  std::vector<AgentLedger> ledgers;
  for (std::size_t i = 0; i < valuations.size(); ++i) {
    const double endowed = endowments.empty() ? 0.0 : valuations[i](endowments[i]);
    ledgers.push_back({valuations[i](out.holdings[i]), out.payments[i], endowed});
  }
  return ledgers;
}

std::vector<AgentLedger> settle(const arrow_debreu::Instance& inst,
                                const arrow_debreu::FractionOutcome& out) {
  std::vector<AgentLedger> ledgers;
  for (std::size_t i = 0; i < inst.agents(); ++i)
    ledgers.push_back({inst.valuations[i](out.holdings[i]), out.payments[i],
                       inst.valuations[i](inst.endowments[i])});
  return ledgers;
}

std::vector<double> payments_of(std::span<const AgentLedger> ledgers) {
  std::vector<double> out;
  for (const auto& l : ledgers) out.push_back(l.payment);
  return out;
}

// ---- ex-post checks ------------------------------------------------------

PropertyReport check_ir(std::span<const AgentLedger> agents, std::string_view instance) {
  PropertyReport r{.property = Property::IR};
  for (std::size_t i = 0; i < agents.size(); ++i) {
    ++r.checked;
    const double utility = agents[i].final_value - agents[i].payment;
    if (utility < agents[i].endowment_value - kTolerance) {
      r.holds = false;
      r.witness = Witness{.instance = std::string(instance),
                          .agent = i,
                          .values = {{"utility", utility},
                                     {"endowment_value", agents[i].endowment_value},
                                     {"payment", agents[i].payment}}};
      break;
    }
  }
  return r;
}

PropertyReport check_budget(std::span<const double> payments, BudgetMode mode,
                            std::string_view instance) {
  CompensatedSum s;
  for (double p : payments) s += p;
  const double total = s.value();
  PropertyReport r{.property = mode == BudgetMode::Strong ? Property::StrongBB : Property::WeakBB};
  r.checked = 1;
  r.measured = total;
  r.holds = mode == BudgetMode::Strong ? std::abs(total) <= kTolerance : total >= -kTolerance;
  if (!r.holds)
    r.witness = Witness{.instance = std::string(instance), .values = {{"payment_sum", total}}};
  return r;
}

// ---- truthfulness --------------------------------------------------------

std::uint64_t TruthfulnessProblem::evaluations() const {
  std::uint64_t per_coin = 0;
  for (std::size_t g : grid_sizes) per_coin += g + 1;
  if (per_coin != 0 && coins > std::numeric_limits<std::uint64_t>::max() / per_coin)
    return std::numeric_limits<std::uint64_t>::max();
  return coins * per_coin;
}

PropertyReport check_truthful(const TruthfulnessProblem& problem, std::uint64_t budget,
                              unsigned jobs) {
  if (problem.grid_sizes.size() != problem.agents)
    throw std::invalid_argument("check_truthful: need one grid size per agent");
  const std::uint64_t runs = problem.evaluations();
  if (runs > budget) throw BudgetExceeded("check_truthful", runs, budget);

  std::vector<std::optional<Witness>> found(problem.coins);
  detail::parallel_for(problem.coins, jobs, [&](std::size_t coin) {
    for (std::size_t i = 0; i < problem.agents; ++i) {
      const double truth = problem.utility(coin, i, std::nullopt);
      for (std::size_t k = 0; k < problem.grid_sizes[i]; ++k) {
        const double lie = problem.utility(coin, i, k);
        if (lie > truth + kTolerance) {
          found[coin] = Witness{
              .instance = problem.instance,
              .agent = i,
              .coin = problem.describe_coin ? problem.describe_coin(coin) : std::to_string(coin),
              .misreport = problem.describe_report ? problem.describe_report(i, k)
                                                   : std::to_string(k),
              .values = {{"truthful_utility", truth}, {"misreport_utility", lie}}};
          return;
        }
      }
    }
  });

  PropertyReport r{.property = Property::Truthful};
  r.checked = runs;
  for (auto& w : found) {
    if (w) {
      r.holds = false;
      r.witness = std::move(w);
      break;
    }
  }
  return r;
}

namespace {

std::string describe_partnership(const partnership::Instance& inst) {
  return fmt::format("values=({}) shares=({})", fmt::join(inst.values, ", "),
                     fmt::join(inst.shares, ", "));
}

std::string describe_table(const combinatorial::SetValuation& v) {
  return fmt::format("table=({})", fmt::join(v.table(), ", "));
}

// Builds a partnership problem from `run(reported instance, coin)`, which
// returns the outcome; utilities are evaluated at the true values.
TruthfulnessProblem partnership_problem(
    const partnership::Instance& inst, std::vector<double> grid, std::size_t coins,
    std::function<partnership::ShareOutcome(const partnership::Instance&, std::size_t)> run) {
  inst.validate();
  TruthfulnessProblem p;
  p.instance = describe_partnership(inst);
  p.agents = inst.size();
  p.coins = coins;
  p.grid_sizes.assign(inst.size(), grid.size());
  p.utility = [inst, grid, run](std::size_t coin, std::size_t i, std::optional<std::size_t> k) {
    partnership::Instance reported = inst;
    if (k) reported.values[i] = grid[*k];
    const auto out = run(reported, coin);
    return inst.values[i] * out.holdings[i] - out.payments[i];
  };
  p.describe_report = [grid](std::size_t, std::size_t k) { return fmt::format("value={}", grid[k]); };
  return p;
}

}  // namespace

TruthfulnessProblem fixed_price_problem(double price, double seller_value, double buyer_value,
                                        std::vector<double> report_grid) {
  TruthfulnessProblem p;
  p.instance = fmt::format("price={} seller_value={} buyer_value={}", price, seller_value,
                           buyer_value);
  p.agents = 2;
  p.grid_sizes = {report_grid.size(), report_grid.size()};
  p.utility = [=](std::size_t, std::size_t i, std::optional<std::size_t> k) {
    const double vs = (i == 0 && k) ? report_grid[*k] : seller_value;
    const double vb = (i == 1 && k) ? report_grid[*k] : buyer_value;
    const auto ledgers = settle(bilateral::fixed_price(price, vs, vb), seller_value, buyer_value);
    return ledgers[i].final_value - ledgers[i].payment;
  };
  p.describe_report = [report_grid](std::size_t, std::size_t k) {
    return fmt::format("value={}", report_grid[k]);
  };
  return p;
}

TruthfulnessProblem pivot_problem(const partnership::Instance& inst,
                                  std::vector<double> report_grid) {
  return partnership_problem(inst, std::move(report_grid), 1,
                             [](const partnership::Instance& rep, std::size_t) {
                               return partnership::pivot(rep);
                             });
}

TruthfulnessProblem single_seller_problem(std::size_t seller, double price,
                                          const partnership::Instance& inst,
                                          std::vector<double> report_grid) {
  return partnership_problem(inst, std::move(report_grid), 1,
                             [seller, price](const partnership::Instance& rep, std::size_t) {
                               return partnership::single_seller(seller, price, rep);
                             });
}

TruthfulnessProblem reduction_problem(const partnership::Instance& inst,
                                      std::vector<double> seller_prices,
                                      std::vector<double> report_grid) {
  return partnership_problem(inst, std::move(report_grid), 1,
                             [prices = std::move(seller_prices)](
                                 const partnership::Instance& rep, std::size_t) {
                               return partnership::reduction_mechanism(rep, prices);
                             });
}

TruthfulnessProblem pivot_lottery_problem(const partnership::Instance& inst,
                                          std::vector<double> report_grid) {
  inst.validate();
  TruthfulnessProblem p;
  p.instance = describe_partnership(inst);
  p.agents = inst.size();
  p.grid_sizes.assign(inst.size(), report_grid.size());
  p.utility = [inst, report_grid](std::size_t, std::size_t i, std::optional<std::size_t> k) {
    partnership::Instance rep = inst;
    if (k) rep.values[i] = report_grid[*k];
    const auto partial = partnership::pivot(rep);
    const auto pair = partnership::pivot_pair(rep);
    const double xa = partial.holdings[pair.first];
    const double xb = partial.holdings[pair.second];
    if (xa + xb <= 0.0) return inst.values[i] * partial.holdings[i] - partial.payments[i];
    const double ta = xa / (xa + xb);
    // coin < ta selects the first agent; both branches weighted exactly.
    double expected = 0.0;
    if (ta > 0.0) {
      const auto a = partnership::full_dissolve(partial, pair, 0.0);
      expected += ta * (inst.values[i] * a.holdings[i] - a.payments[i]);
    }
    if (ta < 1.0) {
      const auto b = partnership::full_dissolve(partial, pair, std::nextafter(1.0, 0.0));
      expected += (1.0 - ta) * (inst.values[i] * b.holdings[i] - b.payments[i]);
    }
    return expected;
  };
  p.describe_report = [report_grid](std::size_t, std::size_t k) {
    return fmt::format("value={}", report_grid[k]);
  };
  return p;
}

TruthfulnessProblem global_reserve_problem(std::vector<combinatorial::SetValuation> valuations,
                                           combinatorial::Bundle items, double reserve,
                                           std::vector<combinatorial::SetValuation> report_grid,
                                           std::uint64_t budget) {
  TruthfulnessProblem p;
  p.instance = fmt::format("items={:#b} reserve={}", items, reserve);
  for (const auto& v : valuations) p.instance += " " + describe_table(v);
  p.agents = valuations.size();
  p.grid_sizes.assign(valuations.size(), report_grid.size());
  p.utility = [=](std::size_t, std::size_t i, std::optional<std::size_t> k) {
    auto reported = valuations;
    if (k) reported[i] = report_grid[*k];
    const auto out = combinatorial::global_reserve_auction(reported, items, reserve, budget);
    return valuations[i](out.holdings[i]) - out.payments[i];
  };
  p.describe_report = [report_grid](std::size_t, std::size_t k) {
    return describe_table(report_grid[k]);
  };
  return p;
}

TruthfulnessProblem combinatorial_median_problem(
    combinatorial::ExchangeInstance inst, std::vector<combinatorial::SetValuation> report_grid,
    std::uint64_t budget) {
  inst.validate();
  const std::size_t n = inst.agents();
  if (n >= 63) throw std::invalid_argument("too many agents to enumerate group coins");
  TruthfulnessProblem p;
  p.instance = fmt::format("items={} endowments=({}) medians=({})", inst.items,
                           fmt::join(inst.endowments, ", "), fmt::join(inst.medians, ", "));
  p.agents = n;
  p.coins = std::size_t{1} << n;
  p.grid_sizes.assign(n, report_grid.size());
  p.utility = [=](std::size_t coin, std::size_t i, std::optional<std::size_t> k) {
    auto reported = inst;
    if (k) reported.valuations[i] = report_grid[*k];
    std::vector<bool> is_seller(n);
    for (std::size_t a = 0; a < n; ++a) is_seller[a] = (coin >> a) & 1U;
    const auto res = combinatorial::combinatorial_median(reported, is_seller, budget);
    return inst.valuations[i](res.outcome.holdings[i]) - res.outcome.payments[i];
  };
  p.describe_report = [report_grid](std::size_t, std::size_t k) {
    return describe_table(report_grid[k]);
  };
  p.describe_coin = [n](std::size_t coin) {
    std::string s = "sellers={";
    bool first = true;
    for (std::size_t a = 0; a < n; ++a) {
      if (!((coin >> a) & 1U)) continue;
      s += (first ? "" : ",") + std::to_string(a);
      first = false;
    }
    return s + "}";
  };
  return p;
}

TruthfulnessProblem ad_problem(arrow_debreu::Instance inst, std::vector<double> quantity_grid,
                               std::vector<arrow_debreu::ConcaveFn> valuation_grid,
                               int grid_steps) {
  inst.validate();
  TruthfulnessProblem p;
  p.instance = fmt::format("endowments=({})", fmt::join(inst.endowments, ", "));
  p.agents = inst.agents();
  p.coins = 6;
  const std::size_t q = quantity_grid.size();
  p.grid_sizes.assign(inst.agents(), q + valuation_grid.size());
  p.utility = [=](std::size_t coin, std::size_t i, std::optional<std::size_t> k) {
    arrow_debreu::Instance reported = inst;
    arrow_debreu::SupplyReports dev;
    if (k && *k < q) {
      dev.agents = {i};
      dev.quantities = {quantity_grid[*k]};
    } else if (k) {
      reported.valuations[i] = valuation_grid[*k - q];
    }
    const auto tr = arrow_debreu::ad_mechanism(reported, {static_cast<int>(coin)}, grid_steps,
                                               dev.agents.empty() ? nullptr : &dev);
    return inst.valuations[i](tr.outcome.holdings[i]) - tr.outcome.payments[i];
  };
  p.describe_report = [quantity_grid, q](std::size_t, std::size_t k) {
    if (k < q) return fmt::format("supply={}", quantity_grid[k]);
    return fmt::format("valuation#{}", k - q);
  };
  p.describe_coin = [](std::size_t coin) { return fmt::format("permutation={}", coin); };
  return p;
}

partnership::ShareOutcome report_priced_single_seller(std::size_t seller,
                                                      const partnership::Instance& reported) {
  return partnership::single_seller(seller, reported.values.at(seller), reported);
}

TruthfulnessProblem report_priced_problem(std::size_t seller, const partnership::Instance& inst,
                                          std::vector<double> report_grid) {
  return partnership_problem(inst, std::move(report_grid), 1,
                             [seller](const partnership::Instance& rep, std::size_t) {
                               return report_priced_single_seller(seller, rep);
                             });
}

// ---- approximation ratio -------------------------------------------------

RatioRun estimate_ratio(const TrialFn& trial, std::size_t trials, std::uint64_t seed, double bound,
                        unsigned jobs) {
  if (trials == 0) throw std::invalid_argument("estimate_ratio needs at least one trial");
  RatioRun run;
  run.trials.resize(trials);
  detail::parallel_for(trials, jobs, [&](std::size_t t) {
    auto rng = trial_rng(seed, t);
    run.trials[t] = trial(t, rng);
  });

  // Sequential reductions keep the result independent of `jobs`.
  CompensatedSum sw, so;
  for (const auto& r : run.trials) {
    sw += r.welfare;
    so += r.opt;
  }
  const double n = static_cast<double>(trials);
  run.mean_welfare = sw.value() / n;
  run.mean_opt = so.value() / n;

  PropertyReport& rep = run.report;
  rep.property = Property::Ratio;
  rep.checked = trials;
  if (run.mean_welfare <= 0.0) {
    rep.measured = run.mean_opt <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    rep.ci_half_width = 0.0;
  } else {
    const double ratio = run.mean_opt / run.mean_welfare;
    // Delta method for a ratio of means.
    CompensatedSum soo, sww, sow;
    for (const auto& r : run.trials) {
      const double dO = r.opt - run.mean_opt;
      const double dW = r.welfare - run.mean_welfare;
      soo += dO * dO;
      sww += dW * dW;
      sow += dO * dW;
    }
    const double denom = trials > 1 ? n - 1.0 : 1.0;
    const double var = (soo.value() - 2.0 * ratio * sow.value() + ratio * ratio * sww.value()) /
                       denom / (run.mean_welfare * run.mean_welfare) / n;
    rep.measured = ratio;
    rep.ci_half_width = 1.96 * std::sqrt(std::max(var, 0.0));
  }
  rep.holds = *rep.measured <= bound + *rep.ci_half_width;
  if (!rep.holds)
    rep.witness = Witness{.values = {{"ratio", *rep.measured}, {"bound", bound}}};
  for (std::size_t t = 0; t < trials && rep.holds; ++t) {
    if (run.trials[t].properties_hold) continue;
    rep.holds = false;
    rep.witness = Witness{.instance = fmt::format("trial {}", t),
                          .misreport = run.trials[t].failure,
                          .values = {{"welfare", run.trials[t].welfare}}};
  }
  return run;
}

PropertyReport exact_ratio_bilateral(const Distribution& ds, const Distribution& db, double price,
                                     double bound) {
  const double opt = expected_max(ds, db);
  const double alg = bilateral::expected_welfare(ds, db, price);
  PropertyReport r{.property = Property::Ratio};
  r.checked = 1;
  if (alg <= 0.0)
    r.measured = opt <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  else
    r.measured = opt / alg;
  r.holds = *r.measured <= bound + kTolerance;
  if (!r.holds)
    r.witness = Witness{.instance = fmt::format("price={}", price),
                        .values = {{"expected_max", opt}, {"expected_welfare", alg}}};
  return r;
}

}  // namespace reallocation::verify
