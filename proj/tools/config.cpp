// YAML scenario loader. See docs/config.md for the accepted grammar.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "scenario.hpp"

namespace reallocation::cli {

ConfigError::ConfigError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ": " + what
                                  : what),
      line_(line),
      column_(column) {}

namespace {

using combinatorial::Bundle;
using combinatorial::SetValuation;

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) throw ConfigError(what);
  throw ConfigError(what, m.line + 1, m.column + 1);
}

template <class T>
T as(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail(node, what + " must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, "cannot read " + what);
  }
}

double as_real(const YAML::Node& node, const std::string& what) { return as<double>(node, what); }

double as_nonnegative(const YAML::Node& node, const std::string& what) {
  const double x = as_real(node, what);
  if (!(x >= 0.0)) fail(node, what + " must be non-negative");
  return x;
}

std::uint64_t as_count(const YAML::Node& node, const std::string& what) {
  const auto text = as<std::string>(node, what);
  if (text.empty() || text.front() == '-') fail(node, what + " must be a non-negative integer");
  return as<std::uint64_t>(node, what);
}

void require_map(const YAML::Node& node, const std::string& what) {
  if (!node.IsMap()) fail(node, what + " must be a mapping");
}

void require_seq(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence()) fail(node, what + " must be a list");
}

// Rejects unknown keys so that typos do not silently change a scenario.
void check_keys(const YAML::Node& node, std::initializer_list<std::string_view> allowed,
                const std::string& what) {
  require_map(node, what);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(kv.first, "unknown key '" + key + "' in " + what);
  }
}

YAML::Node required(const YAML::Node& parent, const std::string& key, const std::string& what) {
  const YAML::Node n = parent[key];
  if (!n) fail(parent, what + " needs '" + key + "'");
  return n;
}

std::vector<double> real_list(const YAML::Node& node, const std::string& what) {
  require_seq(node, what);
  std::vector<double> out;
  for (const auto& x : node) out.push_back(as_real(x, what + " entry"));
  return out;
}

std::vector<std::pair<double, double>> pair_list(const YAML::Node& node, const std::string& what) {
  require_seq(node, what);
  std::vector<std::pair<double, double>> out;
  for (const auto& pair : node) {
    if (!pair.IsSequence() || pair.size() != 2) fail(pair, what + " entries must be [a, b] pairs");
    out.emplace_back(as_real(pair[0], what), as_real(pair[1], what));
  }
  return out;
}

// Library constructors throw std::invalid_argument; pin those to the node.
template <class F>
auto at_node(const YAML::Node& node, F&& build) {
  try {
    return build();
  } catch (const std::invalid_argument& e) {
    fail(node, e.what());
  }
}

Distribution parse_distribution(const YAML::Node& node) {
  check_keys(node, {"discrete", "exp"}, "distribution");
  if (node.size() != 1) fail(node, "distribution needs exactly one of 'discrete' or 'exp'");
  if (node["exp"]) {
    const double rate = as_real(node["exp"], "exp rate");
    return at_node(node["exp"], [&] { return Distribution(ExpDist(rate)); });
  }
  std::vector<Atom> atoms;
  for (auto [v, p] : pair_list(node["discrete"], "discrete atom")) atoms.push_back({v, p});
  return at_node(node["discrete"], [&] { return Distribution(DiscreteDist(std::move(atoms))); });
}

DiscreteDist parse_discrete(const YAML::Node& node) {
  const Distribution d = parse_distribution(node);
  if (!std::holds_alternative<DiscreteDist>(d)) fail(node, "a discrete distribution is required here");
  return std::get<DiscreteDist>(d);
}

SetValuation parse_valuation(const YAML::Node& node, int items) {
  check_keys(node, {"additive", "unit_demand", "xos", "table"}, "valuation");
  if (node.size() != 1) fail(node, "valuation needs exactly one form");
  auto check_width = [&](const YAML::Node& n, std::size_t width) {
    if (static_cast<int>(width) != items)
      fail(n, "valuation lists " + std::to_string(width) + " items, scenario has " +
                  std::to_string(items));
  };
  if (node["additive"]) {
    const auto v = real_list(node["additive"], "additive values");
    check_width(node["additive"], v.size());
    return at_node(node["additive"], [&] { return SetValuation::additive(v); });
  }
  if (node["unit_demand"]) {
    const auto v = real_list(node["unit_demand"], "unit_demand values");
    check_width(node["unit_demand"], v.size());
    return at_node(node["unit_demand"], [&] { return SetValuation::unit_demand(v); });
  }
  if (node["xos"]) {
    require_seq(node["xos"], "xos clauses");
    std::vector<std::vector<double>> clauses;
    for (const auto& c : node["xos"]) {
      clauses.push_back(real_list(c, "xos clause"));
      check_width(c, clauses.back().size());
    }
    return at_node(node["xos"], [&] { return SetValuation::xos(clauses); });
  }
  const YAML::Node table = node["table"];
  require_seq(table, "table");
  std::vector<double> values(std::size_t{1} << items, 0.0);
  std::vector<bool> seen(values.size(), false);
  for (const auto& row : table) {
    if (!row.IsSequence() || row.size() != 2) fail(row, "table rows must be [bundle_mask, value]");
    const auto mask = as_count(row[0], "bundle mask");
    if (mask >= values.size()) fail(row[0], "bundle mask outside the item set");
    if (seen[mask]) fail(row[0], "bundle listed twice");
    seen[mask] = true;
    values[mask] = as_real(row[1], "bundle value");
  }
  for (std::size_t b = 0; b < seen.size(); ++b)
    if (!seen[b]) fail(table, "table misses bundle " + std::to_string(b));
  return at_node(table, [&] { return SetValuation(items, values); });
}

arrow_debreu::ConcaveFn parse_concave(const YAML::Node& node) {
  check_keys(node, {"pwl", "linear"}, "concave valuation");
  if (node.size() != 1) fail(node, "concave valuation needs exactly one of 'pwl' or 'linear'");
  if (node["linear"]) {
    const double slope = as_nonnegative(node["linear"], "slope");
    return arrow_debreu::ConcaveFn::linear(slope);
  }
  std::vector<arrow_debreu::Breakpoint> pts;
  for (auto [x, v] : pair_list(node["pwl"], "pwl breakpoint")) pts.push_back({x, v});
  return at_node(node["pwl"], [&] { return arrow_debreu::ConcaveFn(std::move(pts)); });
}

Bundle parse_items(const YAML::Node& node, int items) {
  require_seq(node, "endowment");
  Bundle b = 0;
  for (const auto& x : node) {
    const auto k = as_count(x, "item index");
    if (k >= static_cast<std::uint64_t>(items)) fail(x, "item index outside the item set");
    if (b & (Bundle{1} << k)) fail(x, "item listed twice");
    b |= Bundle{1} << k;
  }
  return b;
}

SweepSpec parse_sweep(const YAML::Node& node) {
  check_keys(node, {"parameter", "values", "from", "to", "steps"}, "sweep");
  SweepSpec s;
  s.parameter = as<std::string>(required(node, "parameter", "sweep"), "sweep parameter");
  if (node["values"]) {
    if (node["from"] || node["to"] || node["steps"])
      fail(node, "sweep takes either 'values' or 'from'/'to'/'steps'");
    s.values = real_list(node["values"], "sweep values");
  } else {
    const double from = as_real(required(node, "from", "sweep"), "from");
    const double to = as_real(required(node, "to", "sweep"), "to");
    const auto steps = as_count(required(node, "steps", "sweep"), "steps");
    for (std::uint64_t k = 0; k < steps; ++k)
      s.values.push_back(steps == 1 ? from
                                    : from + (to - from) * static_cast<double>(k) /
                                                 static_cast<double>(steps - 1));
  }
  if (s.values.empty()) fail(node, "sweep grid is empty");
  return s;
}

void parse_bilateral(const YAML::Node& n, Scenario& s) {
  check_keys(n, {"seller", "buyer", "price", "t", "corpus"}, "bilateral");
  if (n["seller"]) s.seller = parse_distribution(n["seller"]);
  if (n["buyer"]) s.buyer = parse_distribution(n["buyer"]);
  if (n["price"]) s.price = as_nonnegative(n["price"], "price");
  if (n["t"]) s.threshold = as_real(n["t"], "t");
  if (n["corpus"]) {
    const auto c = n["corpus"];
    check_keys(c, {"pairs", "max_atoms", "max_value", "equal_probability"}, "corpus");
    s.corpus.pairs = as_count(required(c, "pairs", "corpus"), "pairs");
    if (c["max_atoms"]) s.corpus.max_atoms = static_cast<int>(as_count(c["max_atoms"], "max_atoms"));
    if (c["max_value"]) s.corpus.max_value = as_nonnegative(c["max_value"], "max_value");
    if (c["equal_probability"]) s.corpus.equal_probability = as<bool>(c["equal_probability"], "equal_probability");
    if (s.corpus.pairs == 0 || s.corpus.max_atoms < 1) fail(c, "corpus needs pairs >= 1 and max_atoms >= 1");
  }
  if (s.corpus.pairs == 0 && (!s.seller || !s.buyer))
    fail(n, "bilateral needs 'seller' and 'buyer' (or a 'corpus')");
  if (s.mechanism == "fixed_price" && !s.price) fail(n, "fixed_price needs 'price'");
  if (s.mechanism == "t_threshold" && !s.threshold) fail(n, "t_threshold needs 't'");
  if (s.threshold && !(*s.threshold > 1.0)) fail(n["t"], "t must exceed 1");
}

void parse_partnership(const YAML::Node& n, Scenario& s) {
  check_keys(n, {"values", "shares", "random", "value_distributions", "price_rule", "seller",
                 "price", "report_grid"},
             "partnership");
  if (n["shares"]) s.shares = real_list(n["shares"], "shares");
  if (n["values"]) {
    partnership::Instance inst{real_list(n["values"], "values"), s.shares};
    at_node(n["values"], [&] {
      inst.validate();
      return 0;
    });
    s.partnership = std::move(inst);
  } else if (n["value_distributions"]) {
    require_seq(n["value_distributions"], "value_distributions");
    for (const auto& d : n["value_distributions"]) s.value_distributions.push_back(parse_discrete(d));
    if (s.value_distributions.size() != s.shares.size())
      fail(n["value_distributions"], "need one value distribution per share");
    at_node(n["value_distributions"], [&] {
      partnership::Instance{std::vector<double>(s.shares.size(), 0.0), s.shares}.validate();
      return 0;
    });
  } else if (n["random"]) {
    const auto r = n["random"];
    check_keys(r, {"agents", "max_value"}, "random");
    s.random_agents = as_count(required(r, "agents", "random"), "agents");
    if (r["max_value"]) s.random_max_value = as_nonnegative(r["max_value"], "max_value");
    if (s.random_agents < 1) fail(r, "random needs at least one agent");
  } else {
    fail(n, "partnership needs 'values', 'value_distributions' or 'random'");
  }
  if (n["price_rule"]) {
    s.price_rule = as<std::string>(n["price_rule"], "price_rule");
    if (s.price_rule != "median" && s.price_rule != "price_55_28")
      fail(n["price_rule"], "price_rule must be 'median' or 'price_55_28'");
  }
  if (n["seller"]) s.seller_index = as_count(n["seller"], "seller");
  if (n["price"]) s.price = as_nonnegative(n["price"], "price");
  if (n["report_grid"]) s.report_grid = real_list(n["report_grid"], "report_grid");
  if (s.mechanism == "single_seller" && !s.price) fail(n, "single_seller needs 'price'");
  if (s.mechanism == "reduction" && s.value_distributions.empty())
    fail(n, "reduction needs 'value_distributions' and 'shares'");
}

void parse_combinatorial(const YAML::Node& n, Scenario& s) {
  check_keys(n, {"items", "agents", "reserve", "report_grid"}, "combinatorial");
  const auto items = as_count(required(n, "items", "combinatorial"), "items");
  if (items > static_cast<std::uint64_t>(combinatorial::kMaxItems))
    fail(n["items"], "at most 16 items are supported");
  s.items = static_cast<int>(items);
  if (n["reserve"]) s.reserve = as_nonnegative(n["reserve"], "reserve");
  const YAML::Node agents = required(n, "agents", "combinatorial");
  require_seq(agents, "agents");
  Bundle used = 0;
  for (const auto& a : agents) {
    check_keys(a, {"valuation", "types", "endowment", "median"}, "agent");
    CombinatorialAgent agent;
    if (a["valuation"]) {
      agent.types.push_back(parse_valuation(a["valuation"], s.items));
      agent.probs.push_back(1.0);
    } else if (a["types"]) {
      require_seq(a["types"], "types");
      double total = 0.0;
      for (const auto& t : a["types"]) {
        check_keys(t, {"valuation", "prob"}, "type");
        agent.types.push_back(parse_valuation(required(t, "valuation", "type"), s.items));
        const double p = as_real(required(t, "prob", "type"), "prob");
        if (!(p > 0.0 && p <= 1.0)) fail(t["prob"], "prob must lie in (0, 1]");
        agent.probs.push_back(p);
        total += p;
      }
      if (agent.types.empty() || std::abs(total - 1.0) > 1e-12)
        fail(a["types"], "type probabilities must sum to 1");
    } else {
      fail(a, "agent needs 'valuation' or 'types'");
    }
    if (a["endowment"]) agent.endowment = parse_items(a["endowment"], s.items);
    if (agent.endowment & used) fail(a["endowment"], "endowments overlap");
    used |= agent.endowment;
    if (a["median"]) agent.median = as_nonnegative(a["median"], "median");
    s.agents.push_back(std::move(agent));
  }
  if (s.agents.empty()) fail(agents, "need at least one agent");
  if (n["report_grid"]) {
    require_seq(n["report_grid"], "report_grid");
    for (const auto& v : n["report_grid"]) s.valuation_grid.push_back(parse_valuation(v, s.items));
  }
}

void parse_arrow_debreu(const YAML::Node& n, Scenario& s) {
  check_keys(n, {"agents", "random", "grid_steps", "quantity_grid", "valuation_grid"},
             "arrow_debreu");
  if (n["agents"]) {
    require_seq(n["agents"], "agents");
    arrow_debreu::Instance inst;
    for (const auto& a : n["agents"]) {
      check_keys(a, {"valuation", "endowment"}, "agent");
      inst.valuations.push_back(parse_concave(required(a, "valuation", "agent")));
      inst.endowments.push_back(as_nonnegative(required(a, "endowment", "agent"), "endowment"));
    }
    at_node(n["agents"], [&] {
      arrow_debreu::build_groups(inst);
      return 0;
    });
    s.market = std::move(inst);
  } else if (n["random"]) {
    const auto r = n["random"];
    check_keys(r, {"agents", "max_pieces", "max_slope"}, "random");
    s.random_market.agents = as_count(required(r, "agents", "random"), "agents");
    if (r["max_pieces"]) s.random_market.max_pieces = static_cast<int>(as_count(r["max_pieces"], "max_pieces"));
    if (r["max_slope"]) s.random_market.max_slope = as_nonnegative(r["max_slope"], "max_slope");
    if (s.random_market.agents < 3 || s.random_market.max_pieces < 1)
      fail(r, "random market needs agents >= 3 and max_pieces >= 1");
  } else {
    fail(n, "arrow_debreu needs 'agents' or 'random'");
  }
  if (n["grid_steps"]) {
    s.grid_steps = static_cast<int>(as_count(n["grid_steps"], "grid_steps"));
    if (s.grid_steps < 8) fail(n["grid_steps"], "grid_steps must be at least 8");
  }
  if (n["quantity_grid"]) s.quantity_grid = real_list(n["quantity_grid"], "quantity_grid");
  if (n["valuation_grid"]) {
    require_seq(n["valuation_grid"], "valuation_grid");
    for (const auto& v : n["valuation_grid"]) s.concave_grid.push_back(parse_concave(v));
  }
}

const std::set<std::string>& mechanisms_for(Setting s) {
  static const std::set<std::string> bilateral{"fixed_price", "median", "t_threshold",
                                               "price_55_28", "optimal_fixed_price"};
  static const std::set<std::string> partnership{
      "no_trade", "pivot", "pivot_lottery", "single_seller", "reduction",
      "report_priced_single_seller"};
  static const std::set<std::string> combinatorial{"global_reserve", "combinatorial_median"};
  static const std::set<std::string> arrow_debreu{"ad"};
  switch (s) {
    case Setting::Bilateral: return bilateral;
    case Setting::Partnership: return partnership;
    case Setting::Combinatorial: return combinatorial;
    case Setting::ArrowDebreu: return arrow_debreu;
  }
  return bilateral;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root || !root.IsMap()) throw ConfigError("scenario must be a mapping", 1, 1);
  check_keys(root,
             {"name", "setting", "mechanism", "seed", "trials", "oracle_budget", "assert", "sweep",
              "bilateral", "partnership", "combinatorial", "arrow_debreu"},
             "scenario");

  Scenario s;
  if (root["name"]) s.name = as<std::string>(root["name"], "name");
  const YAML::Node setting = required(root, "setting", "scenario");
  const auto setting_name = as<std::string>(setting, "setting");
  if (setting_name == "bilateral") s.setting = Setting::Bilateral;
  else if (setting_name == "partnership") s.setting = Setting::Partnership;
  else if (setting_name == "combinatorial") s.setting = Setting::Combinatorial;
  else if (setting_name == "arrow_debreu") s.setting = Setting::ArrowDebreu;
  else fail(setting, "unknown setting '" + setting_name + "'");

  const YAML::Node mechanism = required(root, "mechanism", "scenario");
  s.mechanism = as<std::string>(mechanism, "mechanism");
  if (!mechanisms_for(s.setting).contains(s.mechanism))
    fail(mechanism, "mechanism '" + s.mechanism + "' does not exist for setting '" + setting_name + "'");

  s.seed = as_count(required(root, "seed", "scenario"), "seed");
  if (root["trials"]) {
    s.trials = as_count(root["trials"], "trials");
    if (s.trials == 0) fail(root["trials"], "trials must be at least 1");
  }
  if (root["oracle_budget"]) s.oracle_budget = as_count(root["oracle_budget"], "oracle_budget");
  if (root["assert"]) {
    check_keys(root["assert"], {"ratio_at_most"}, "assert");
    if (root["assert"]["ratio_at_most"])
      s.ratio_bound = as_real(root["assert"]["ratio_at_most"], "ratio_at_most");
  }
  if (root["sweep"]) s.sweep = parse_sweep(root["sweep"]);

  const YAML::Node body = required(root, setting_name, "scenario");
  switch (s.setting) {
    case Setting::Bilateral: parse_bilateral(body, s); break;
    case Setting::Partnership: parse_partnership(body, s); break;
    case Setting::Combinatorial: parse_combinatorial(body, s); break;
    case Setting::ArrowDebreu: parse_arrow_debreu(body, s); break;
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

}  // namespace reallocation::cli
