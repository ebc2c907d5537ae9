#include "reallocation/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "reallocation/random.hpp"

namespace reallocation::corpus {

namespace {

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

// Random simplex point; all but the last entry are rounded down to 1/1000 and
// the last absorbs the remainder.
std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) {
    x = -std::log1p(-unit_uniform(rng)) + 1e-3;
    total += x;
  }
  double used = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    w[i] = std::floor(w[i] / total * 1000.0) / 1000.0;
    used += w[i];
  }
  w[n - 1] = 1.0 - used;
  return w;
}

}  // namespace

DiscreteDist random_discrete(std::mt19937_64& rng, int max_atoms, double max_value,
                             bool equal_probability) {
  const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_atoms)));
  std::set<double> values;
  while (static_cast<int>(values.size()) < k) values.insert(round3(unit_uniform(rng) * max_value));
  std::vector<double> v(values.begin(), values.end());
  if (equal_probability) return DiscreteDist::uniform_over(v);
  const auto p = random_simplex(rng, v.size());
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (p[i] > 0.0) atoms.push_back({v[i], p[i]});
  return DiscreteDist(std::move(atoms));
}

std::pair<DiscreteDist, DiscreteDist> two_cluster_instance(double eps, int atoms,
                                                           double buyer_value) {
  if (atoms < 2 || atoms % 2 != 0) throw std::invalid_argument("need an even number of atoms");
  const int half = atoms / 2;
  std::vector<double> values;
  for (int k = 0; k < half; ++k) values.push_back(eps * (k + 0.5) / half);
  for (int k = 0; k < half; ++k) values.push_back(1.0 + eps * (k + 0.5) / half);
  return {DiscreteDist::uniform_over(values), DiscreteDist::point(buyer_value)};
}

partnership::Instance random_partnership(std::mt19937_64& rng, std::size_t agents,
                                         double max_value) {
  partnership::Instance inst;
  for (std::size_t i = 0; i < agents; ++i) inst.values.push_back(round3(unit_uniform(rng) * max_value));
  inst.shares = random_simplex(rng, agents);
  return inst;
}

arrow_debreu::ConcaveFn random_concave(std::mt19937_64& rng, int max_pieces, double max_slope) {
  const int pieces = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_pieces)));
  std::set<double> cuts;
  while (static_cast<int>(cuts.size()) < pieces) {
    const double x = round3(0.001 + unit_uniform(rng) * 0.999);
    cuts.insert(std::clamp(x, 0.001, 1.0));
  }
  std::vector<double> slopes;
  for (int k = 0; k < pieces; ++k) slopes.push_back(round3(unit_uniform(rng) * max_slope));
  std::sort(slopes.rbegin(), slopes.rend());
  std::vector<arrow_debreu::Breakpoint> pts{{0.0, 0.0}};
  double x = 0.0, v = 0.0;
  int k = 0;
  for (double cut : cuts) {
    v += slopes[static_cast<std::size_t>(k++)] * (cut - x);
    x = cut;
    pts.push_back({x, v});
  }
  return arrow_debreu::ConcaveFn(std::move(pts));
}

arrow_debreu::Instance random_market(std::mt19937_64& rng, std::size_t agents, int max_pieces,
                                     double max_slope) {
  if (agents < 3) throw std::invalid_argument("a market needs at least 3 agents");
  arrow_debreu::Instance inst;
  for (std::size_t i = 0; i < agents; ++i)
    inst.valuations.push_back(random_concave(rng, max_pieces, max_slope));
  if (agents == 3) {
    inst.endowments = {1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0};
    return inst;
  }
  // Shrink a random simplex point toward the uniform split until it fits.
  const auto raw = random_simplex(rng, agents);
  const double n = static_cast<double>(agents);
  for (double lambda = 1.0;; lambda *= 0.5) {
    std::vector<double> r(agents);
    double used = 0.0;
    for (std::size_t i = 0; i + 1 < agents; ++i) {
      r[i] = round3((1.0 - lambda) / n + lambda * raw[i]);
      used += r[i];
    }
    r[agents - 1] = 1.0 - used;
    if (r[agents - 1] >= 0.0 && *std::max_element(r.begin(), r.end()) <= 1.0 / 3.0) {
      inst.endowments = std::move(r);
      return inst;
    }
  }
}

combinatorial::SetValuation random_valuation(std::mt19937_64& rng, int items, int levels,
                                             ValuationForm form) {
  std::vector<double> v(static_cast<std::size_t>(items));
  for (double& x : v) x = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(levels)));
  return form == ValuationForm::Additive ? combinatorial::SetValuation::additive(v)
                                         : combinatorial::SetValuation::unit_demand(v);
}

}  // namespace reallocation::corpus
