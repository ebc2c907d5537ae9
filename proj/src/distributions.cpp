#include "reallocation/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "reallocation/detail/compensated_sum.hpp"

namespace reallocation {

using detail::CompensatedSum;

namespace {

constexpr double kProbTolerance = 1e-12;
// Cumulative probabilities are compared against 1/2 with this slack so that
// e.g. five atoms of 0.1 reach the median at the fifth atom.
constexpr double kMedianSlack = 1e-12;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

double exp_mean_above(double rate, double x) {
  if (std::isinf(x)) return 0.0;
  if (x <= 0.0) return 1.0 / rate;
  return std::exp(-rate * x) * (x + 1.0 / rate);
}

}  // namespace

DiscreteDist::DiscreteDist(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("discrete distribution needs at least one atom");
  CompensatedSum total;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    const Atom& a = atoms_[k];
    if (!std::isfinite(a.value) || a.value < 0.0)
      throw std::invalid_argument("atom values must be finite and non-negative");
    if (!(a.prob > 0.0) || a.prob > 1.0)
      throw std::invalid_argument("atom probabilities must lie in (0, 1]");
    if (k > 0 && !(atoms_[k - 1].value < a.value))
      throw std::invalid_argument("atom values must be strictly increasing");
    total += a.prob;
  }
  if (std::abs(total.value() - 1.0) > kProbTolerance)
    throw std::invalid_argument("atom probabilities sum to " + std::to_string(total.value()) +
                                ", expected 1");
}

DiscreteDist DiscreteDist::uniform_over(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("uniform_over needs at least one value");
  const double each = 1.0 / static_cast<double>(values.size());
  std::map<double, double> merged;
  for (double v : values) merged[v] += each;
  std::vector<Atom> atoms;
  atoms.reserve(merged.size());
  for (auto [v, p] : merged) atoms.push_back({v, p});
  return DiscreteDist(std::move(atoms));
}

DiscreteDist DiscreteDist::point(double value) { return DiscreteDist({{value, 1.0}}); }

bool DiscreteDist::equal_probability() const {
  const double p0 = atoms_.front().prob;
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [p0](const Atom& a) { return std::abs(a.prob - p0) <= kProbTolerance; });
}

ExpDist::ExpDist(double rate) : rate_(rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("exponential rate must be positive and finite");
}

double median(const Distribution& d) {
  return std::visit(Overloaded{
                        [](const DiscreteDist& dd) {
                          CompensatedSum c;
                          for (const Atom& a : dd.atoms()) {
                            c += a.prob;
                            if (c.value() >= 0.5 - kMedianSlack) return a.value;
                          }
                          return dd.max_value();
                        },
                        [](const ExpDist& e) { return std::log(2.0) / e.rate(); },
                    },
                    d);
}

double expectation(const Distribution& d) {
  return std::visit(Overloaded{
                        [](const DiscreteDist& dd) {
                          CompensatedSum s;
                          for (const Atom& a : dd.atoms()) s += a.value * a.prob;
                          return s.value();
                        },
                        [](const ExpDist& e) { return 1.0 / e.rate(); },
                    },
                    d);
}

double expected_max(const Distribution& ds, const Distribution& db) {
  return std::visit(
      Overloaded{
          [](const DiscreteDist& a, const DiscreteDist& b) {
            CompensatedSum s;
            for (const Atom& x : a.atoms())
              for (const Atom& y : b.atoms()) s += x.prob * y.prob * std::max(x.value, y.value);
            return s.value();
          },
          // E[max(x, Y)] = x + E[(Y - x)+] = x + exp(-rate x) / rate.
          [](const DiscreteDist& a, const ExpDist& e) {
            CompensatedSum s;
            for (const Atom& x : a.atoms())
              s += x.prob * (x.value + std::exp(-e.rate() * x.value) / e.rate());
            return s.value();
          },
          [](const ExpDist& e, const DiscreteDist& b) {
            CompensatedSum s;
            for (const Atom& y : b.atoms())
              s += y.prob * (y.value + std::exp(-e.rate() * y.value) / e.rate());
            return s.value();
          },
          // E[x] + E[y] - E[min], min ~ Exp(s + b).
          [](const ExpDist& s, const ExpDist& b) {
            return 1.0 / s.rate() + 1.0 / b.rate() - 1.0 / (s.rate() + b.rate());
          },
      },
      ds, db);
}

double expected_gft(const Distribution& ds, const Distribution& db) {
  return std::visit(
      Overloaded{
          [](const DiscreteDist& a, const DiscreteDist& b) {
            CompensatedSum s;
            for (const Atom& x : a.atoms())
              for (const Atom& y : b.atoms())
                if (y.value > x.value) s += x.prob * y.prob * (y.value - x.value);
            return s.value();
          },
          [](const DiscreteDist& a, const ExpDist& e) {
            CompensatedSum s;
            for (const Atom& x : a.atoms()) s += x.prob * std::exp(-e.rate() * x.value) / e.rate();
            return s.value();
          },
          // E[(y - X)+] = integral of F_X over [0, y].
          [](const ExpDist& e, const DiscreteDist& b) {
            CompensatedSum s;
            for (const Atom& y : b.atoms())
              s += y.prob * (y.value + std::expm1(-e.rate() * y.value) / e.rate());
            return s.value();
          },
          // Pr[y > x] * E[y - x | y > x] = s / (s + b) * 1 / b by memorylessness.
          [](const ExpDist& s, const ExpDist& b) {
            return s.rate() / (s.rate() + b.rate()) / b.rate();
          },
      },
      ds, db);
}

double sample(const Distribution& d, double coin) {
  if (!(coin >= 0.0 && coin < 1.0)) throw std::invalid_argument("coin must lie in [0, 1)");
  return std::visit(Overloaded{
                        [coin](const DiscreteDist& dd) {
                          CompensatedSum c;
                          for (const Atom& a : dd.atoms()) {
                            c += a.prob;
                            if (coin < c.value()) return a.value;
                          }
                          return dd.max_value();
                        },
                        [coin](const ExpDist& e) { return -std::log1p(-coin) / e.rate(); },
                    },
                    d);
}

double cdf(const Distribution& d, double x) {
  return std::visit(Overloaded{
                        [x](const DiscreteDist& dd) {
                          CompensatedSum c;
                          for (const Atom& a : dd.atoms())
                            if (a.value <= x) c += a.prob;
                          return std::min(1.0, c.value());
                        },
                        [x](const ExpDist& e) {
                          if (x < 0.0) return 0.0;
                          return -std::expm1(-e.rate() * x);
                        },
                    },
                    d);
}

double survival_inclusive(const Distribution& d, double x) {
  return std::visit(Overloaded{
                        [x](const DiscreteDist& dd) {
                          CompensatedSum c;
                          for (const Atom& a : dd.atoms())
                            if (a.value >= x) c += a.prob;
                          return std::min(1.0, c.value());
                        },
                        [x](const ExpDist& e) {
                          if (x <= 0.0) return 1.0;
                          return std::exp(-e.rate() * x);
                        },
                    },
                    d);
}

double partial_mean_below(const Distribution& d, double x) {
  return std::visit(Overloaded{
                        [x](const DiscreteDist& dd) {
                          CompensatedSum c;
                          for (const Atom& a : dd.atoms())
                            if (a.value <= x) c += a.value * a.prob;
                          return c.value();
                        },
                        [x](const ExpDist& e) {
                          if (x <= 0.0) return 0.0;
                          if (std::isinf(x)) return 1.0 / e.rate();
                          // (1 - e^{-rx}) / r - x e^{-rx}
                          return -std::expm1(-e.rate() * x) / e.rate() - x * std::exp(-e.rate() * x);
                        },
                    },
                    d);
}

double partial_mean_above(const Distribution& d, double x) {
  return std::visit(Overloaded{
                        [x](const DiscreteDist& dd) {
                          CompensatedSum c;
                          for (const Atom& a : dd.atoms())
                            if (a.value >= x) c += a.value * a.prob;
                          return c.value();
                        },
                        [x](const ExpDist& e) { return exp_mean_above(e.rate(), x); },
                    },
                    d);
}

DiscreteDist max_of(std::span<const DiscreteDist> dists) {
  if (dists.empty()) throw std::invalid_argument("max_of needs at least one distribution");
  std::vector<double> support;
  for (const DiscreteDist& d : dists)
    for (const Atom& a : d.atoms()) support.push_back(a.value);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  std::vector<Atom> atoms;
  double prev = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    double joint = 1.0;
    if (k + 1 == support.size()) {
      joint = 1.0;
    } else {
      for (const DiscreteDist& d : dists) joint *= cdf(d, support[k]);
    }
    const double mass = joint - prev;
    if (mass > 0.0) atoms.push_back({support[k], mass});
    prev = joint;
  }
  return DiscreteDist(std::move(atoms));
}

DiscreteDist discretize(const Distribution& d, int atoms) {
  if (const auto* dd = std::get_if<DiscreteDist>(&d)) return *dd;
  if (atoms < 1) throw std::invalid_argument("discretize needs at least one atom");
  const double rate = std::get<ExpDist>(d).rate();
  std::vector<Atom> out;
  out.reserve(static_cast<std::size_t>(atoms));
  for (int k = 0; k < atoms; ++k) {
    const double q = (k + 0.5) / atoms;
    out.push_back({-std::log1p(-q) / rate, 1.0 / atoms});
  }
  // Equal shares of 1/atoms may not sum to exactly one in floating point.
  CompensatedSum s;
  for (std::size_t k = 0; k + 1 < out.size(); ++k) s += out[k].prob;
  out.back().prob = 1.0 - s.value();
  return DiscreteDist(std::move(out));
}

}  // namespace reallocation
