#include "reallocation/arrow_debreu.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "reallocation/detail/compensated_sum.hpp"

namespace reallocation::arrow_debreu {

using reallocation::detail::CompensatedSum;

namespace {

constexpr double kSlack = 1e-12;
constexpr double kBudgetTolerance = 1e-9;

double sum_of(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s += x;
  return s.value();
}

double sum_over(std::span<const std::size_t> members, std::span<const double> xs) {
  CompensatedSum s;
  for (std::size_t i : members) s += xs[i];
  return s.value();
}

}  // namespace

ConcaveFn::ConcaveFn(std::vector<Breakpoint> breakpoints) : points_(std::move(breakpoints)) {
  if (points_.empty() || points_.front().x != 0.0 || points_.front().v != 0.0)
    throw std::invalid_argument("concave valuation must start at (0, 0)");
  for (std::size_t k = 1; k < points_.size(); ++k) {
    const Breakpoint& a = points_[k - 1];
    const Breakpoint& b = points_[k];
    if (!(b.x > a.x)) throw std::invalid_argument("breakpoint x must be strictly increasing");
    if (b.x > 1.0 + kSlack) throw std::invalid_argument("breakpoint x must not exceed 1");
    if (!std::isfinite(b.v)) throw std::invalid_argument("breakpoint values must be finite");
    const double slope = (b.v - a.v) / (b.x - a.x);
    if (slope < -kSlack) throw std::invalid_argument("valuation must be non-decreasing");
    if (!slopes_.empty() && slope > slopes_.back() + kSlack)
      throw std::invalid_argument("valuation must be concave (slopes non-increasing)");
    slopes_.push_back(std::max(slope, 0.0));
  }
}

ConcaveFn ConcaveFn::linear(double slope) { return ConcaveFn({{0.0, 0.0}, {1.0, slope}}); }

ConcaveFn ConcaveFn::zero() { return ConcaveFn({{0.0, 0.0}}); }

double ConcaveFn::operator()(double x) const {
  if (x <= 0.0) return 0.0;
  auto it = std::upper_bound(points_.begin(), points_.end(), x,
                             [](double value, const Breakpoint& b) { return value < b.x; });
  const std::size_t k = static_cast<std::size_t>(it - points_.begin()) - 1;
  if (k + 1 >= points_.size()) return points_.back().v;
  return points_[k].v + slopes_[k] * (x - points_[k].x);
}

ConcaveFn ConcaveFn::shifted(double r) const {
  if (!(r >= 0.0 && r <= 1.0 + kSlack)) throw std::invalid_argument("shift must lie in [0, 1]");
  const double base = (*this)(r);
  std::vector<Breakpoint> out{{0.0, 0.0}};
  for (const Breakpoint& b : points_)
    if (b.x > r) out.push_back({b.x - r, b.v - base});
  return ConcaveFn(std::move(out));
}

double marginal(const ConcaveFn& v, double x, double y) {
  if (x < 0.0 || y < 0.0 || x + y > 1.0 + kSlack)
    throw std::invalid_argument("marginal needs x, y >= 0 and x + y <= 1");
  return v(x + y) - v(y);
}

double supply_at_price(const ConcaveFn& v, double r, double p) {
  if (!(r >= 0.0 && r <= 1.0 + kSlack)) throw std::invalid_argument("endowment must lie in [0, 1]");
  if (!(p >= 0.0)) throw std::invalid_argument("price must be non-negative");
  const auto points = v.breakpoints();
  const auto slopes = v.slopes();
  // Retained units below `keep` are worth more than p; everything above is sold.
  double keep = r;
  bool found = false;
  for (std::size_t k = 0; k < slopes.size() && points[k].x < r; ++k) {
    if (slopes[k] <= p) {
      keep = points[k].x;
      found = true;
      break;
    }
  }
  if (!found && points.back().x < r) keep = points.back().x;  // flat tail, slope 0 <= p
  return r - std::min(keep, r);
}

void Instance::validate() const {
  if (valuations.size() != endowments.size())
    throw std::invalid_argument("need one endowment per valuation");
  if (valuations.empty()) throw std::invalid_argument("market needs at least one agent");
  for (double r : endowments)
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("endowments must lie in [0, 1]");
  if (std::abs(sum_of(endowments) - 1.0) > kSlack)
    throw std::invalid_argument("endowments must sum to 1");
}

double mid_supply_price(std::span<const std::size_t> members, const Instance& inst, double target) {
  const double held = sum_over(members, inst.endowments);
  if (held < 2.0 * target - kSlack)
    throw std::invalid_argument("group holds " + std::to_string(held) + ", needs at least " +
                                std::to_string(2.0 * target));
  std::vector<double> candidates{0.0};
  for (std::size_t i : members) {
    const auto& v = inst.valuations[i];
    for (std::size_t k = 0; k < v.slopes().size(); ++k)
      if (v.breakpoints()[k].x < inst.endowments[i]) candidates.push_back(v.slopes()[k]);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double p : candidates) {
    CompensatedSum supply;
    for (std::size_t i : members) supply += supply_at_price(inst.valuations[i], inst.endowments[i], p);
    if (supply.value() >= target - kSlack) return p;
  }
  // Unreachable: at the largest slope every member sells everything.
  throw std::logic_error("mid_supply_price: supply never reached the target");
}

std::vector<double> truncate_supplies(std::span<const double> reported, double cap) {
  for (double x : reported)
    if (!(x >= 0.0)) throw std::invalid_argument("reported supplies must be non-negative");
  std::vector<double> out(reported.begin(), reported.end());
  if (sum_of(reported) <= cap) return out;
  double suffix = 0.0;
  for (std::size_t k = reported.size(); k-- > 0;) {
    if (reported[k] + suffix >= cap) out[k] = std::max(0.0, cap - suffix);
    suffix += reported[k];
  }
  return out;
}

namespace {

struct Fill {
  std::vector<double> amount;  // per buyer
  std::vector<double> value;   // per buyer
  double dummy = 0.0;
  double welfare = 0.0;
};

// Water-fills t over the buyers' linear pieces in decreasing slope order; the
// dummy takes whatever is left and wins ties at slope p. `skip` leaves one
// buyer out (for VCG payments). Every piece is linear, so this equals greedy
// on the uniform grid refined at all breakpoints.
Fill water_fill(std::span<const ConcaveFn> buyers, double p, double t, std::size_t skip) {
  struct Piece {
    double slope;
    double length;
    std::size_t buyer;
  };
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < buyers.size(); ++i) {
    if (i == skip) continue;
    const auto pts = buyers[i].breakpoints();
    const auto slopes = buyers[i].slopes();
    for (std::size_t k = 0; k < slopes.size(); ++k)
      if (slopes[k] > p) pieces.push_back({slopes[k], pts[k + 1].x - pts[k].x, i});
  }
  std::stable_sort(pieces.begin(), pieces.end(),
                   [](const Piece& a, const Piece& b) { return a.slope > b.slope; });

  Fill f;
  f.amount.assign(buyers.size(), 0.0);
  f.value.assign(buyers.size(), 0.0);
  double left = t;
  for (const Piece& piece : pieces) {
    if (left <= 0.0) break;
    const double take = std::min(left, piece.length);
    f.amount[piece.buyer] += take;
    left -= take;
  }
  CompensatedSum w;
  for (std::size_t i = 0; i < buyers.size(); ++i) {
    f.value[i] = buyers[i](f.amount[i]);
    w += f.value[i];
  }
  f.dummy = std::max(0.0, left);
  w += p * f.dummy;
  f.welfare = w.value();
  return f;
}

}  // namespace

VcgResult divisible_vcg(std::span<const ConcaveFn> buyers, double p, double t, int grid_steps) {
  if (grid_steps < 8) throw std::invalid_argument("divisible_vcg needs at least 8 grid steps");
  if (!(t >= 0.0 && t <= 1.0 / 8.0 + kSlack)) throw std::invalid_argument("t must lie in [0, 1/8]");
  if (!(p >= 0.0)) throw std::invalid_argument("dummy price must be non-negative");

  const std::size_t n = buyers.size();
  const Fill all = water_fill(buyers, p, t, n);
  VcgResult res;
  res.allocation = all.amount;
  res.payments.assign(n, 0.0);
  res.dummy_amount = all.dummy;
  for (std::size_t i = 0; i < n; ++i) {
    if (all.amount[i] <= 0.0) continue;
    const Fill without = water_fill(buyers, p, t, i);
    res.payments[i] = without.welfare - (all.welfare - all.value[i]);
  }
  return res;
}

Groups build_groups(const Instance& inst) {
  inst.validate();
  const std::size_t n = inst.agents();
  const auto& r = inst.endowments;
  for (double share : r)
    if (share > 1.0 / 3.0 + kSlack)
      throw std::invalid_argument(
          "an agent holds more than 1/3 of the good; no prior-free mechanism has a bounded "
          "approximation ratio in that case");

  std::vector<std::size_t> by_share(n);
  std::iota(by_share.begin(), by_share.end(), 0);
  std::stable_sort(by_share.begin(), by_share.end(),
                   [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  std::vector<std::size_t> big;
  for (std::size_t i : by_share)
    if (r[i] >= 1.0 / 8.0 - kSlack) big.push_back(i);

  Groups g;
  if (big.size() >= 2) {
    g.members[0] = {big[0]};
    g.members[1] = {big[1]};
    for (std::size_t i = 0; i < n; ++i)
      if (i != big[0] && i != big[1]) g.members[2].push_back(i);
    g.t_max = 1.0 / 16.0;
    g.buyers_fixed = true;
    return g;
  }

  std::vector<bool> taken(n, false);
  auto grow = [&](std::vector<std::size_t>& group) {
    double held = 0.0;
    for (std::size_t i : by_share) {
      if (held >= 0.25 - kSlack) break;
      if (taken[i] || (!big.empty() && i == big[0])) continue;
      group.push_back(i);
      taken[i] = true;
      held += r[i];
    }
    std::sort(group.begin(), group.end());
  };
  grow(g.members[0]);
  grow(g.members[1]);
  for (std::size_t i = 0; i < n; ++i)
    if (!taken[i]) g.members[2].push_back(i);
  for (const auto& group : g.members)
    if (sum_over(group, r) < 0.25 - kSlack)
      throw std::logic_error("build_groups produced a group holding less than 1/4");
  g.t_max = 1.0 / 8.0;
  g.buyers_fixed = false;
  return g;
}

Roles assign_roles(const Groups& groups, RoleCoin coin) {
  static constexpr std::array<std::array<int, 3>, 6> kOrders{{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  if (coin.permutation < 0 || coin.permutation >= 6)
    throw std::invalid_argument("role coin must lie in [0, 6)");
  const auto& order = kOrders[static_cast<std::size_t>(coin.permutation)];
  Roles roles;
  if (groups.buyers_fixed) {
    // Only the relative order of groups 0 and 1 matters: probability 1/2 each.
    const auto pos0 = std::find(order.begin(), order.end(), 0);
    const auto pos1 = std::find(order.begin(), order.end(), 1);
    const bool zero_first = pos0 < pos1;
    roles.buyers = groups.members[2];
    roles.statistics = groups.members[zero_first ? 0 : 1];
    roles.sellers = groups.members[zero_first ? 1 : 0];
    return roles;
  }
  roles.buyers = groups.members[static_cast<std::size_t>(order[0])];
  roles.statistics = groups.members[static_cast<std::size_t>(order[1])];
  roles.sellers = groups.members[static_cast<std::size_t>(order[2])];
  return roles;
}

double FractionOutcome::welfare(std::span<const ConcaveFn> valuations) const {
  CompensatedSum s;
  for (std::size_t i = 0; i < valuations.size(); ++i) s += valuations[i](holdings[i]);
  return s.value();
}

MechanismTrace ad_mechanism(const Instance& inst, RoleCoin coin, int grid_steps,
                            const SupplyReports* deviations) {
  const Groups groups = build_groups(inst);
  MechanismTrace tr;
  tr.roles = assign_roles(groups, coin);
  tr.t_max = groups.t_max;

  const std::size_t n = inst.agents();
  const auto& r = inst.endowments;
  tr.reported_supply.assign(n, 0.0);
  tr.truncated.assign(n, 0.0);
  tr.sold.assign(n, 0.0);
  tr.bought.assign(n, 0.0);

  tr.price = mid_supply_price(tr.roles.statistics, inst, groups.t_max);

  const auto& sellers = tr.roles.sellers;  // ascending index
  std::vector<double> reported;
  reported.reserve(sellers.size());
  for (std::size_t i : sellers) {
    double x = supply_at_price(inst.valuations[i], r[i], tr.price);
    if (deviations) {
      for (std::size_t k = 0; k < deviations->agents.size(); ++k)
        if (deviations->agents[k] == i) x = std::clamp(deviations->quantities.at(k), 0.0, r[i]);
    }
    tr.reported_supply[i] = x;
    reported.push_back(x);
  }
  const auto truncated = truncate_supplies(reported, groups.t_max);
  for (std::size_t k = 0; k < sellers.size(); ++k) tr.truncated[sellers[k]] = truncated[k];
  tr.t = std::min(groups.t_max, sum_of(truncated));

  std::vector<ConcaveFn> shifted;
  shifted.reserve(tr.roles.buyers.size());
  for (std::size_t i : tr.roles.buyers) shifted.push_back(inst.valuations[i].shifted(r[i]));
  const VcgResult vcg = divisible_vcg(shifted, tr.price, tr.t, grid_steps);
  tr.dummy_amount = vcg.dummy_amount;

  FractionOutcome& out = tr.outcome;
  out.holdings = r;
  out.payments.assign(n, 0.0);
  for (std::size_t k = 0; k < tr.roles.buyers.size(); ++k) {
    const std::size_t i = tr.roles.buyers[k];
    tr.bought[i] = vcg.allocation[k];
    out.holdings[i] = r[i] + vcg.allocation[k];
    out.payments[i] = vcg.payments[k];
  }

  // The unsold residue goes back to sellers starting from the lowest index.
  const double sold_total = sum_of(vcg.allocation);
  double residue = std::max(0.0, sum_of(truncated) - sold_total);
  for (std::size_t k = 0; k < sellers.size(); ++k) {
    const std::size_t i = sellers[k];
    const double back = std::min(truncated[k], residue);
    residue -= back;
    tr.sold[i] = truncated[k] - back;
    out.holdings[i] = r[i] - tr.sold[i];
    out.payments[i] = -tr.sold[i] * tr.price;
  }

  out.burned = sum_of(out.payments);
  if (out.burned < -kBudgetTolerance)
    throw std::logic_error("ad_mechanism ran a deficit of " + std::to_string(-out.burned));
  return tr;
}

double optimal_welfare(const Instance& inst) {
  inst.validate();
  std::vector<std::pair<double, double>> segments;  // (slope, length)
  for (const ConcaveFn& v : inst.valuations) {
    const auto pts = v.breakpoints();
    for (std::size_t k = 0; k < v.slopes().size(); ++k)
      segments.emplace_back(v.slopes()[k], pts[k + 1].x - pts[k].x);
    if (pts.back().x < 1.0) segments.emplace_back(0.0, 1.0 - pts.back().x);
  }
  std::stable_sort(segments.begin(), segments.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  CompensatedSum w;
  double left = 1.0;
  for (auto [slope, length] : segments) {
    if (left <= 0.0) break;
    const double take = std::min(left, length);
    w += slope * take;
    left -= take;
  }
  return w.value();
}

}  // namespace reallocation::arrow_debreu
