#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "macadapt/alloc_continuous.hpp"
#include "macadapt/alloc_discrete.hpp"
#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/verify.hpp"

namespace macadapt {

/// One user transmits at its single-user capacity, the other is silent.
struct SingleUserLaw {
  std::size_t active = 0;
  std::vector<double> powers;
  LogBase log_base = LogBase::bits;
};

/// Any of the rate laws the library constructs, queried uniformly.
class RateLaw {
 public:
  using Variant = std::variant<DiscreteRateLaw, ContinuousRateLaw, SingleUserLaw>;

  RateLaw(Variant v) : law_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  /// A discrete law on lower-endpoint cells, queried at the largest state not above h.
  static RateLaw floored(DiscreteRateLaw law) {
    RateLaw out(std::move(law));
    out.floor_lookup_ = true;
    return out;
  }
  bool floor_lookup() const noexcept { return floor_lookup_; }

  const Variant& variant() const noexcept { return law_; }
  const DiscreteRateLaw* discrete() const { return std::get_if<DiscreteRateLaw>(&law_); }
  const ContinuousRateLaw* continuous() const { return std::get_if<ContinuousRateLaw>(&law_); }

  double rate(std::size_t i, double h) const {
    struct Visitor {
      std::size_t i;
      double h;
      bool floored;
      double operator()(const DiscreteRateLaw& l) const {
        if (!floored) return l.rate(i, h);
        const auto& st = l.user_law(i).states;
        auto it = std::upper_bound(st.begin(), st.end(), h + 1e-12);
        if (it == st.begin()) throw InvalidInput("magnitude below the lowest discretized state");
        return l.state_rates[i][std::size_t(it - st.begin()) - 1];
      }
      double operator()(const ContinuousRateLaw& l) const { return l.rate(i, std::max(h, l.floor(i))); }
      double operator()(const SingleUserLaw& l) const {
        return i == l.active ? half_log1p(h * h * l.powers[i], l.log_base) : 0.0;
      }
    };
    return std::visit(Visitor{i, h, floor_lookup_}, law_);
  }

  /// E[R_i(H)] for H distributed as `under`.
  double expected_rate(std::size_t i, const FadingDistribution& under) const {
    if (const auto* c = continuous()) return c->expected_rate(i, &under);
    if (const auto* d = discrete(); d && floor_lookup_) {
      // Exact: R is constant between consecutive states.
      const auto& st = d->user_law(i).states;
      double total = 0.0;
      for (std::size_t j = 0; j < st.size(); ++j) {
        const double upper = j + 1 < st.size() ? under.cdf_below(st[j + 1]) : 1.0;
        total += d->state_rates[i][j] * (upper - under.cdf_below(st[j]));
      }
      return total;
    }
    return under.expectation([&](double h) { return rate(i, h); });
  }

 private:
  Variant law_;
  bool floor_lookup_ = false;
};

struct WeightedOptions {
  double fallback_delta = 1e-3;  // discretization step when no exact path applies
  std::size_t nodes = 1000;      // tabulation nodes for the integral construction
  std::size_t tie_priority = 0;  // user treated as heavier when the weights are equal
};

struct WeightedSumResult {
  double value = 0.0;                  // max of w1 E[R1] + w2 E[R2]
  std::vector<double> expected;        // E[R_i] under the original laws
  std::size_t priority = 0;            // user carrying the larger weight
  double alpha = 1.0;                  // smaller weight / larger weight
  std::vector<FadingDistribution> solved_users;  // laws the unweighted problem was solved on
  RateLaw law;
  bool discretized = false;
  double consistency_gap = 0.0;        // |w . expected - value|
};

namespace detail {

inline double single_user_value(const FadingDistribution& d, double power, LogBase base) {
  return d.expectation([&](double h) { return half_log1p(h * h * power, base); });
}

// The unweighted problem on `users` with the priority user first at every level.
inline RateLaw solve_unweighted_pair(const std::vector<FadingDistribution>& users, std::span<const double> power,
                                     std::size_t priority, LogBase base, const WeightedOptions& opt,
                                     bool& discretized, double& sum_value) {
  const std::vector<std::size_t> order{priority, 1 - priority};
  auto solve_discrete = [&](const std::vector<FadingDistribution>& us, bool floored) {
    auto grid = build_level_grid(us);
    auto law = allocate_flexible(grid, power, priority_chooser(order), base);
    auto e = expected_rates(law);
    sum_value = e[0] + e[1];
    return floored ? RateLaw::floored(std::move(law)) : RateLaw(std::move(law));
  };
  bool all_discrete = users[0].is_discrete() && users[1].is_discrete();
  if (all_discrete) return solve_discrete(users, false);
  if (continuous_path_applies(users)) {
    std::vector<double> start(2);
    const double h0p = users[priority].support_min(), h0o = users[1 - priority].support_min();
    start[priority] = half_log1p(h0p * h0p * power[priority], base);
    start[1 - priority] = half_log1p(h0p * h0p * power[priority] + h0o * h0o * power[1 - priority], base) -
                          start[priority];
    ContinuousRateLaw law(users, {power.begin(), power.end()}, start, base, opt.nodes);
    auto e = law.expected_rates();
    sum_value = e[0] + e[1];
    return RateLaw(std::move(law));
  }
  discretized = true;
  std::vector<FadingDistribution> approx;
  for (const auto& u : users) approx.push_back(u.is_discrete() ? u : discretize_lower(u, opt.fallback_delta));
  return solve_discrete(approx, true);
}

}  // namespace detail

/// Weighted adaptive sum-capacity of a two-user instance. The smaller weight
/// is absorbed into the weaker user's law as an atom at zero, after which the
/// unweighted construction is optimal; its law is used on the original laws.
inline WeightedSumResult weighted_sum_capacity(const MacInstance& inst, std::span<const double> w,
                                               const WeightedOptions& opt = {}) {
  inst.validate();
  if (inst.size() != 2) throw InvalidInput("weighted sums are supported for exactly two users");
  if (w.size() != 2 || !(w[0] >= 0.0) || !(w[1] >= 0.0) || !(w[0] > 0.0 || w[1] > 0.0))
    throw InvalidInput("weights must be nonnegative and not both zero");
  const std::size_t a = w[0] == w[1] ? std::min<std::size_t>(opt.tie_priority, 1) : (w[0] > w[1] ? 0 : 1);
  const std::size_t b = 1 - a;
  const double alpha = w[b] / w[a];
  WeightedSumResult res{.value = 0.0, .expected = {}, .priority = a, .alpha = alpha, .solved_users = {},
                        .law = RateLaw(SingleUserLaw{a, inst.powers, inst.log_base})};
  if (alpha == 0.0) {
    res.value = w[a] * detail::single_user_value(inst.users[a], inst.powers[a], inst.log_base);
    res.expected.assign(2, 0.0);
    res.expected[a] = res.value / w[a];
    res.solved_users = inst.users;
    return res;
  }
  res.solved_users = inst.users;
  res.solved_users[b] = transform_weighted(inst.users[b], alpha);
  double sum_value = 0.0;
  res.law = detail::solve_unweighted_pair(res.solved_users, inst.powers, a, inst.log_base, opt, res.discretized,
                                          sum_value);
  res.value = w[a] * sum_value;
  res.expected = {res.law.expected_rate(0, inst.users[0]), res.law.expected_rate(1, inst.users[1])};
  res.consistency_gap = std::abs(w[0] * res.expected[0] + w[1] * res.expected[1] - res.value);
  return res;
}

/// The law evaluated on the original discrete supports, for exhaustive checks.
inline DiscreteStrategy strategy_on_original(const RateLaw& law, const MacInstance& inst) {
  if (!inst.all_discrete()) throw InvalidInput("strategy extraction needs discrete users");
  DiscreteStrategy s;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& d = inst.users[i].as_discrete();
    s.states.push_back(d.states);
    s.probs.push_back(d.probs);
    std::vector<double> r;
    for (double h : d.states) r.push_back(law.rate(i, h));
    s.rates.push_back(std::move(r));
    s.powers.emplace_back(d.states.size(), inst.powers[i]);
  }
  return s;
}

struct RegionPoint {
  double alpha = 0.0;
  std::size_t direction = 1;  // 1-based user holding weight 1; the other holds alpha
  double er1 = 0.0, er2 = 0.0;
  double weighted_value = 0.0;
};

struct RegionBoundary {
  std::vector<RegionPoint> points;
  std::vector<double> alpha_grid;
  std::size_t convexity_violations = 0;
  double max_convexity_violation = 0.0;  // max over (k, j) of w_k.p_j - w_k.p_k
  bool discretized = false;
};

/// alpha_k = (1 - cos(pi k / (n-1))) / 2: dense near both ends.
inline std::vector<double> cosine_alpha_grid(std::size_t n = 33) {
  if (n < 2) return {1.0};
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(k + 1 == n ? 1.0 : 0.5 * (1.0 - std::cos(std::numbers::pi * double(k) / double(n - 1))));
  return out;
}

inline std::vector<double> direction_weights(std::size_t direction, double alpha) {
  return direction == 1 ? std::vector<double>{1.0, alpha} : std::vector<double>{alpha, 1.0};
}

/// Flags (without repairing) points that fail the support-function test:
/// each point must maximize its own weighted sum over all recorded points.
inline void check_convexity(RegionBoundary& rb, double tol = 1e-6) {
  rb.convexity_violations = 0;
  rb.max_convexity_violation = 0.0;
  for (const auto& pk : rb.points) {
    const auto w = direction_weights(pk.direction, pk.alpha);
    const double own = w[0] * pk.er1 + w[1] * pk.er2;
    for (const auto& pj : rb.points) {
      const double gap = w[0] * pj.er1 + w[1] * pj.er2 - own;
      rb.max_convexity_violation = std::max(rb.max_convexity_violation, gap);
      if (gap > tol) ++rb.convexity_violations;
    }
  }
}

template <class Solver>
RegionBoundary sweep_with(Solver&& solve, std::vector<double> alpha_grid) {
  if (alpha_grid.empty()) throw InvalidInput("alpha grid must be nonempty");
  RegionBoundary rb;
  rb.alpha_grid = alpha_grid;
  for (std::size_t direction : {std::size_t(1), std::size_t(2)}) {
    for (double alpha : alpha_grid) {
      if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("alpha values must lie in [0,1]");
      const auto w = direction_weights(direction, alpha);
      const auto r = solve(w, direction);
      rb.discretized = rb.discretized || r.discretized;
      rb.points.push_back({alpha, direction, r.expected[0], r.expected[1], r.value});
    }
  }
  check_convexity(rb);
  return rb;
}

/// Boundary of the two-user adaptive capacity region traced by weighted sums
/// in both weight orderings.
inline RegionBoundary region_sweep(const MacInstance& inst, std::vector<double> alpha_grid = cosine_alpha_grid(),
                                   const WeightedOptions& opt = {}) {
  return sweep_with(
      [&](const std::vector<double>& w, std::size_t direction) {
        WeightedOptions o = opt;
        o.tie_priority = direction - 1;
        return weighted_sum_capacity(inst, w, o);
      },
      std::move(alpha_grid));
}

/// LP optimum minus the transform value for discrete instances.
inline double verify_weighted_converse(const MacInstance& inst, std::span<const double> w) {
  return lp_oracle_weighted_sum(inst, w).value - weighted_sum_capacity(inst, w).value;
}

}  // namespace macadapt
