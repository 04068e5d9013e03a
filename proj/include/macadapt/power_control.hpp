#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "macadapt/alloc_discrete.hpp"
#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/numeric.hpp"
#include "macadapt/weighted_region.hpp"

namespace macadapt {

/// power[i][j] is user i's transmit power in its j-th state (ascending order).
struct PowerLaw {
  std::vector<std::vector<double>> power;
};

/// Law of g = sqrt(h^2 P(h)); equal received magnitudes are merged.
inline FadingDistribution received_power_reduction(const FadingDistribution& dist, std::span<const double> power) {
  const auto& d = dist.as_discrete();
  if (power.size() != d.states.size()) throw InvalidInput("one power per state is required");
  std::vector<std::pair<double, double>> gp;
  for (std::size_t j = 0; j < d.states.size(); ++j) {
    if (!(power[j] >= 0.0)) throw InvalidInput("powers must be nonnegative");
    gp.emplace_back(std::sqrt(d.states[j] * d.states[j] * power[j]), d.probs[j]);
  }
  std::sort(gp.begin(), gp.end());
  std::vector<double> g, p;
  for (const auto& [gv, pv] : gp) {
    if (!g.empty() && gv - g.back() <= 1e-12 * std::max(1.0, gv)) {
      p.back() += pv;
    } else {
      g.push_back(gv);
      p.push_back(pv);
    }
  }
  return FadingDistribution::discrete(std::move(g), std::move(p));
}

/// Unit-power instance whose fading magnitudes are the received magnitudes.
inline MacInstance reduced_instance(const MacInstance& inst, const PowerLaw& law) {
  MacInstance out;
  out.log_base = inst.log_base;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    out.users.push_back(received_power_reduction(inst.users[i], law.power.at(i)));
    out.powers.push_back(1.0);
  }
  return out;
}

/// Weighted adaptive value of an arbitrary power law, through the reduction.
inline WeightedSumResult power_law_value(const MacInstance& inst, const PowerLaw& law, std::span<const double> w,
                                         std::size_t tie_priority = 0) {
  WeightedOptions opt;
  opt.tie_priority = tie_priority;
  return weighted_sum_capacity(reduced_instance(inst, law), w, opt);
}

struct MonotonicityReport {
  bool ok = true;
  std::size_t first = 0;  // states (first, first+1) violate h^2 P(h) nondecreasing
};

inline MonotonicityReport monotonicity_check(const FadingDistribution& dist, std::span<const double> power) {
  const auto& d = dist.as_discrete();
  if (power.size() != d.states.size()) throw InvalidInput("one power per state is required");
  for (std::size_t j = 0; j + 1 < power.size(); ++j) {
    const double a = d.states[j] * d.states[j] * power[j];
    const double b = d.states[j + 1] * d.states[j + 1] * power[j + 1];
    if (a > b + 1e-12 * std::max(1.0, b)) return {false, j};
  }
  return {};
}

struct PowerPin {
  std::size_t user = 0;
  std::size_t state = 0;  // index into the user's ascending states
  double power = 0.0;
  std::size_t block = 0;  // cell index when the problem has several blocks
};

/// One two-user sub-problem of the level-sum objective with its probability weight.
struct PowerBlock {
  MacInstance inst;      // discrete users; powers are ignored
  double weight = 1.0;
};

/// The concave level-sum objective for two discrete users under average-power
/// budgets, on the fixed grid of the original laws with the lighter-weighted
/// user transformed. Valid for laws with nondecreasing received power. Several
/// blocks (cells) may share each user's budget; usage is weighted by the block
/// probability.
class PowerProblem {
 public:
  PowerProblem(const MacInstance& inst, std::span<const double> w, std::size_t tie_priority = 0,
               std::vector<PowerPin> pins = {})
      : PowerProblem(std::vector<PowerBlock>{{inst, 1.0}}, inst.powers, w, tie_priority, std::move(pins)) {
    inst.validate();
  }

  PowerProblem(const std::vector<PowerBlock>& blocks, std::span<const double> budgets, std::span<const double> w,
               std::size_t tie_priority = 0, std::vector<PowerPin> pins = {})
      : pins_(std::move(pins)) {
    if (blocks.empty()) throw InvalidInput("power problem needs at least one block");
    if (budgets.size() != 2) throw InvalidInput("power optimization is supported for exactly two users");
    if (w.size() != 2 || !(w[0] >= 0.0) || !(w[1] >= 0.0) || !(w[0] > 0.0 || w[1] > 0.0))
      throw InvalidInput("weights must be nonnegative and not both zero");
    for (double b : budgets)
      if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidInput("power budgets must be finite and nonnegative");
    budgets_.assign(budgets.begin(), budgets.end());
    log_base_ = blocks.front().inst.log_base;
    const std::size_t a = w[0] == w[1] ? std::min<std::size_t>(tie_priority, 1) : (w[0] > w[1] ? 0 : 1);
    const std::size_t b = 1 - a;
    alpha_ = w[b] / w[a];
    scale_ = w[a];
    std::size_t next = 0;
    for (const auto& blk : blocks) {
      if (blk.inst.size() != 2) throw InvalidInput("power optimization is supported for exactly two users");
      if (!blk.inst.all_discrete()) throw InvalidInput("power optimization needs discrete laws; discretize first");
      Block B;
      B.weight = blk.weight;
      for (std::size_t i = 0; i < 2; ++i) {
        const auto& d = blk.inst.users[i].as_discrete();
        B.states[i] = d.states;
        B.probs[i] = d.probs;
        B.offset[i] = next;
        next += d.states.size();
      }
      std::vector<FadingDistribution> solved = blk.inst.users;
      if (alpha_ > 0.0) solved[b] = transform_weighted(blk.inst.users[b], alpha_);
      const auto grid = build_level_grid(alpha_ > 0.0 ? solved : std::vector<FadingDistribution>{blk.inst.users[a]});
      const std::size_t L = grid.num_levels();
      B.delta = grid.widths;
      for (std::size_t i = 0; i < 2; ++i) {
        B.idx[i].assign(L, kNone);
        B.h2[i].assign(L, 0.0);
      }
      for (std::size_t gi = 0; gi < grid.num_users(); ++gi) {
        const std::size_t i = alpha_ > 0.0 ? gi : a;
        for (std::size_t l = 0; l < L; ++l) {
          const double h = grid.states[gi][l];
          auto it = std::lower_bound(B.states[i].begin(), B.states[i].end(), h);
          if (it != B.states[i].end() && *it == h) {
            B.idx[i][l] = std::size_t(it - B.states[i].begin());
            B.h2[i][l] = h * h;
          }
        }
      }
      blocks_.push_back(std::move(B));
    }
    size_ = next;
    for (const auto& pin : pins_) {
      if (pin.block >= blocks_.size() || pin.user >= 2 || pin.state >= blocks_[pin.block].states[pin.user].size() ||
          !(pin.power >= 0.0))
        throw InvalidInput("power pin refers to a missing state or is negative");
    }
    for (std::size_t i = 0; i < 2; ++i) {
      double used = 0.0;
      for (const auto& pin : pins_)
        if (pin.user == i) used += blocks_[pin.block].weight * blocks_[pin.block].probs[i][pin.state] * pin.power;
      if (used > budgets_[i] * (1 + 1e-12) + 1e-15) throw InvalidInput("pinned powers exceed the budget");
      for (std::size_t bk = 0; bk < blocks_.size(); ++bk) {
        double last_g = 0.0;
        for (std::size_t j = 0; j < blocks_[bk].states[i].size(); ++j) {
          if (auto v = pinned(bk, i, j)) {
            const double g = blocks_[bk].states[i][j] * blocks_[bk].states[i][j] * *v;
            if (g < last_g) throw InvalidInput("pinned powers violate nondecreasing received power");
            last_g = g;
          }
        }
      }
    }
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  double alpha() const noexcept { return alpha_; }
  const std::vector<double>& states(std::size_t i, std::size_t block = 0) const { return blocks_[block].states[i]; }
  const std::vector<double>& probs(std::size_t i, std::size_t block = 0) const { return blocks_[block].probs[i]; }
  double budget(std::size_t i) const { return budgets_[i]; }
  std::size_t offset(std::size_t i, std::size_t block = 0) const { return blocks_[block].offset[i]; }
  const std::vector<PowerPin>& pins() const noexcept { return pins_; }

  /// w . E[R] for the law with received powers g = h^2 P.
  double value(std::span<const double> x) const {
    std::vector<double> terms;
    for (const auto& B : blocks_)
      for (std::size_t l = 0; l < B.delta.size(); ++l)
        terms.push_back(B.weight * B.delta[l] * half_log1p(snr(B, x, l), log_base_));
    return scale_ * stable_sum(terms);
  }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(size(), 0.0);
    for (const auto& B : blocks_) {
      for (std::size_t l = 0; l < B.delta.size(); ++l) {
        const double c = scale_ * B.weight * B.delta[l] * log_scale(log_base_) / (2.0 * (1.0 + snr(B, x, l)));
        for (std::size_t i = 0; i < 2; ++i)
          if (B.idx[i][l] != kNone) g[B.offset[i] + B.idx[i][l]] += c * B.h2[i][l];
      }
    }
    return g;
  }

  /// Negated diagonal of the Hessian, floored so it can serve as a metric.
  std::vector<double> curvature(std::span<const double> x) const {
    std::vector<double> d(size(), 0.0);
    for (const auto& B : blocks_) {
      for (std::size_t l = 0; l < B.delta.size(); ++l) {
        const double s = 1.0 + snr(B, x, l);
        const double c = scale_ * B.weight * B.delta[l] * log_scale(log_base_) / (2.0 * s * s);
        for (std::size_t i = 0; i < 2; ++i)
          if (B.idx[i][l] != kNone) d[B.offset[i] + B.idx[i][l]] += c * B.h2[i][l] * B.h2[i][l];
      }
    }
    const double peak = *std::max_element(d.begin(), d.end());
    for (auto& v : d) v = std::max(v, 1e-6 * peak + 1e-300);
    return d;
  }

  /// Projection onto {P >= 0, budgets, h^2 P nondecreasing, pins} in the
  /// metric sum_k d_k (P_k - y_k)^2; Euclidean when `metric` is empty.
  std::vector<double> project(std::span<const double> y, std::span<const double> metric = {}) const {
    std::vector<double> out(size());
    std::vector<double> ones;
    if (metric.empty()) {
      ones.assign(size(), 1.0);
      metric = ones;
    }
    for (std::size_t i = 0; i < 2; ++i) project_user(i, y, metric, out);
    return out;
  }

  PowerLaw unstack(std::span<const double> x, std::size_t block = 0) const {
    PowerLaw law;
    const auto& B = blocks_[block];
    for (std::size_t i = 0; i < 2; ++i) {
      const auto first = x.begin() + std::ptrdiff_t(B.offset[i]);
      law.power.emplace_back(first, first + std::ptrdiff_t(B.states[i].size()));
    }
    return law;
  }

  std::vector<double> stack(const PowerLaw& law) const {
    if (blocks_.size() != 1) throw InvalidInput("stacking a single law needs a single-block problem");
    std::vector<double> x;
    for (std::size_t i = 0; i < 2; ++i) {
      if (law.power.at(i).size() != blocks_[0].states[i].size()) throw InvalidInput("one power per state is required");
      x.insert(x.end(), law.power[i].begin(), law.power[i].end());
    }
    return x;
  }

  /// Every budget spent evenly: P = budget on all states with h > 0.
  std::vector<double> constant_start() const {
    std::vector<double> x(size(), 0.0);
    for (const auto& B : blocks_)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < B.states[i].size(); ++j)
          if (B.states[i][j] > 0.0) x[B.offset[i] + j] = budgets_[i];
    return project(x);
  }

  /// Every budget spent on the top states.
  std::vector<double> top_start() const {
    std::vector<double> x(size(), 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
      double mass = 0.0;
      for (const auto& B : blocks_) mass += B.weight * B.probs[i].back();
      for (const auto& B : blocks_) x[B.offset[i] + B.states[i].size() - 1] = budgets_[i] / mass;
    }
    return project(x);
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Block {
    double weight = 1.0;
    std::array<std::vector<double>, 2> states, probs;
    std::array<std::size_t, 2> offset{};
    std::vector<double> delta;
    std::array<std::vector<std::size_t>, 2> idx;
    std::array<std::vector<double>, 2> h2;
  };

  double snr(const Block& B, std::span<const double> x, std::size_t l) const {
    double s = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      if (B.idx[i][l] != kNone) s += B.h2[i][l] * x[B.offset[i] + B.idx[i][l]];
    return s;
  }

  std::optional<double> pinned(std::size_t block, std::size_t i, std::size_t j) const {
    for (const auto& p : pins_)
      if (p.block == block && p.user == i && p.state == j) return p.power;
    return std::nullopt;
  }

  // argmin sum d (P - (y - lambda c p / d))^2 over the pinned monotone cone of
  // one block, in g = h^2 P; c is the block weight. Writes into out.
  void cone_projection(std::size_t bk, std::size_t i, std::span<const double> yall, std::span<const double> dall,
                       double lambda, std::span<double> outall) const {
    const auto& B = blocks_[bk];
    const auto& h = B.states[i];
    const std::size_t n = h.size();
    auto y = yall.subspan(B.offset[i], n);
    auto d = dall.subspan(B.offset[i], n);
    auto out = outall.subspan(B.offset[i], n);
    std::vector<double> p(n);
    for (std::size_t j = 0; j < n; ++j) p[j] = B.weight * B.probs[i][j];
    std::size_t j = 0;
    double lower = 0.0;
    while (j < n) {
      if (auto v = pinned(bk, i, j)) {
        out[j] = *v;
        lower = std::max(lower, h[j] * h[j] * *v);
        ++j;
        continue;
      }
      if (h[j] == 0.0) {
        out[j] = std::max(0.0, y[j] - lambda * p[j] / d[j]);
        ++j;
        continue;
      }
      std::size_t k = j;
      std::vector<double> target, weight;
      while (k < n && !pinned(bk, i, k)) {
        const double h2 = h[k] * h[k];
        target.push_back(h2 * (y[k] - lambda * p[k] / d[k]));
        weight.push_back(d[k] / (h2 * h2));
        ++k;
      }
      const double upper = k < n ? h[k] * h[k] * *pinned(bk, i, k) : std::numeric_limits<double>::infinity();
      auto g = isotonic_regression(target, weight);
      for (std::size_t m = 0; m < g.size(); ++m) out[j + m] = std::clamp(g[m], lower, upper) / (h[j + m] * h[j + m]);
      j = k;
    }
  }

  double cone_usage(std::size_t i, std::span<const double> y, std::span<const double> d, double lambda,
                    std::span<double> out) const {
    double u = 0.0;
    for (std::size_t bk = 0; bk < blocks_.size(); ++bk) {
      cone_projection(bk, i, y, d, lambda, out);
      const auto& B = blocks_[bk];
      for (std::size_t j = 0; j < B.states[i].size(); ++j) u += B.weight * B.probs[i][j] * out[B.offset[i] + j];
    }
    return u;
  }

  void project_user(std::size_t i, std::span<const double> y, std::span<const double> d,
                    std::span<double> out) const {
    if (cone_usage(i, y, d, 0.0, out) <= budgets_[i]) return;
    double lo = 0.0, hi = 1.0;
    for (const auto& B : blocks_)
      for (std::size_t j = 0; j < B.states[i].size(); ++j) {
        const std::size_t k = B.offset[i] + j;
        hi = std::max(hi, 2.0 * std::abs(y[k]) * d[k] / (B.weight * B.probs[i][j]));
      }
    while (cone_usage(i, y, d, hi, out) > budgets_[i]) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cone_usage(i, y, d, mid, out) > budgets_[i] ? lo : hi) = mid;
    }
    cone_usage(i, y, d, hi, out);
  }

  LogBase log_base_ = LogBase::bits;
  std::vector<PowerPin> pins_;
  double alpha_ = 1.0, scale_ = 1.0;
  std::vector<double> budgets_;
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

/// Value and gradient with weights (1, alpha) and powers stacked user by user.
inline std::pair<double, std::vector<double>> power_objective(const MacInstance& inst, double alpha,
                                                              std::span<const double> x) {
  const std::vector<double> w{1.0, alpha};
  PowerProblem prob(inst, w);
  if (x.size() != prob.size()) throw InvalidInput("one power per state is required");
  for (double v : x)
    if (!(v >= 0.0)) throw InvalidInput("powers must be nonnegative");
  return {prob.value(x), prob.gradient(x)};
}

struct PowerOptions {
  double tol = 1e-7;             // projected-gradient mapping norm
  std::size_t max_iter = 100000;
  std::vector<PowerPin> pins;
  bool restart = true;           // rerun from a second feasible start
  bool trace = false;
  std::size_t tie_priority = 0;
};

struct TracePoint {
  std::size_t iter = 0;
  double value = 0.0, grad_norm = 0.0;
};

struct PowerOptResult {
  PowerLaw law;
  double value = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double restart_value = std::numeric_limits<double>::quiet_NaN();
  std::vector<FadingDistribution> received;
  std::vector<double> expected;  // E[R_i] under the optimal law
  std::vector<TracePoint> trace;
};

namespace detail {

inline double mapping_norm(const PowerProblem& prob, std::span<const double> x) {
  auto g = prob.gradient(x);
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += g[k];
  auto p = prob.project(y);
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += (x[k] - p[k]) * (x[k] - p[k]);
  return std::sqrt(s);
}

struct AscentRun {
  std::vector<double> x;
  double value = 0.0, residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Projected gradient ascent with Armijo backtracking along the projection arc,
// scaled by the Hessian diagonal; projections use the same diagonal metric.
inline AscentRun projected_ascent(const PowerProblem& prob, std::vector<double> x, const PowerOptions& opt,
                                  std::vector<TracePoint>* trace) {
  AscentRun run;
  double f = prob.value(x), step = 1.0;
  for (std::size_t it = 0;; ++it) {
    const double res = mapping_norm(prob, x);
    if (trace) trace->push_back({it, f, res});
    if (res < opt.tol || it >= opt.max_iter) {
      run = {std::move(x), f, res, it, res < opt.tol};
      return run;
    }
    const auto g = prob.gradient(x);
    const auto d = prob.curvature(x);
    step = std::min(step * 2.0, 1e4);
    for (;;) {
      std::vector<double> y(x);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += step * g[k] / d[k];
      auto cand = prob.project(y, d);
      double dir = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) dir += g[k] * (cand[k] - x[k]);
      const double fc = prob.value(cand);
      if (fc >= f + 1e-4 * dir || step < 1e-14) {
        x = std::move(cand);
        f = fc;
        break;
      }
      step *= 0.5;
    }
  }
}

}  // namespace detail

struct PowerSolve {
  std::vector<double> x;
  double value = 0.0, residual = 0.0;
  double restart_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

/// Runs the ascent from the even start and, optionally, from the top-state start.
inline PowerSolve solve_power_problem(const PowerProblem& prob, const PowerOptions& opt) {
  PowerSolve out;
  auto run = detail::projected_ascent(prob, prob.constant_start(), opt, opt.trace ? &out.trace : nullptr);
  out.residual = run.residual;
  out.iterations = run.iterations;
  out.converged = run.converged;
  if (opt.restart) {
    auto again = detail::projected_ascent(prob, prob.top_start(), opt, nullptr);
    out.restart_value = again.value;
    out.converged = out.converged && again.converged;
    if (again.value > run.value) run = std::move(again);
  }
  out.x = std::move(run.x);
  out.value = run.value;
  return out;
}

/// Maximizes w . E[R] over average-power laws with nondecreasing received power.
inline PowerOptResult optimize_power(const MacInstance& inst, std::span<const double> w, const PowerOptions& opt = {}) {
  PowerProblem prob(inst, w, opt.tie_priority, opt.pins);
  auto sol = solve_power_problem(prob, opt);
  PowerOptResult res;
  res.value = sol.value;
  res.kkt_residual = sol.residual;
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  res.restart_value = sol.restart_value;
  res.trace = std::move(sol.trace);
  res.law = prob.unstack(sol.x);
  auto reduced = reduced_instance(inst, res.law);
  res.received = reduced.users;
  WeightedOptions wo;
  wo.tie_priority = opt.tie_priority;
  res.expected = weighted_sum_capacity(reduced, w, wo).expected;
  return res;
}

inline PowerOptResult optimize_power(const MacInstance& inst, double alpha, const PowerOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0,1]");
  const std::vector<double> w{1.0, alpha};
  return optimize_power(inst, w, opt);
}

/// Power-adaptive region: optimize_power over the alpha grid in both weight orderings.
inline RegionBoundary power_region_sweep(const MacInstance& inst, std::vector<double> alpha_grid,
                                         PowerOptions opt = {}) {
  return sweep_with(
      [&](const std::vector<double>& w, std::size_t direction) {
        PowerOptions o = opt;
        o.tie_priority = direction - 1;
        auto r = optimize_power(inst, w, o);
        struct Sample {
          std::vector<double> expected;
          double value;
          bool discretized;
        };
        return Sample{r.expected, r.value, false};
      },
      std::move(alpha_grid));
}

struct WaterfillResult {
  double mu = 0.0;            // water level
  std::vector<double> states, probs, powers;  // per-slot power P(h) = max(0, mu - 1/h^2)
  double rate = 0.0;          // tau E[1/2 log(1 + h^2 P(h))]
};

/// Single-user water-filling over a time share tau: tau E[P(H)] = P_avg.
inline WaterfillResult tdma_waterfill(const FadingDistribution& dist, double p_avg, double tau,
                                      LogBase base = LogBase::bits, double delta = 1e-3) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidInput("time share must lie in (0,1]");
  if (!(p_avg >= 0.0) || !std::isfinite(p_avg)) throw InvalidInput("power budget must be finite and nonnegative");
  const auto disc = dist.is_discrete() ? dist : discretize_lower(dist, delta);
  const auto& d = disc.as_discrete();
  WaterfillResult res{.mu = 0.0, .states = d.states, .probs = d.probs,
                      .powers = std::vector<double>(d.states.size(), 0.0), .rate = 0.0};
  double mass = 0.0, worst = 0.0;
  for (std::size_t j = 0; j < d.states.size(); ++j) {
    if (d.states[j] > 0.0) {
      mass += d.probs[j];
      worst = std::max(worst, 1.0 / (d.states[j] * d.states[j]));
    }
  }
  if (p_avg == 0.0 || mass == 0.0) return res;
  auto spent = [&](double mu) {
    double s = 0.0;
    for (std::size_t j = 0; j < d.states.size(); ++j)
      if (d.states[j] > 0.0) s += d.probs[j] * std::max(0.0, mu - 1.0 / (d.states[j] * d.states[j]));
    return tau * s;
  };
  double lo = 0.0, hi = p_avg / (tau * mass) + worst;
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (spent(mid) < p_avg ? lo : hi) = mid;
  }
  double mu = 0.5 * (lo + hi);
  // Polish with the closed form on the active set the bisection settled on.
  double num = p_avg / tau, den = 0.0;
  for (std::size_t j = 0; j < d.states.size(); ++j) {
    if (d.states[j] > 0.0 && mu > 1.0 / (d.states[j] * d.states[j])) {
      num += d.probs[j] / (d.states[j] * d.states[j]);
      den += d.probs[j];
    }
  }
  if (den > 0.0) {
    const double exact = num / den;
    bool same = true;
    for (double h : d.states)
      if (h > 0.0) same = same && ((mu > 1.0 / (h * h)) == (exact > 1.0 / (h * h)));
    if (same) mu = exact;
  }
  res.mu = mu;
  std::vector<double> terms;
  for (std::size_t j = 0; j < d.states.size(); ++j) {
    const double h = d.states[j];
    res.powers[j] = h > 0.0 ? std::max(0.0, mu - 1.0 / (h * h)) : 0.0;
    terms.push_back(d.probs[j] * half_log1p(h * h * res.powers[j], base));
  }
  res.rate = tau * stable_sum(terms);
  return res;
}

struct TdmaSweep {
  std::vector<double> taus, values;
  double best_tau = 0.0, best_value = 0.0;
};

/// Two-user TDMA with water-filling in each slot; user 1 holds share tau.
inline TdmaSweep best_tdma(const MacInstance& inst, std::span<const double> w, std::size_t points = 65) {
  inst.validate();
  if (inst.size() != 2) throw InvalidInput("TDMA sweep is defined for two users");
  if (points < 2) throw InvalidInput("TDMA sweep needs at least two time shares");
  TdmaSweep s;
  s.best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points; ++k) {
    const double tau = double(k) / double(points - 1);
    double v = 0.0;
    if (tau > 0.0) v += w[0] * tdma_waterfill(inst.users[0], inst.powers[0], tau, inst.log_base).rate;
    if (tau < 1.0) v += w[1] * tdma_waterfill(inst.users[1], inst.powers[1], 1.0 - tau, inst.log_base).rate;
    s.taus.push_back(tau);
    s.values.push_back(v);
    if (v > s.best_value) {
      s.best_value = v;
      s.best_tau = tau;
    }
  }
  return s;
}

/// Equal slots, constant power at the cap, no adaptation.
inline double equal_slot_tdma(const MacInstance& inst) {
  inst.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const double p = inst.powers[i];
    total += inst.users[i].expectation([&](double h) { return half_log1p(h * h * p, inst.log_base); });
  }
  return total / double(inst.size());
}

/// Full-time water-filling law per user (tau = 1).
inline PowerLaw waterfill_law(const MacInstance& inst) {
  PowerLaw law;
  for (std::size_t i = 0; i < inst.size(); ++i)
    law.power.push_back(tdma_waterfill(inst.users[i], inst.powers[i], 1.0, inst.log_base).powers);
  return law;
}

/// Adaptive rates on top of each user's full-time water-filling power law.
inline double waterfill_rate_adaptation(const MacInstance& inst, std::span<const double> w) {
  if (!inst.all_discrete()) throw InvalidInput("discretize before applying a power law");
  return power_law_value(inst, waterfill_law(inst), w).value;
}

}  // namespace macadapt
