#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "macadapt/alloc_discrete.hpp"
#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/lp.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/rng.hpp"

namespace macadapt {

inline constexpr std::size_t kMaxLpTuples = 4096;
inline constexpr std::size_t kMaxExhaustiveTuples = 1000000;

struct LpOracleResult {
  double value = 0.0;
  std::vector<std::vector<double>> rates;  // rates[i][j] for user i, state j
  std::size_t constraints = 0;
};

namespace detail {

inline std::size_t tuple_count(const std::vector<FadingDistribution>& users, std::size_t cap) {
  std::size_t total = 1;
  for (const auto& u : users) {
    total *= u.as_discrete().states.size();
    if (total > cap) return cap + 1;
  }
  return total;
}

// Calls visit(states_index) for every combination of the listed users' states.
template <class Visit>
void for_each_subtuple(const std::vector<FadingDistribution>& users, const std::vector<std::size_t>& members,
                       Visit&& visit) {
  std::vector<std::size_t> idx(members.size(), 0);
  for (;;) {
    visit(idx);
    std::size_t k = 0;
    for (; k < members.size(); ++k) {
      if (++idx[k] < users[members[k]].as_discrete().states.size()) break;
      idx[k] = 0;
    }
    if (k == members.size()) return;
  }
}

}  // namespace detail

/// Maximizes sum_i w_i E[R_i] over all per-state rate laws subject to every
/// subset constraint for every state tuple, by an independent dense LP.
inline LpOracleResult lp_oracle_weighted_sum(const MacInstance& inst, std::span<const double> w) {
  inst.validate();
  const std::size_t n = inst.size();
  if (w.size() != n) throw InvalidInput("one weight per user is required");
  if (detail::tuple_count(inst.users, kMaxLpTuples) > kMaxLpTuples)
    throw SolverError("LP oracle refuses instances with more than 4096 state tuples");
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offset[i + 1] = offset[i] + inst.users[i].as_discrete().states.size();
  std::vector<double> c(offset[n]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = inst.users[i].as_discrete();
    for (std::size_t j = 0; j < d.states.size(); ++j) c[offset[i] + j] = w[i] * d.probs[j];
  }
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (SubsetMask s = 1; s <= full_mask(n); ++s) {
    const auto members = subset_members(s);
    detail::for_each_subtuple(inst.users, members, [&](const std::vector<std::size_t>& idx) {
      std::vector<double> row(offset[n], 0.0);
      double snr = 0.0;
      for (std::size_t k = 0; k < members.size(); ++k) {
        const std::size_t i = members[k];
        const double h = inst.users[i].as_discrete().states[idx[k]];
        row[offset[i] + idx[k]] = 1.0;
        snr += h * h * inst.powers[i];
      }
      A.push_back(std::move(row));
      b.push_back(half_log1p(snr, inst.log_base));
    });
  }
  auto sol = DenseSimplex(A, b, c).solve();
  LpOracleResult out;
  out.value = sol.value;
  out.constraints = b.size();
  for (std::size_t i = 0; i < n; ++i)
    out.rates.emplace_back(sol.x.begin() + std::ptrdiff_t(offset[i]), sol.x.begin() + std::ptrdiff_t(offset[i + 1]));
  return out;
}

/// A per-state rate and power assignment for discrete users.
struct DiscreteStrategy {
  std::vector<std::vector<double>> states, probs, rates, powers;

  static DiscreteStrategy from_law(const DiscreteRateLaw& law) {
    DiscreteStrategy s;
    for (std::size_t i = 0; i < law.num_users(); ++i) {
      const auto& d = law.user_law(i);
      s.states.push_back(d.states);
      s.probs.push_back(d.probs);
      s.rates.push_back(law.state_rates[i]);
      s.powers.emplace_back(d.states.size(), law.powers[i]);
    }
    return s;
  }
};

struct OutageReport {
  bool pass = true;
  bool vacuous = false;
  double max_violation = -std::numeric_limits<double>::infinity();
  std::vector<double> worst_tuple;       // magnitudes of the worst state tuple
  std::vector<std::size_t> worst_subset; // 1-based user ids; empty when nothing is violated
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  double tol = 0.0;

  void absorb(const FeasibilityResult& f, std::span<const double> h) {
    if (f.max_violation > max_violation) {
      max_violation = f.max_violation;
      worst_tuple.assign(h.begin(), h.end());
      worst_subset.clear();
      for (std::size_t i : subset_members(f.worst_subset)) worst_subset.push_back(i + 1);
    }
  }
  void finish() {
    pass = n == 0 || max_violation <= tol;
    vacuous = n == 0;
    if (n == 0) max_violation = 0.0;
    if (max_violation <= 0.0) worst_subset.clear();
  }
};

/// Checks every state tuple and every user subset.
inline OutageReport exhaustive_outage_check(const DiscreteStrategy& s, double tol, LogBase base = LogBase::bits) {
  const std::size_t n = s.states.size();
  std::size_t total = 1;
  for (const auto& st : s.states) {
    total *= st.size();
    if (total > kMaxExhaustiveTuples) throw SolverError("exhaustive check refuses more than 10^6 state tuples");
  }
  OutageReport rep;
  rep.tol = tol;
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> h(n), r(n), p(n);
  for (;;) {
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = s.states[i][idx[i]];
      r[i] = s.rates[i][idx[i]];
      p[i] = s.powers[i][idx[i]];
    }
    rep.absorb(is_feasible(r, h, p, tol, base), h);
    ++rep.n;
    std::size_t k = 0;
    for (; k < n; ++k) {
      if (++idx[k] < s.states[k].size()) break;
      idx[k] = 0;
    }
    if (k == n) break;
  }
  rep.finish();
  return rep;
}

inline OutageReport exhaustive_outage_check(const DiscreteRateLaw& law, double tol) {
  return exhaustive_outage_check(DiscreteStrategy::from_law(law), tol, law.log_base);
}

/// Draws n independent quantile tuples and checks the rate law at the induced
/// magnitudes. rate(i, h) must be defined on user i's support.
template <class RateFn>
OutageReport sampled_outage_check(const std::vector<FadingDistribution>& users, std::span<const double> power,
                                  RateFn&& rate, std::uint64_t n, std::uint64_t seed, double tol,
                                  LogBase base = LogBase::bits) {
  const std::size_t N = users.size();
  OutageReport rep;
  rep.tol = tol;
  rep.seed = seed;
  CounterRng rng(seed);
  std::vector<double> h(N), r(N);
  for (std::uint64_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < N; ++i) {
      h[i] = users[i].inverse_cdf(rng.next_open01());
      r[i] = rate(i, h[i]);
    }
    rep.absorb(is_feasible(r, h, power, tol, base), h);
    ++rep.n;
  }
  rep.finish();
  return rep;
}

struct SimResult {
  std::uint64_t blocks = 0;
  std::uint64_t seed = 0;
  std::uint64_t outages = 0;
  std::vector<double> mean_rate;
  std::vector<double> half_width;  // 95% normal-approximation half-widths
};

/// Block-fading simulation: each block draws fresh independent magnitudes,
/// every user applies its own rate and power law, and the receiver decodes iff
/// the rate tuple is inside that block's region.
template <class RateFn, class PowerFn>
SimResult simulate_blocks(const std::vector<FadingDistribution>& users, RateFn&& rate, PowerFn&& power,
                          std::uint64_t n, std::uint64_t seed, double tol = 1e-9, LogBase base = LogBase::bits) {
  const std::size_t N = users.size();
  SimResult res;
  res.blocks = n;
  res.seed = seed;
  std::vector<double> sum(N, 0.0), sumsq(N, 0.0), h(N), r(N), p(N);
  CounterRng rng(seed);
  for (std::uint64_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < N; ++i) {
      h[i] = users[i].inverse_cdf(rng.next_open01());
      r[i] = rate(i, h[i]);
      p[i] = power(i, h[i]);
      sum[i] += r[i];
      sumsq[i] += r[i] * r[i];
    }
    if (!is_feasible(r, h, p, tol, base).feasible) ++res.outages;
  }
  for (std::size_t i = 0; i < N; ++i) {
    const double mean = n ? sum[i] / double(n) : 0.0;
    const double var = n > 1 ? std::max(0.0, (sumsq[i] - double(n) * mean * mean) / double(n - 1)) : 0.0;
    res.mean_rate.push_back(mean);
    res.half_width.push_back(n ? 1.96 * std::sqrt(var / double(n)) : 0.0);
  }
  return res;
}

/// Largest |central difference - analytic| / max(|analytic|, 1e-8) over coordinates.
template <class F, class G>
double finite_difference_check(F&& f, G&& grad, std::vector<double> x, double step) {
  const auto g = grad(x);
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + step;
    const double up = f(x);
    x[k] = keep - step;
    const double down = f(x);
    x[k] = keep;
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - g[k]) / std::max(std::abs(g[k]), 1e-8));
  }
  return worst;
}

}  // namespace macadapt
