#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/numeric.hpp"

namespace macadapt {

/// Slack for user-supplied rate parameters (rho, base tuples, chooser output).
inline constexpr double kParameterSlack = 1e-9;

/// Per-user rate as a function of the user's own discrete state.
struct DiscreteRateLaw {
  LevelGrid grid;
  std::vector<double> powers;
  LogBase log_base = LogBase::bits;
  std::vector<std::vector<double>> table;        // table[i][l] = R_i(h_il)
  std::vector<std::vector<double>> state_rates;  // state_rates[i][j] = R_i(j-th state of user i)

  std::size_t num_users() const noexcept { return grid.num_users(); }
  const law::Discrete& user_law(std::size_t i) const { return grid.users[i].as_discrete(); }

  /// Rate of user i in state h; h must be one of the user's states.
  double rate(std::size_t i, double h) const {
    const auto& d = user_law(i);
    auto it = std::lower_bound(d.states.begin(), d.states.end(), h);
    if (it == d.states.end() || *it != h) throw InvalidInput("magnitude is not a state of this user");
    return state_rates[i][std::size_t(it - d.states.begin())];
  }
};

namespace detail {

inline std::vector<std::vector<double>> rates_by_state(const LevelGrid& grid,
                                                       const std::vector<std::vector<double>>& table,
                                                       double tol) {
  std::vector<std::vector<double>> out(grid.num_users());
  for (std::size_t i = 0; i < grid.num_users(); ++i) {
    const auto& d = grid.users[i].as_discrete();
    std::vector<std::optional<double>> seen(d.states.size());
    for (std::size_t l = 0; l < grid.num_levels(); ++l) {
      auto& slot = seen[grid.index[i][l]];
      if (!slot) {
        slot = table[i][l];
      } else if (std::abs(*slot - table[i][l]) > tol) {
        throw SolverError("rate assignment differs across repeats of user " + std::to_string(i + 1) +
                          " state at level " + std::to_string(l));
      }
    }
    for (const auto& s : seen) {
      if (!s) throw InvalidInput("a state carries less probability than the level resolution");
      out[i].push_back(*s);
    }
  }
  return out;
}

inline DiscreteRateLaw finish_law(LevelGrid grid, std::vector<double> powers, LogBase base,
                                  std::vector<std::vector<double>> table, double repeat_tol) {
  DiscreteRateLaw law;
  law.state_rates = rates_by_state(grid, table, repeat_tol);
  law.grid = std::move(grid);
  law.powers = std::move(powers);
  law.log_base = base;
  law.table = std::move(table);
  return law;
}

// 1/2 log(1 + sum_i h_i^2 P_i) where user i's state is taken at level
// at_current[i] ? l : l-1, and a level below zero contributes nothing.
inline double mixed_level_capacity(const LevelGrid& grid, std::span<const double> power, std::size_t l,
                                   const std::vector<bool>& at_current, LogBase base) {
  double snr = 0.0;
  for (std::size_t i = 0; i < grid.num_users(); ++i) {
    if (!at_current[i] && l == 0) continue;
    const double h = grid.states[i][at_current[i] ? l : l - 1];
    snr += h * h * power[i];
  }
  return half_log1p(snr, base);
}

inline void check_grid(const LevelGrid& grid, std::span<const double> power) {
  if (grid.num_users() == 0) throw InvalidInput("empty level grid");
  if (grid.num_users() > kMaxUsers) throw InvalidInput("at most 16 users are supported");
  if (power.size() != grid.num_users()) throw InvalidInput("one power per user is required");
  for (double p : power)
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("powers must be finite and nonnegative");
}

}  // namespace detail

/// Admissible interval for the first user's rate at the lowest level of a two-user grid.
inline std::pair<double, double> rho_interval(const LevelGrid& grid, std::span<const double> power,
                                              LogBase base = LogBase::bits) {
  const double s1 = grid.states[0][0] * grid.states[0][0] * power[0];
  const double s2 = grid.states[1][0] * grid.states[1][0] * power[1];
  return {half_log1p(s1 / (1.0 + s2), base), half_log1p(s1, base)};
}

inline double default_rho(const LevelGrid& grid, std::span<const double> power, LogBase base = LogBase::bits) {
  auto [lo, hi] = rho_interval(grid, power, base);
  return 0.5 * (lo + hi);
}

/// The polymatroid vertex at the lowest level where user 1 is decoded last:
/// R_i = C({1..i}) - C({1..i-1}).
inline std::vector<double> default_base_rates(const LevelGrid& grid, std::span<const double> power,
                                              LogBase base = LogBase::bits) {
  std::vector<double> out;
  double snr = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < grid.num_users(); ++i) {
    snr += grid.states[i][0] * grid.states[i][0] * power[i];
    const double c = half_log1p(snr, base);
    out.push_back(c - prev);
    prev = c;
  }
  return out;
}

/// Checks a lowest-level tuple: every strict subset within its capacity and the
/// full set with equality. Throws InvalidParameter naming the first bad subset.
inline void check_base_rates(const LevelGrid& grid, std::span<const double> power, std::span<const double> rates,
                             LogBase base = LogBase::bits) {
  const std::size_t n = grid.num_users();
  if (rates.size() != n) throw InvalidParameter("one base rate per user is required");
  std::vector<double> h0(n);
  for (std::size_t i = 0; i < n; ++i) h0[i] = grid.states[i][0];
  const SubsetMask full = full_mask(n);
  for (SubsetMask s = 1; s <= full; ++s) {
    double sum = 0.0;
    for (std::size_t i : subset_members(s)) sum += rates[i];
    const double cap = subset_capacity(h0, power, s, base);
    const bool bad = s == full ? std::abs(sum - cap) > kParameterSlack : sum > cap + kParameterSlack;
    if (bad) {
      std::string who;
      for (std::size_t i : subset_members(s)) who += (who.empty() ? "" : ",") + std::to_string(i + 1);
      throw InvalidParameter("base rates violate the lowest-level constraint for users {" + who + "}");
    }
  }
}

/// Two-user optimal law built by alternating between the users level by level:
/// user 1 takes the largest rate compatible with user 2's previous state, then
/// user 2 completes the sum-rate of the current level.
inline DiscreteRateLaw allocate_two_user(const LevelGrid& grid, std::span<const double> power, double rho,
                                         LogBase base = LogBase::bits) {
  detail::check_grid(grid, power);
  if (grid.num_users() != 2) throw InvalidInput("two-user allocation needs exactly two users");
  auto [lo, hi] = rho_interval(grid, power, base);
  if (!(rho >= lo - kParameterSlack && rho <= hi + kParameterSlack))
    throw InvalidParameter("rho outside its admissible interval");
  const auto& h1 = grid.states[0];
  const auto& h2 = grid.states[1];
  const double p1 = power[0], p2 = power[1];
  auto pair_cap = [&](double a, double b) { return half_log1p(a * a * p1 + b * b * p2, base); };
  const std::size_t levels = grid.num_levels();
  std::vector<std::vector<double>> t(2, std::vector<double>(levels));
  t[0][0] = rho;
  t[1][0] = pair_cap(h1[0], h2[0]) - rho;
  for (std::size_t l = 1; l < levels; ++l) {
    // An unchanged state keeps its rate; the recursion yields the same value.
    t[0][l] = h1[l] == h1[l - 1] ? t[0][l - 1] : pair_cap(h1[l], h2[l - 1]) - t[1][l - 1];
    t[1][l] = h2[l] == h2[l - 1] ? t[1][l - 1] : pair_cap(h1[l], h2[l]) - t[0][l];
  }
  return detail::finish_law(grid, {power.begin(), power.end()}, base, std::move(t), 0.0);
}

/// Same law as allocate_two_user written as telescoping sums of capacity increments.
inline DiscreteRateLaw allocate_two_user_closed(const LevelGrid& grid, std::span<const double> power, double rho,
                                                LogBase base = LogBase::bits) {
  detail::check_grid(grid, power);
  if (grid.num_users() != 2) throw InvalidInput("two-user allocation needs exactly two users");
  auto [lo, hi] = rho_interval(grid, power, base);
  if (!(rho >= lo - kParameterSlack && rho <= hi + kParameterSlack))
    throw InvalidParameter("rho outside its admissible interval");
  const auto& h1 = grid.states[0];
  const auto& h2 = grid.states[1];
  auto pair_cap = [&](double a, double b) { return half_log1p(a * a * power[0] + b * b * power[1], base); };
  const std::size_t levels = grid.num_levels();
  std::vector<std::vector<double>> t(2, std::vector<double>(levels));
  double inc1 = 0.0, inc2 = 0.0;
  for (std::size_t l = 0; l < levels; ++l) {
    if (l > 0) {
      inc1 += pair_cap(h1[l], h2[l - 1]) - pair_cap(h1[l - 1], h2[l - 1]);
      inc2 += pair_cap(h1[l], h2[l]) - pair_cap(h1[l], h2[l - 1]);
    }
    t[0][l] = rho + inc1;
    t[1][l] = pair_cap(h1[0], h2[0]) - rho + inc2;
  }
  return detail::finish_law(grid, {power.begin(), power.end()}, base, std::move(t), 1e-12);
}

/// N-user optimal law: at each level users 1..N in turn take the largest rate
/// compatible with the already-updated users at this level and the remaining
/// users at the previous level.
inline DiscreteRateLaw allocate_multi_user(const LevelGrid& grid, std::span<const double> power,
                                           std::span<const double> base_rates, LogBase base = LogBase::bits) {
  detail::check_grid(grid, power);
  check_base_rates(grid, power, base_rates, base);
  const std::size_t n = grid.num_users(), levels = grid.num_levels();
  std::vector<std::vector<double>> t(n, std::vector<double>(levels));
  for (std::size_t i = 0; i < n; ++i) t[i][0] = base_rates[i];
  for (std::size_t l = 1; l < levels; ++l) {
    double snr = 0.0, prev_rates = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      snr += grid.states[j][l - 1] * grid.states[j][l - 1] * power[j];
      prev_rates += t[j][l - 1];
    }
    double cur_rates = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double hp = grid.states[i][l - 1], hc = grid.states[i][l];
      snr += (hc * hc - hp * hp) * power[i];
      prev_rates -= t[i][l - 1];
      // An unchanged state keeps its rate; the recursion yields the same value.
      t[i][l] = hc == hp ? t[i][l - 1] : half_log1p(snr, base) - cur_rates - prev_rates;
      cur_rates += t[i][l];
    }
  }
  return detail::finish_law(grid, {power.begin(), power.end()}, base, std::move(t), 0.0);
}

/// What a per-level chooser sees: everything fixed so far.
struct LevelContext {
  const LevelGrid& grid;
  std::span<const double> power;
  LogBase log_base;
  std::size_t level;
  std::vector<double> previous;  // R_i(h_i(l-1)); zeros at level 0
};

using LevelChooser = std::function<std::vector<double>(const LevelContext&)>;

/// Greedy assignment in the given user order: each user takes the largest
/// rate compatible with earlier users at this level and later users at the
/// previous level (nothing below level 0). Order (0,1,...,N-1) reproduces
/// allocate_multi_user seeded with default_base_rates.
inline LevelChooser priority_chooser(std::vector<std::size_t> order) {
  return [order = std::move(order)](const LevelContext& ctx) {
    const std::size_t n = ctx.grid.num_users();
    if (order.size() != n) throw InvalidInput("priority order must list every user once");
    std::vector<bool> at_current(n, false);
    std::vector<double> out(n, 0.0);
    double prev_rates = 0.0;
    for (double r : ctx.previous) prev_rates += r;
    double cur_rates = 0.0;
    for (std::size_t i : order) {
      at_current[i] = true;
      prev_rates -= ctx.previous[i];
      const bool unchanged = ctx.level > 0 && ctx.grid.states[i][ctx.level] == ctx.grid.states[i][ctx.level - 1];
      out[i] = unchanged ? ctx.previous[i]
                         : detail::mixed_level_capacity(ctx.grid, ctx.power, ctx.level, at_current, ctx.log_base) -
                               cur_rates - prev_rates;
      cur_rates += out[i];
    }
    return out;
  };
}

/// Builds a law from arbitrary per-level choices, accepting a level only if its
/// tuple fills the level's sum capacity and every strict subset S satisfies
/// sum_S R(l) <= C(S at l, rest at l-1) - sum_{rest} R(l-1).
inline DiscreteRateLaw allocate_flexible(const LevelGrid& grid, std::span<const double> power,
                                         const LevelChooser& chooser, LogBase base = LogBase::bits) {
  detail::check_grid(grid, power);
  const std::size_t n = grid.num_users(), levels = grid.num_levels();
  const SubsetMask full = full_mask(n);
  std::vector<std::vector<double>> t(n, std::vector<double>(levels));
  std::vector<double> previous(n, 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    LevelContext ctx{grid, power, base, l, previous};
    auto r = chooser(ctx);
    if (r.size() != n) throw InvalidInput("chooser returned the wrong number of rates");
    for (SubsetMask s = 1; s <= full; ++s) {
      std::vector<bool> at_current(n, false);
      double sum = 0.0, rest = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (s & (SubsetMask(1) << i)) {
          at_current[i] = true;
          sum += r[i];
        } else {
          rest += previous[i];
        }
      }
      const double bound = detail::mixed_level_capacity(grid, power, l, at_current, base) - rest;
      const double excess = s == full ? std::abs(sum - bound) : sum - bound;
      if (excess > kParameterSlack) {
        std::string who;
        for (std::size_t i : subset_members(s)) who += (who.empty() ? "" : ",") + std::to_string(i + 1);
        throw ConstraintViolation("level " + std::to_string(l) + " violates the constraint for users {" + who + "}",
                                  l, subset_members(s), excess);
      }
    }
    for (std::size_t i = 0; i < n; ++i) t[i][l] = r[i];
    previous = std::move(r);
  }
  return detail::finish_law(grid, {power.begin(), power.end()}, base, std::move(t), kParameterSlack);
}

/// E[R_i] = sum over user i's states of Pr(state) R_i(state).
inline std::vector<double> expected_rates(const DiscreteRateLaw& law) {
  std::vector<double> out;
  for (std::size_t i = 0; i < law.num_users(); ++i) {
    const auto& d = law.user_law(i);
    std::vector<double> terms(d.states.size());
    for (std::size_t j = 0; j < terms.size(); ++j) terms[j] = d.probs[j] * law.state_rates[i][j];
    out.push_back(stable_sum(terms));
  }
  return out;
}

/// E[R_i] computed over the level grid instead of the states.
inline std::vector<double> expected_rates_by_level(const DiscreteRateLaw& law) {
  std::vector<double> out;
  for (std::size_t i = 0; i < law.num_users(); ++i) {
    std::vector<double> terms(law.grid.num_levels());
    for (std::size_t l = 0; l < terms.size(); ++l) terms[l] = law.grid.widths[l] * law.table[i][l];
    out.push_back(stable_sum(terms));
  }
  return out;
}

/// Rebuilds a law from per-state rates, e.g. after import.
inline DiscreteRateLaw law_from_state_rates(std::vector<FadingDistribution> users, std::vector<double> powers,
                                            std::vector<std::vector<double>> state_rates,
                                            LogBase base = LogBase::bits) {
  if (state_rates.size() != users.size()) throw InvalidInput("one rate list per user is required");
  auto grid = build_level_grid(users);
  detail::check_grid(grid, powers);
  std::vector<std::vector<double>> t(users.size(), std::vector<double>(grid.num_levels()));
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (state_rates[i].size() != users[i].as_discrete().states.size())
      throw InvalidInput("one rate per state is required");
    for (std::size_t l = 0; l < grid.num_levels(); ++l) t[i][l] = state_rates[i][grid.index[i][l]];
  }
  return detail::finish_law(std::move(grid), std::move(powers), base, std::move(t), 0.0);
}

}  // namespace macadapt
