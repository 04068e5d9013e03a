#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/numeric.hpp"

namespace macadapt {

inline constexpr std::size_t kMaxUsers = 16;

enum class PowerMode { fixed, average };

/// N users sharing a unit-noise Gaussian MAC.
struct MacInstance {
  std::vector<FadingDistribution> users;
  std::vector<double> powers;   // fixed P_i, or budgets P_i^avg in average mode
  PowerMode power_mode = PowerMode::fixed;
  std::vector<double> weights;  // empty means all ones
  LogBase log_base = LogBase::bits;

  std::size_t size() const noexcept { return users.size(); }

  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights.at(i); }

  void validate() const {
    if (users.empty()) throw InvalidInput("instance needs at least one user");
    if (users.size() > kMaxUsers) throw InvalidInput("at most 16 users are supported");
    if (powers.size() != users.size()) throw InvalidInput("one power per user is required");
    for (double p : powers)
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("powers must be finite and nonnegative");
    if (!weights.empty()) {
      if (weights.size() != users.size()) throw InvalidInput("one weight per user is required");
      bool positive = false;
      for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("weights must be nonnegative");
        positive = positive || w > 0.0;
      }
      if (!positive) throw InvalidInput("at least one weight must be positive");
    }
  }

  bool all_discrete() const {
    for (const auto& u : users)
      if (!u.is_discrete()) return false;
    return true;
  }
};

using SubsetMask = std::uint32_t;

inline std::vector<std::size_t> subset_members(SubsetMask mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1u) out.push_back(i);
  return out;
}

inline SubsetMask full_mask(std::size_t n) { return SubsetMask((std::uint64_t(1) << n) - 1); }

/// 1/2 log(1 + sum_{i in S} h_i^2 P_i).
inline double subset_capacity(std::span<const double> h, std::span<const double> power, SubsetMask subset,
                              LogBase base = LogBase::bits) {
  if (subset == 0) throw InvalidInput("subset must be nonempty");
  double snr = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (subset & (SubsetMask(1) << i)) snr += h[i] * h[i] * power[i];
  return half_log1p(snr, base);
}

struct FeasibilityResult {
  bool feasible = true;
  SubsetMask worst_subset = 0;   // 0 when no constraint is violated
  double max_violation = 0.0;    // max over S of sum R - capacity, may be negative
};

/// Checks every nonempty subset of users against the instantaneous region.
inline FeasibilityResult is_feasible(std::span<const double> rates, std::span<const double> h,
                                     std::span<const double> power, double tol, LogBase base = LogBase::bits) {
  const std::size_t n = rates.size();
  if (n == 0 || n > kMaxUsers) throw InvalidInput("feasibility needs between 1 and 16 users");
  const SubsetMask full = full_mask(n);
  // Subset sums built incrementally from the lowest set bit.
  std::vector<double> rate_sum(std::size_t(full) + 1, 0.0), snr(std::size_t(full) + 1, 0.0);
  FeasibilityResult out;
  out.max_violation = -std::numeric_limits<double>::infinity();
  for (SubsetMask s = 1; s <= full; ++s) {
    const unsigned low = unsigned(std::countr_zero(s));
    const SubsetMask rest = s & (s - 1);
    rate_sum[s] = rate_sum[rest] + rates[low];
    snr[s] = snr[rest] + h[low] * h[low] * power[low];
    const double excess = rate_sum[s] - half_log1p(snr[s], base);
    if (excess > out.max_violation) {
      out.max_violation = excess;
      out.worst_subset = s;
    }
  }
  out.feasible = out.max_violation <= tol;
  if (out.feasible && out.max_violation <= 0.0) out.worst_subset = 0;
  return out;
}

/// E over the common quantile x of 1/2 log(1 + sum_j h_j(x)^2 P_j). Exact level
/// sum for discrete users, adaptive quadrature otherwise.
inline double sum_capacity_upper_bound(const MacInstance& inst, const QuadOptions& opt = {}) {
  inst.validate();
  if (inst.all_discrete()) {
    const auto grid = build_level_grid(inst.users);
    std::vector<double> terms(grid.num_levels());
    for (std::size_t l = 0; l < terms.size(); ++l) {
      double snr = 0.0;
      for (std::size_t i = 0; i < inst.size(); ++i)
        snr += grid.states[i][l] * grid.states[i][l] * inst.powers[i];
      terms[l] = grid.widths[l] * half_log1p(snr, inst.log_base);
    }
    return stable_sum(terms);
  }
  std::vector<double> pts;
  bool unbounded = false;
  for (const auto& u : inst.users) {
    auto k = u.kink_levels();
    pts.insert(pts.end(), k.begin(), k.end());
    unbounded = unbounded || u.unbounded();
  }
  if (unbounded)
    for (int k = 1; k <= 12; ++k) pts.push_back(1.0 - std::pow(10.0, -k));
  const auto partition = make_partition(std::move(pts), 0.0, 1.0);
  return integrate(
      [&](double x) {
        double snr = 0.0;
        for (std::size_t i = 0; i < inst.size(); ++i) {
          const double h = inst.users[i].inverse_cdf(x);
          snr += h * h * inst.powers[i];
        }
        return half_log1p(snr, inst.log_base);
      },
      partition, opt);
}

/// [log(1+v1) + log(1+v2)] - [log(1+u1) + log(1+u2)] for u1 <= v1, v2 <= u2 and
/// u1 + u2 = v1 + v2; nonnegative by concavity of the logarithm.
inline double log_concavity_gap(double u1, double u2, double v1, double v2, LogBase base = LogBase::bits) {
  constexpr double slack = 1e-9;
  if (u1 < 0 || u2 < 0 || v1 < 0 || v2 < 0) throw InvalidInput("arguments must be nonnegative");
  if (std::abs((u1 + u2) - (v1 + v2)) > slack) throw InvalidInput("sums must agree");
  if (u1 > v1 + slack || v2 > u2 + slack) throw InvalidInput("ordering u1 <= v1, v2 <= u2 violated");
  // Roundoff can dip a zero gap just below 0.
  return std::max(0.0, 2.0 * (half_log1p(v1, base) + half_log1p(v2, base) - half_log1p(u1, base) - half_log1p(u2, base)));
}

}  // namespace macadapt
