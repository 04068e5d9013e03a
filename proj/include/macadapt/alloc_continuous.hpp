#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

#include "macadapt/alloc_discrete.hpp"
#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/numeric.hpp"

namespace macadapt {

namespace detail {

// A law whose quantile function is continuous and strictly increasing on (0,1).
inline bool is_regular(const FadingDistribution& d) {
  return std::visit(
      [](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, law::Rayleigh> || std::is_same_v<T, law::Uniform>) {
          return true;
        } else if constexpr (std::is_same_v<T, law::Conditioned>) {
          return is_regular(*v.base);
        } else if constexpr (std::is_same_v<T, law::Weighted>) {
          return v.alpha == 1.0 && is_regular(*v.base);
        } else {
          return false;
        }
      },
      d.variant());
}

}  // namespace detail

/// The integral rate construction applies when quantile jumps or flats never
/// occur in two users at once; this artifact admits at most one such user.
inline bool continuous_path_applies(const std::vector<FadingDistribution>& users) {
  std::size_t irregular = 0;
  for (const auto& u : users) irregular += detail::is_regular(u) ? 0 : 1;
  return irregular <= 1;
}

/// Rates R_i(h) = base_i + integral from h_i(0) to h of
/// y P_i / (1 + y^2 P_i + sum_{j != i} cross_map(i -> j, y)^2 P_j) dy,
/// where h_i(0) is the bottom of user i's support. Cumulative integrals are
/// cached at quantile-spaced nodes and rate() integrates only from the nearest
/// node below.
class ContinuousRateLaw {
 public:
  ContinuousRateLaw(std::vector<FadingDistribution> users, std::vector<double> powers, std::vector<double> base,
                    LogBase log_base = LogBase::bits, std::size_t nodes = 1000, QuadOptions quad = {})
      : users_(std::move(users)), powers_(std::move(powers)), base_(std::move(base)), log_base_(log_base),
        quad_(quad) {
    const std::size_t n = users_.size();
    if (n == 0 || n > kMaxUsers) throw InvalidInput("continuous law needs between 1 and 16 users");
    if (powers_.size() != n || base_.size() != n) throw InvalidInput("one power and one base rate per user");
    if (nodes < 2) throw InvalidInput("at least two tabulation nodes are required");
    if (!continuous_path_applies(users_))
      throw InvalidInput("integral construction needs at most one user with atoms or gaps; discretize instead");
    check_base();
    for (std::size_t i = 0; i < n; ++i) {
      breaks_.push_back(breakpoints(i));
      tabulate(i, nodes);
    }
  }

  std::size_t num_users() const noexcept { return users_.size(); }
  const std::vector<FadingDistribution>& users() const noexcept { return users_; }
  const std::vector<double>& powers() const noexcept { return powers_; }
  const std::vector<double>& base_rates() const noexcept { return base_; }
  LogBase log_base() const noexcept { return log_base_; }
  double floor(std::size_t i) const { return users_[i].support_min(); }

  /// Cached nodes for user i: quantile, magnitude, rate.
  const std::vector<double>& node_quantiles(std::size_t i) const { return q_[i]; }
  const std::vector<double>& node_magnitudes(std::size_t i) const { return h_[i]; }
  const std::vector<double>& node_rates(std::size_t i) const { return r_[i]; }

  /// d R_i / dh at y.
  double integrand(std::size_t i, double y) const {
    const double own = y * y * powers_[i];
    double others = 0.0;
    for (std::size_t j = 0; j < users_.size(); ++j) {
      if (j == i || powers_[j] == 0.0) continue;
      const double g = cross_map(users_[i], users_[j], y);
      others += g * g * powers_[j];
    }
    if (std::isinf(others)) return 0.0;
    return y * powers_[i] / (1.0 + own + others) * log_scale(log_base_);
  }

  /// Integral of the integrand over [a, b], splitting at every kink.
  double increment(std::size_t i, double a, double b) const {
    if (!(b > a)) return 0.0;
    std::vector<double> pts{a};
    const auto& bk = breaks_[i];
    for (auto it = std::upper_bound(bk.begin(), bk.end(), a); it != bk.end() && *it < b; ++it) pts.push_back(*it);
    pts.push_back(b);
    return integrate([&](double y) { return integrand(i, y); }, std::span<const double>(pts), quad_);
  }

  double rate(std::size_t i, double h) const {
    const double h0 = h_[i].front();
    if (h < h0 - 1e-12) throw InvalidInput("magnitude below the bottom of the user's support");
    if (h <= h0) return r_[i].front();
    const auto& nodes = h_[i];
    auto k = std::size_t(std::upper_bound(nodes.begin(), nodes.end(), h) - nodes.begin()) - 1;
    return r_[i][k] + increment(i, nodes[k], h);
  }

  /// E[R_i(H)] for H distributed as `under` (defaults to the user's own law),
  /// as R_i(h0) + integral of R_i'(y) P(H > y) dy; magnitudes below h0 count as h0.
  double expected_rate(std::size_t i, const FadingDistribution* under = nullptr) const {
    const auto& d = under ? *under : users_[i];
    const double h0 = h_[i].front();
    const double top = d.inverse_cdf(d.unbounded() ? kTailQuantile : 1.0);
    if (!(top > h0)) return r_[i].front();
    std::vector<double> pts = breaks_[i];
    for (double p : d.kink_points()) pts.push_back(p);
    if (d.unbounded())
      for (int k = 1; k <= 12; ++k) pts.push_back(d.inverse_cdf(1.0 - std::pow(10.0, -k)));
    std::erase_if(pts, [&](double p) { return !(p > h0 && p < top); });
    pts.push_back(h0);
    pts.push_back(top);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    QuadOptions opt = quad_;
    opt.rel_tol = std::max(opt.rel_tol, 1e-10);
    const double tail = integrate([&](double y) { return integrand(i, y) * (1.0 - d.cdf(y)); },
                                  std::span<const double>(pts), opt);
    return r_[i].front() + tail;
  }

  std::vector<double> expected_rates() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < users_.size(); ++i) out.push_back(expected_rate(i));
    return out;
  }

 private:
  void check_base() const {
    const std::size_t n = users_.size();
    std::vector<double> h0(n);
    for (std::size_t i = 0; i < n; ++i) h0[i] = users_[i].support_min();
    const SubsetMask full = full_mask(n);
    for (SubsetMask s = 1; s <= full; ++s) {
      double sum = 0.0;
      for (std::size_t i : subset_members(s)) sum += base_[i];
      const double cap = subset_capacity(h0, powers_, s, log_base_);
      if (s == full ? std::abs(sum - cap) > kParameterSlack : sum > cap + kParameterSlack)
        throw InvalidParameter("base rates violate the constraints at the bottom of the supports");
    }
  }

  std::vector<double> breakpoints(std::size_t i) const {
    auto pts = users_[i].kink_points();
    for (std::size_t j = 0; j < users_.size(); ++j) {
      if (j == i) continue;
      auto levels = users_[j].kink_levels();
      if (users_[j].unbounded())
        for (int k = 1; k <= 12; ++k) levels.push_back(1.0 - std::pow(10.0, -k));
      for (double c : levels) pts.push_back(users_[i].inverse_cdf(c));
    }
    std::erase_if(pts, [](double p) { return !std::isfinite(p); });
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }

  void tabulate(std::size_t i, std::size_t nodes) {
    const auto& d = users_[i];
    const double top = d.unbounded() ? kTailQuantile : 1.0;
    std::vector<double> q, h, r;
    for (std::size_t m = 0; m <= nodes; ++m) {
      const double x = m == nodes ? top : std::min(top, double(m) / double(nodes));
      const double hm = m == 0 ? d.support_min() : std::max(d.inverse_cdf(x), d.support_min());
      q.push_back(x);
      h.push_back(hm);
      r.push_back(m == 0 ? base_[i] : r.back() + increment(i, h[m - 1], hm));
    }
    q_.push_back(std::move(q));
    h_.push_back(std::move(h));
    r_.push_back(std::move(r));
  }

  std::vector<FadingDistribution> users_;
  std::vector<double> powers_, base_;
  LogBase log_base_;
  QuadOptions quad_;
  std::vector<std::vector<double>> breaks_, q_, h_, r_;
};

/// All zeros when every support starts at 0; otherwise the vertex at the
/// bottom of the supports with user 1 decoded last.
inline std::vector<double> default_continuous_base(const std::vector<FadingDistribution>& users,
                                                   std::span<const double> power, LogBase base = LogBase::bits) {
  std::vector<double> out;
  double snr = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const double h0 = users[i].support_min();
    snr += h0 * h0 * power[i];
    const double c = half_log1p(snr, base);
    out.push_back(c - prev);
    prev = c;
  }
  return out;
}

inline ContinuousRateLaw tabulate_rate_law(const MacInstance& inst, std::vector<double> base, std::size_t nodes,
                                           const QuadOptions& quad = {}) {
  inst.validate();
  if (base.empty()) base = default_continuous_base(inst.users, inst.powers, inst.log_base);
  return ContinuousRateLaw(inst.users, inst.powers, std::move(base), inst.log_base, nodes, quad);
}

/// R_i(h) for one magnitude, integrating from the bottom of the support.
inline double rate_at(const MacInstance& inst, std::size_t i, double h, std::vector<double> base = {}) {
  return tabulate_rate_law(inst, std::move(base), 2).rate(i, h);
}

struct DiscretizationProfile {
  std::vector<double> deltas;
  std::vector<double> deviations;  // max |discrete - integral rate| over users and levels
  bool monotone = true;
  double final_bound = 0.0;        // 5 delta_last * max integrand
  bool final_within_bound = true;
};

/// Compares the discrete construction on equal-probability discretizations
/// against the integral law at the same quantiles.
inline DiscretizationProfile discretization_limit_check(const MacInstance& inst, const std::vector<double>& deltas,
                                                        std::vector<double> base = {}, std::size_t nodes = 1000) {
  auto law = tabulate_rate_law(inst, std::move(base), nodes);
  DiscretizationProfile prof;
  for (double delta : deltas) {
    if (!prof.deltas.empty() && !(delta < prof.deltas.back()))
      throw InvalidInput("discretization steps must decrease");
    std::vector<FadingDistribution> users;
    for (const auto& u : inst.users) users.push_back(u.is_discrete() ? u : discretize(u, delta));
    auto grid = build_level_grid(users);
    std::vector<double> start;
    for (std::size_t i = 0; i < users.size(); ++i) start.push_back(law.rate(i, grid.states[i][0]));
    auto disc = allocate_multi_user(grid, inst.powers, start, inst.log_base);
    double dev = 0.0;
    for (std::size_t i = 0; i < users.size(); ++i)
      for (std::size_t l = 0; l < grid.num_levels(); ++l)
        dev = std::max(dev, std::abs(disc.table[i][l] - law.rate(i, grid.states[i][l])));
    if (!prof.deviations.empty() && dev > prof.deviations.back()) prof.monotone = false;
    prof.deltas.push_back(delta);
    prof.deviations.push_back(dev);
  }
  double peak = 0.0;
  for (double p : inst.powers) peak = std::max(peak, 0.5 * std::sqrt(p));
  if (!prof.deltas.empty()) {
    prof.final_bound = 5.0 * prof.deltas.back() * peak * log_scale(inst.log_base);
    prof.final_within_bound = prof.deviations.back() <= prof.final_bound;
  }
  return prof;
}

}  // namespace macadapt
