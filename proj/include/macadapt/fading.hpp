#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "macadapt/errors.hpp"
#include "macadapt/numeric.hpp"

namespace macadapt {

/// Probabilities summing to one are accepted within this slack.
inline constexpr double kProbabilitySlack = 1e-12;
/// CDF levels closer than this are the same level.
inline constexpr double kLevelMergeTol = 1e-12;
/// Quantile cap used wherever an unbounded law must yield a finite state.
inline constexpr double kTailQuantile = 1.0 - 1e-12;

class FadingDistribution;

namespace law {

struct Discrete {
  std::vector<double> states;  // strictly increasing, >= 0
  std::vector<double> probs;   // > 0
  std::vector<double> cumulative;  // back() == 1 exactly
};

struct Rayleigh {
  double m2;
};

struct Uniform {
  double low, high;
};

// Piecewise-linear CDF through (h_k, F_k); an atom of size F_0 sits at h_0.
struct Tabulated {
  std::vector<double> h;
  std::vector<double> cdf;
};

// alpha * psi + (1 - alpha): the base law scaled, plus an atom at zero.
struct Weighted {
  std::shared_ptr<const FadingDistribution> base;
  double alpha;
};

// Base law conditioned on lo <= H < hi.
struct Conditioned {
  std::shared_ptr<const FadingDistribution> base;
  double lo, hi;
  double below_lo;  // Pr(H < lo)
  double mass;      // Pr(lo <= H < hi), > 0
};

}  // namespace law

/// A fading-magnitude law. Immutable once built; copies share structure.
class FadingDistribution {
 public:
  using Variant = std::variant<law::Discrete, law::Rayleigh, law::Uniform, law::Tabulated,
                               law::Weighted, law::Conditioned>;

  static FadingDistribution discrete(std::vector<double> states, std::vector<double> probs) {
    if (states.empty() || states.size() != probs.size())
      throw InvalidInput("discrete law needs matching nonempty states and probabilities");
    law::Discrete d;
    double total = 0.0;
    for (std::size_t j = 0; j < states.size(); ++j) {
      if (!(states[j] >= 0.0) || !std::isfinite(states[j]))
        throw InvalidInput("discrete states must be finite and nonnegative");
      if (j > 0 && !(states[j] > states[j - 1]))
        throw InvalidInput("discrete states must be strictly increasing");
      if (!(probs[j] >= 0.0)) throw InvalidInput("probabilities must be nonnegative");
      total += probs[j];
      if (probs[j] == 0.0) continue;
      d.states.push_back(states[j]);
      d.probs.push_back(probs[j]);
    }
    if (std::abs(total - 1.0) > kProbabilitySlack)
      throw InvalidInput("probabilities must sum to 1");
    double run = 0.0;
    for (double p : d.probs) d.cumulative.push_back(run += p);
    d.cumulative.back() = 1.0;
    return FadingDistribution(std::move(d));
  }

  static FadingDistribution rayleigh(double second_moment) {
    if (!(second_moment > 0.0) || !std::isfinite(second_moment))
      throw InvalidInput("Rayleigh second moment must be positive");
    return FadingDistribution(law::Rayleigh{second_moment});
  }

  static FadingDistribution uniform(double low, double high) {
    if (!(low >= 0.0) || !(high > low) || !std::isfinite(high))
      throw InvalidInput("uniform law needs 0 <= low < high");
    return FadingDistribution(law::Uniform{low, high});
  }

  static FadingDistribution tabulated(std::vector<double> h, std::vector<double> cdf) {
    if (h.empty() || h.size() != cdf.size())
      throw InvalidInput("tabulated law needs matching nonempty samples");
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (!(h[k] >= 0.0) || !std::isfinite(h[k]))
        throw InvalidInput("tabulated magnitudes must be finite and nonnegative");
      if (!(cdf[k] >= 0.0 && cdf[k] <= 1.0)) throw InvalidInput("tabulated CDF outside [0,1]");
      if (k > 0 && !(h[k] > h[k - 1]))
        throw InvalidInput("tabulated magnitudes must be strictly increasing");
      if (k > 0 && cdf[k] < cdf[k - 1]) throw InvalidInput("tabulated CDF must be nondecreasing");
    }
    if (std::abs(cdf.back() - 1.0) > kProbabilitySlack)
      throw InvalidInput("tabulated CDF must end at 1");
    cdf.back() = 1.0;
    return FadingDistribution(law::Tabulated{std::move(h), std::move(cdf)});
  }

  const Variant& variant() const noexcept { return *law_; }
  bool is_discrete() const noexcept { return std::holds_alternative<law::Discrete>(*law_); }
  const law::Discrete& as_discrete() const {
    if (!is_discrete()) throw InvalidInput("operation requires a discrete fading law");
    return std::get<law::Discrete>(*law_);
  }
  std::shared_ptr<const FadingDistribution> share() const {
    return std::make_shared<const FadingDistribution>(*this);
  }

  /// Pr(H <= h).
  double cdf(double h) const {
    if (!(h >= 0.0)) throw InvalidInput("cdf evaluated at a negative magnitude");
    return std::visit([h](const auto& d) { return cdf_of(d, h); }, *law_);
  }

  /// Pr(H < h).
  double cdf_below(double h) const {
    if (!(h > 0.0)) return 0.0;
    return std::visit([h](const auto& d) { return below_of(d, h); }, *law_);
  }

  /// sup{h : cdf(h) < x} for x > 0 and 0 at x = 0.
  double inverse_cdf(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("inverse CDF argument outside [0,1]");
    if (x == 0.0) return 0.0;
    return std::visit([x](const auto& d) { return inverse_of(d, x); }, *law_);
  }

  /// inf of the support, i.e. the limit of inverse_cdf(x) as x -> 0+.
  double support_min() const {
    return std::visit([](const auto& d) { return min_of(d); }, *law_);
  }

  /// True when inverse_cdf(1) is infinite.
  bool unbounded() const {
    return std::visit([](const auto& d) { return unbounded_of(d); }, *law_);
  }

  /// CDF levels in (0,1) at which the quantile function jumps or kinks.
  std::vector<double> kink_levels() const {
    auto out = std::visit([](const auto& d) { return levels_of(d); }, *law_);
    std::erase_if(out, [](double x) { return !(x > 0.0 && x < 1.0); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Magnitudes at which the CDF jumps or kinks.
  std::vector<double> kink_points() const {
    auto out = std::visit([](const auto& d) { return points_of(d); }, *law_);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// E[f(H)] = integral over x in [0,1] of f(inverse_cdf(x)); exact for discrete laws.
  template <class F>
  double expectation(F&& f, const QuadOptions& opt = {}) const {
    if (is_discrete()) {
      const auto& d = as_discrete();
      std::vector<double> terms(d.states.size());
      for (std::size_t j = 0; j < terms.size(); ++j) terms[j] = d.probs[j] * f(d.states[j]);
      return stable_sum(terms);
    }
    return integrate([&](double x) { return f(inverse_cdf(x)); }, quantile_partition(), opt);
  }

  /// Breakpoints in [0,1] for integrating a function of the quantile.
  std::vector<double> quantile_partition() const {
    auto pts = kink_levels();
    if (unbounded())
      for (int k = 1; k <= 12; ++k) pts.push_back(1.0 - std::pow(10.0, -k));
    return make_partition(std::move(pts), 0.0, 1.0);
  }

  std::string describe() const;

 private:
  explicit FadingDistribution(Variant v) : law_(std::make_shared<const Variant>(std::move(v))) {}
  friend FadingDistribution transform_weighted(const FadingDistribution&, double);
  friend FadingDistribution condition_on(const FadingDistribution&, double, double);

  // Discrete
  static double cdf_of(const law::Discrete& d, double h) {
    auto it = std::upper_bound(d.states.begin(), d.states.end(), h);
    return it == d.states.begin() ? 0.0 : d.cumulative[std::size_t(it - d.states.begin()) - 1];
  }
  static double below_of(const law::Discrete& d, double h) {
    auto it = std::lower_bound(d.states.begin(), d.states.end(), h);
    return it == d.states.begin() ? 0.0 : d.cumulative[std::size_t(it - d.states.begin()) - 1];
  }
  static double inverse_of(const law::Discrete& d, double x) {
    return d.states[discrete_index(d, x)];
  }
  static double min_of(const law::Discrete& d) { return d.states.front(); }
  static bool unbounded_of(const law::Discrete&) { return false; }
  static std::vector<double> levels_of(const law::Discrete& d) { return d.cumulative; }
  static std::vector<double> points_of(const law::Discrete& d) { return d.states; }

  // Rayleigh
  static double cdf_of(const law::Rayleigh& d, double h) { return -std::expm1(-h * h / d.m2); }
  static double below_of(const law::Rayleigh& d, double h) { return cdf_of(d, h); }
  static double inverse_of(const law::Rayleigh& d, double x) {
    if (x >= 1.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(-d.m2 * std::log1p(-x));
  }
  static double min_of(const law::Rayleigh&) { return 0.0; }
  static bool unbounded_of(const law::Rayleigh&) { return true; }
  static std::vector<double> levels_of(const law::Rayleigh&) { return {}; }
  static std::vector<double> points_of(const law::Rayleigh&) { return {0.0}; }

  // Uniform
  static double cdf_of(const law::Uniform& d, double h) {
    return std::clamp((h - d.low) / (d.high - d.low), 0.0, 1.0);
  }
  static double below_of(const law::Uniform& d, double h) { return cdf_of(d, h); }
  static double inverse_of(const law::Uniform& d, double x) {
    return x >= 1.0 ? d.high : d.low + x * (d.high - d.low);
  }
  static double min_of(const law::Uniform& d) { return d.low; }
  static bool unbounded_of(const law::Uniform&) { return false; }
  static std::vector<double> levels_of(const law::Uniform&) { return {}; }
  static std::vector<double> points_of(const law::Uniform& d) { return {d.low, d.high}; }

  // Tabulated
  static double cdf_of(const law::Tabulated& d, double h) {
    if (h < d.h.front()) return 0.0;
    if (h >= d.h.back()) return 1.0;
    auto k = std::size_t(std::upper_bound(d.h.begin(), d.h.end(), h) - d.h.begin());
    const double t = (h - d.h[k - 1]) / (d.h[k] - d.h[k - 1]);
    return d.cdf[k - 1] + t * (d.cdf[k] - d.cdf[k - 1]);
  }
  static double below_of(const law::Tabulated& d, double h) {
    return h <= d.h.front() ? 0.0 : cdf_of(d, h);
  }
  // Exact inversion per linear segment; at a plateau F = x the left end is returned.
  static double inverse_of(const law::Tabulated& d, double x) {
    if (x <= d.cdf.front()) return d.h.front();
    auto k = std::size_t(std::lower_bound(d.cdf.begin(), d.cdf.end(), x) - d.cdf.begin());
    if (k >= d.cdf.size()) return d.h.back();
    const double t = (x - d.cdf[k - 1]) / (d.cdf[k] - d.cdf[k - 1]);
    return std::min(d.h[k], d.h[k - 1] + t * (d.h[k] - d.h[k - 1]));
  }
  static double min_of(const law::Tabulated& d) {
    if (d.cdf.front() > 0.0) return d.h.front();
    auto k = std::size_t(std::upper_bound(d.cdf.begin(), d.cdf.end(), 0.0) - d.cdf.begin());
    return d.h[k - 1];
  }
  static bool unbounded_of(const law::Tabulated&) { return false; }
  static std::vector<double> levels_of(const law::Tabulated& d) { return d.cdf; }
  static std::vector<double> points_of(const law::Tabulated& d) { return d.h; }

  // Weighted
  static double cdf_of(const law::Weighted& d, double h) {
    return d.alpha * d.base->cdf(h) + (1.0 - d.alpha);
  }
  static double below_of(const law::Weighted& d, double h) {
    return d.alpha * d.base->cdf_below(h) + (1.0 - d.alpha);
  }
  static double inverse_of(const law::Weighted& d, double x) {
    const double atom = 1.0 - d.alpha;
    if (x <= atom) return 0.0;
    return d.base->inverse_cdf(std::min(1.0, (x - atom) / d.alpha));
  }
  static double min_of(const law::Weighted& d) { return d.alpha < 1.0 ? 0.0 : d.base->support_min(); }
  static bool unbounded_of(const law::Weighted& d) { return d.base->unbounded(); }
  static std::vector<double> levels_of(const law::Weighted& d) {
    std::vector<double> out{1.0 - d.alpha};
    for (double c : d.base->kink_levels()) out.push_back(1.0 - d.alpha + d.alpha * c);
    return out;
  }
  static std::vector<double> points_of(const law::Weighted& d) {
    auto out = d.base->kink_points();
    out.push_back(0.0);
    return out;
  }

  // Conditioned
  static double cdf_of(const law::Conditioned& d, double h) {
    if (h < d.lo) return 0.0;
    if (h >= d.hi) return 1.0;
    return std::clamp((d.base->cdf(h) - d.below_lo) / d.mass, 0.0, 1.0);
  }
  static double below_of(const law::Conditioned& d, double h) {
    if (h <= d.lo) return 0.0;
    if (h > d.hi) return 1.0;
    return std::clamp((d.base->cdf_below(h) - d.below_lo) / d.mass, 0.0, 1.0);
  }
  static double inverse_of(const law::Conditioned& d, double x) {
    const double y = std::min(1.0, d.below_lo + d.mass * x);
    return std::clamp(d.base->inverse_cdf(y), d.lo, d.hi);
  }
  static double min_of(const law::Conditioned& d) {
    return std::max(d.lo, d.base->support_min());
  }
  static bool unbounded_of(const law::Conditioned& d) {
    return std::isinf(d.hi) && d.base->unbounded();
  }
  static std::vector<double> levels_of(const law::Conditioned& d) {
    std::vector<double> out;
    for (double c : d.base->kink_levels()) out.push_back((c - d.below_lo) / d.mass);
    return out;
  }
  static std::vector<double> points_of(const law::Conditioned& d) {
    std::vector<double> out{d.lo};
    if (std::isfinite(d.hi)) out.push_back(d.hi);
    for (double p : d.base->kink_points())
      if (p > d.lo && p < d.hi) out.push_back(p);
    return out;
  }

  static std::size_t discrete_index(const law::Discrete& d, double x) {
    auto it = std::lower_bound(d.cumulative.begin(), d.cumulative.end(), x - kLevelMergeTol);
    return std::min(std::size_t(it - d.cumulative.begin()), d.states.size() - 1);
  }

 public:
  /// Index of inverse_cdf(x) among the states of a discrete law, x in (0,1].
  static std::size_t state_index(const law::Discrete& d, double x) { return discrete_index(d, x); }

 private:
  std::shared_ptr<const Variant> law_;
};

inline double cdf(const FadingDistribution& dist, double h) { return dist.cdf(h); }

inline double inverse_cdf(const FadingDistribution& dist, double x) { return dist.inverse_cdf(x); }

/// inverse_cdf(to, cdf(from, y)): the magnitude of user `to` sharing y's quantile.
inline double cross_map(const FadingDistribution& from, const FadingDistribution& to, double y) {
  return to.inverse_cdf(std::min(1.0, from.cdf(y)));
}

/// Law with CDF alpha * psi + (1 - alpha) on h >= 0. Discrete inputs stay discrete.
inline FadingDistribution transform_weighted(const FadingDistribution& dist, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("weight ratio must lie in (0,1]");
  if (alpha == 1.0) return dist;
  if (dist.is_discrete()) {
    const auto& d = dist.as_discrete();
    std::vector<double> states, probs;
    if (d.states.front() > 0.0) {
      states.push_back(0.0);
      probs.push_back(1.0 - alpha);
    }
    for (std::size_t j = 0; j < d.states.size(); ++j) {
      states.push_back(d.states[j]);
      probs.push_back(alpha * d.probs[j] + (j == 0 && d.states[0] == 0.0 ? 1.0 - alpha : 0.0));
    }
    return FadingDistribution::discrete(std::move(states), std::move(probs));
  }
  return FadingDistribution(law::Weighted{dist.share(), alpha});
}

/// The law of H given lo <= H < hi. Throws when that event has probability zero.
inline FadingDistribution condition_on(const FadingDistribution& dist, double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo)) throw InvalidInput("conditioning interval must satisfy 0 <= lo < hi");
  if (dist.is_discrete()) {
    const auto& d = dist.as_discrete();
    std::vector<double> states, probs;
    double mass = 0.0;
    for (std::size_t j = 0; j < d.states.size(); ++j)
      if (d.states[j] >= lo && d.states[j] < hi) {
        states.push_back(d.states[j]);
        probs.push_back(d.probs[j]);
        mass += d.probs[j];
      }
    if (states.empty()) throw InvalidInput("conditioning event has probability zero");
    for (double& p : probs) p /= mass;
    double total = 0.0;
    for (double p : probs) total += p;
    probs.back() += 1.0 - total;
    return FadingDistribution::discrete(std::move(states), std::move(probs));
  }
  const double below = dist.cdf_below(lo);
  const double mass = (std::isinf(hi) ? 1.0 : dist.cdf_below(hi)) - below;
  if (!(mass > 0.0)) throw InvalidInput("conditioning event has probability zero");
  return FadingDistribution(law::Conditioned{dist.share(), lo, hi, below, mass});
}

/// Equal-probability quantile discretization with step delta; the last cell
/// absorbs any remainder and unbounded tails are capped at kTailQuantile.
inline FadingDistribution discretize(const FadingDistribution& dist, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidInput("discretization step must lie in (0,1]");
  const auto cells = static_cast<std::size_t>(std::floor(1.0 / delta + 1e-9));
  const double top = dist.unbounded() ? kTailQuantile : 1.0;
  std::vector<double> states, probs;
  for (std::size_t k = 1; k <= cells; ++k) {
    const double x = k == cells ? top : std::min(top, double(k) * delta);
    const double p = k == cells ? 1.0 - double(cells - 1) * delta : delta;
    const double h = dist.inverse_cdf(x);
    if (!states.empty() && h <= states.back()) {
      probs.back() += p;
    } else {
      states.push_back(h);
      probs.push_back(p);
    }
  }
  return FadingDistribution::discrete(std::move(states), std::move(probs));
}

/// Lower-endpoint discretization: cell k of mass delta is represented by the
/// bottom of its quantile range, so every magnitude in the cell is at least
/// its state. Rates built on it stay outage-free under the original law.
inline FadingDistribution discretize_lower(const FadingDistribution& dist, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidInput("discretization step must lie in (0,1]");
  const auto cells = static_cast<std::size_t>(std::floor(1.0 / delta + 1e-9));
  std::vector<double> states, probs;
  for (std::size_t k = 0; k < cells; ++k) {
    const double p = k + 1 == cells ? 1.0 - double(cells - 1) * delta : delta;
    const double h = k == 0 ? dist.support_min() : std::max(dist.support_min(), dist.inverse_cdf(double(k) * delta));
    if (!states.empty() && h <= states.back()) {
      probs.back() += p;
    } else {
      states.push_back(h);
      probs.push_back(p);
    }
  }
  return FadingDistribution::discrete(std::move(states), std::move(probs));
}

inline std::string FadingDistribution::describe() const {
  struct Namer {
    std::string operator()(const law::Discrete& d) const {
      return "discrete(" + std::to_string(d.states.size()) + " states)";
    }
    std::string operator()(const law::Rayleigh& d) const {
      return "rayleigh(m2=" + std::to_string(d.m2) + ")";
    }
    std::string operator()(const law::Uniform& d) const {
      return "uniform(" + std::to_string(d.low) + "," + std::to_string(d.high) + ")";
    }
    std::string operator()(const law::Tabulated& d) const {
      return "tabulated(" + std::to_string(d.h.size()) + " samples)";
    }
    std::string operator()(const law::Weighted& d) const {
      return "weighted(" + d.base->describe() + ", alpha=" + std::to_string(d.alpha) + ")";
    }
    std::string operator()(const law::Conditioned& d) const {
      return "conditioned(" + d.base->describe() + ")";
    }
  };
  return std::visit(Namer{}, *law_);
}

/// Union of all users' CDF jump levels and the per-user expanded states.
struct LevelGrid {
  std::vector<double> levels;                    // gamma_l, strictly increasing, back() == 1
  std::vector<double> widths;                    // gamma_l - gamma_{l-1}
  std::vector<std::vector<double>> states;       // states[i][l] = h_il
  std::vector<std::vector<std::size_t>> index;   // index[i][l] = position of h_il in user i's law
  std::vector<FadingDistribution> users;

  std::size_t num_users() const noexcept { return users.size(); }
  std::size_t num_levels() const noexcept { return levels.size(); }
};

inline LevelGrid build_level_grid(const std::vector<FadingDistribution>& dists) {
  if (dists.empty()) throw InvalidInput("level grid needs at least one user");
  std::vector<double> all;
  for (const auto& dist : dists) {
    const auto& d = dist.as_discrete();
    all.insert(all.end(), d.cumulative.begin(), d.cumulative.end());
  }
  std::sort(all.begin(), all.end());
  LevelGrid g;
  for (double c : all)
    if (g.levels.empty() || c - g.levels.back() > kLevelMergeTol) g.levels.push_back(c);
  if (1.0 - g.levels.back() <= kLevelMergeTol) g.levels.back() = 1.0;
  double prev = 0.0;
  for (double c : g.levels) {
    g.widths.push_back(c - prev);
    prev = c;
  }
  g.users = dists;
  for (const auto& dist : dists) {
    const auto& d = dist.as_discrete();
    std::vector<double> h;
    std::vector<std::size_t> idx;
    for (double c : g.levels) {
      idx.push_back(FadingDistribution::state_index(d, c));
      h.push_back(d.states[idx.back()]);
    }
    g.states.push_back(std::move(h));
    g.index.push_back(std::move(idx));
  }
  return g;
}

}  // namespace macadapt
