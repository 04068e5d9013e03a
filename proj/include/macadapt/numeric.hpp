#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include "macadapt/errors.hpp"

namespace macadapt {

/// Unit of every rate in the library. Bits per real channel use by default.
enum class LogBase { bits, nats };

/// Multiplier converting a natural logarithm into the requested base.
constexpr double log_scale(LogBase base) noexcept {
  return base == LogBase::bits ? 1.0 / std::numbers::ln2 : 1.0;
}

/// 1/2 log(1 + snr) in the requested base.
inline double half_log1p(double snr, LogBase base) noexcept {
  return 0.5 * std::log1p(snr) * log_scale(base);
}

struct QuadOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  std::size_t max_panels = 4000;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15 constants).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gauss_kronrod(F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double sum = f(centre - dx) + f(centre + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature of f over the partition given by
/// `points` (sorted, at least two entries). Interior points are forced panel
/// boundaries, which is how callers keep kinks of the integrand off the nodes.
template <class F>
double integrate(F&& f, std::span<const double> points, const QuadOptions& opt = {}) {
  if (points.size() < 2) return 0.0;
  std::priority_queue<detail::Panel> heap;
  double total = 0.0, error = 0.0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    if (!(points[k + 1] > points[k])) continue;
    auto p = detail::gauss_kronrod(f, points[k], points[k + 1]);
    total += p.value;
    error += p.error;
    heap.push(p);
  }
  while (!heap.empty() && error > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) &&
         heap.size() < opt.max_panels) {
    auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    heap.pop();
    auto left = detail::gauss_kronrod(f, worst.a, mid);
    auto right = detail::gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  return total;
}

template <class F>
double integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
  const std::array<double, 2> pts{a, b};
  return integrate(std::forward<F>(f), std::span<const double>(pts), opt);
}

/// Sorts, clips to [lo, hi] and deduplicates a breakpoint list, always
/// including both ends.
inline std::vector<double> make_partition(std::vector<double> pts, double lo, double hi) {
  pts.push_back(lo);
  pts.push_back(hi);
  std::erase_if(pts, [&](double p) { return !(p >= lo && p <= hi) || !std::isfinite(p); });
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

/// Weighted pool-adjacent-violators: the nondecreasing sequence minimising
/// sum w_j (x_j - y_j)^2. Weights must be positive.
inline std::vector<double> isotonic_regression(std::span<const double> y, std::span<const double> w) {
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    blocks.push_back({y[j], w[j], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      auto top = blocks.back();
      blocks.pop_back();
      auto& prev = blocks.back();
      const double weight = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / weight;
      prev.weight = weight;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

/// Kahan-compensated sum; used where expected values are compared at 1e-12.
inline double stable_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace macadapt
