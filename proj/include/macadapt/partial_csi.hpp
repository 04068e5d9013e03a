#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/power_control.hpp"
#include "macadapt/weighted_region.hpp"

namespace macadapt {

/// Threshold quantizer on [0, inf): cell k is [b_{k-1}, b_k) with b_0 = 0 and
/// the last cell open above.
struct Quantizer {
  std::vector<double> breakpoints;

  void validate() const {
    for (std::size_t k = 0; k < breakpoints.size(); ++k) {
      if (!(breakpoints[k] > 0.0) || !std::isfinite(breakpoints[k]))
        throw InvalidInput("quantizer breakpoints must be finite and positive");
      if (k > 0 && !(breakpoints[k] > breakpoints[k - 1]))
        throw InvalidInput("quantizer breakpoints must be strictly increasing");
    }
  }
  std::size_t num_cells() const noexcept { return breakpoints.size() + 1; }
  double lower(std::size_t k) const { return k == 0 ? 0.0 : breakpoints[k - 1]; }
  double upper(std::size_t k) const {
    return k < breakpoints.size() ? breakpoints[k] : std::numeric_limits<double>::infinity();
  }
};

struct QuantizedCell {
  std::size_t index = 0;
  double lo = 0.0, hi = 0.0;
  double prob = 0.0;
  double min_magnitude = 0.0;               // infimum of the cell's support
  std::optional<FadingDistribution> law;    // conditional law; empty when prob == 0
};

inline std::vector<QuantizedCell> quantize(const FadingDistribution& dist, const Quantizer& q) {
  q.validate();
  std::vector<QuantizedCell> out;
  double prev = 0.0;
  for (std::size_t k = 0; k < q.num_cells(); ++k) {
    QuantizedCell c;
    c.index = k;
    c.lo = q.lower(k);
    c.hi = q.upper(k);
    const double below_hi = std::isinf(c.hi) ? 1.0 : dist.cdf_below(c.hi);
    c.prob = std::max(0.0, below_hi - prev);
    prev = below_hi;
    if (c.prob > 0.0) {
      c.law = condition_on(dist, c.lo, c.hi);
      c.min_magnitude = c.law->support_min();
    }
    out.push_back(std::move(c));
  }
  return out;
}

struct CsiCell {
  std::size_t i = 0, j = 0;  // cell of user 1 and of user 2
  double q1 = 0.0, q2 = 0.0;
  MacInstance sub;           // users conditioned on the cell
};

struct CellDecomposition {
  std::vector<QuantizedCell> cells1, cells2;
  std::vector<CsiCell> cells;       // nonzero-probability pairs, row-major in (i, j)
  std::vector<std::string> notes;   // dropped cells
};

/// Splits a two-user instance into the independent per-cell problems that
/// arise when each transmitter also learns the other's quantized magnitude.
inline CellDecomposition cell_decompose(const MacInstance& inst, const Quantizer& q1, const Quantizer& q2) {
  inst.validate();
  if (inst.size() != 2) throw InvalidInput("partial cross-CSI is defined for two users");
  CellDecomposition dec;
  dec.cells1 = quantize(inst.users[0], q1);
  dec.cells2 = quantize(inst.users[1], q2);
  for (const auto* cells : {&dec.cells1, &dec.cells2})
    for (const auto& c : *cells)
      if (!c.law)
        dec.notes.push_back("user " + std::to_string(cells == &dec.cells1 ? 1 : 2) + " cell " +
                            std::to_string(c.index + 1) + " has probability zero and is dropped");
  for (const auto& a : dec.cells1) {
    if (!a.law) continue;
    for (const auto& b : dec.cells2) {
      if (!b.law) continue;
      CsiCell cell;
      cell.i = a.index;
      cell.j = b.index;
      cell.q1 = a.prob;
      cell.q2 = b.prob;
      cell.sub = inst;
      cell.sub.users = {*a.law, *b.law};
      dec.cells.push_back(std::move(cell));
    }
  }
  return dec;
}

struct PartialCsiResult {
  double value = 0.0;
  std::vector<double> expected;  // aggregated E[R_1], E[R_2]
  CellDecomposition decomposition;
  std::vector<WeightedSumResult> per_cell;  // aligned with decomposition.cells
  bool discretized = false;
};

inline PartialCsiResult weighted_sum_with_partial_csi(const MacInstance& inst, const Quantizer& q1,
                                                      const Quantizer& q2, std::span<const double> w,
                                                      const WeightedOptions& opt = {}) {
  PartialCsiResult res;
  res.decomposition = cell_decompose(inst, q1, q2);
  std::vector<double> values, e1, e2;
  for (const auto& cell : res.decomposition.cells) {
    auto r = weighted_sum_capacity(cell.sub, w, opt);
    const double c = cell.q1 * cell.q2;
    values.push_back(c * r.value);
    e1.push_back(c * r.expected[0]);
    e2.push_back(c * r.expected[1]);
    res.discretized = res.discretized || r.discretized;
    res.per_cell.push_back(std::move(r));
  }
  res.value = stable_sum(values);
  res.expected = {stable_sum(e1), stable_sum(e2)};
  return res;
}

inline PartialCsiResult weighted_sum_with_partial_csi(const MacInstance& inst, const Quantizer& q1,
                                                      const Quantizer& q2, double alpha,
                                                      const WeightedOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0,1]");
  const std::vector<double> w{1.0, alpha};
  return weighted_sum_with_partial_csi(inst, q1, q2, w, opt);
}

/// Region boundary with quantized cross-CSI, aggregated over cells.
inline RegionBoundary region_sweep_partial(const MacInstance& inst, const Quantizer& q1, const Quantizer& q2,
                                           std::vector<double> alpha_grid = cosine_alpha_grid(),
                                           const WeightedOptions& opt = {}) {
  return sweep_with(
      [&](const std::vector<double>& w, std::size_t direction) {
        WeightedOptions o = opt;
        o.tie_priority = direction - 1;
        return weighted_sum_with_partial_csi(inst, q1, q2, w, o);
      },
      std::move(alpha_grid));
}

struct PartialPowerResult {
  double value = 0.0;
  std::vector<PowerLaw> per_cell;           // aligned with decomposition.cells
  std::vector<std::vector<double>> usage;   // usage[c][i]: user i's conditional average power in cell c
  CellDecomposition decomposition;
  double kkt_residual = 0.0;
  double restart_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  bool converged = false;
};

/// Power control with quantized cross-CSI. All cells are optimized jointly:
/// each user's average budget is shared across cells in proportion to the
/// cell probabilities, and the per-cell received powers are nondecreasing.
inline PartialPowerResult optimize_power_partial(const MacInstance& inst, const Quantizer& q1, const Quantizer& q2,
                                                 std::span<const double> w, const PowerOptions& opt = {}) {
  PartialPowerResult res;
  res.decomposition = cell_decompose(inst, q1, q2);
  std::vector<PowerBlock> blocks;
  for (const auto& cell : res.decomposition.cells) blocks.push_back({cell.sub, cell.q1 * cell.q2});
  PowerProblem prob(blocks, inst.powers, w, opt.tie_priority, opt.pins);
  auto sol = solve_power_problem(prob, opt);
  res.value = sol.value;
  res.kkt_residual = sol.residual;
  res.restart_value = sol.restart_value;
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    res.per_cell.push_back(prob.unstack(sol.x, c));
    std::vector<double> used(2, 0.0);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < res.per_cell.back().power[i].size(); ++j)
        used[i] += prob.probs(i, c)[j] * res.per_cell.back().power[i][j];
    res.usage.push_back(std::move(used));
  }
  return res;
}

}  // namespace macadapt
