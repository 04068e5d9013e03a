#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "macadapt/partial_csi.hpp"
#include "macadapt/verify.hpp"
#include "test_support.hpp"

using namespace macadapt;

namespace {

MacInstance rayleigh_pair() {
  MacInstance inst;
  inst.users = {FadingDistribution::rayleigh(1.0), FadingDistribution::rayleigh(1.0)};
  inst.powers = {1.0, 1.0};
  return inst;
}

// Breakpoints halfway between consecutive states: every cell holds one state.
Quantizer revealing(const FadingDistribution& d) {
  Quantizer q;
  const auto& st = d.as_discrete().states;
  for (std::size_t j = 0; j + 1 < st.size(); ++j) q.breakpoints.push_back(0.5 * (st[j] + st[j + 1]));
  return q;
}

}  // namespace

TEST(Quantizer, ValidatesBreakpoints) {
  EXPECT_THROW((Quantizer{{0.5, 0.5}}.validate()), InvalidInput);
  EXPECT_THROW((Quantizer{{0.0}}.validate()), InvalidInput);
  EXPECT_NO_THROW((Quantizer{{0.2, 0.9}}.validate()));
  EXPECT_EQ((Quantizer{{0.2, 0.9}}.num_cells()), 3u);
}

TEST(Quantizer, DiscreteCellsFromThreshold) {
  auto cells = quantize(fixtures::two_state(1, 2), Quantizer{{1.5}});
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].prob, 0.5);
  EXPECT_EQ(cells[1].prob, 0.5);
  EXPECT_EQ(cells[0].law->as_discrete().states, std::vector<double>{1.0});
  EXPECT_EQ(cells[1].law->as_discrete().probs, std::vector<double>{1.0});
  EXPECT_EQ(cells[1].min_magnitude, 2.0);
}

TEST(Quantizer, ContinuousCellProbabilitiesSumToOne) {
  auto d = FadingDistribution::rayleigh(1.0);
  auto cells = quantize(d, Quantizer{{0.4, 1.0, 2.0}});
  double total = 0.0;
  for (const auto& c : cells) total += c.prob;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_NEAR(cells[0].prob, -std::expm1(-0.16), 1e-15);
  EXPECT_EQ(cells[1].min_magnitude, 0.4);
}

TEST(CellDecompose, TrivialQuantizerIsTheInstance) {
  auto inst = fixtures::reference_pair();
  auto dec = cell_decompose(inst, {}, {});
  ASSERT_EQ(dec.cells.size(), 1u);
  EXPECT_EQ(dec.cells[0].q1 * dec.cells[0].q2, 1.0);
  EXPECT_EQ(dec.cells[0].sub.users[0].as_discrete().states, inst.users[0].as_discrete().states);
}

TEST(CellDecompose, OuterProductAndDroppedCells) {
  auto inst = fixtures::reference_pair();
  auto dec = cell_decompose(inst, Quantizer{{1.5}}, Quantizer{{0.5, 2.0, 5.0}});
  EXPECT_EQ(dec.cells.size(), 4u);
  EXPECT_EQ(dec.notes.size(), 2u);  // [0,0.5) and [5,inf) hold no state of user 2
  for (const auto& c : dec.cells) EXPECT_EQ(c.q1 * c.q2, 0.25);
}

TEST(PartialCsi, TrivialQuantizersMatchBaseline) {
  auto inst = fixtures::reference_pair();
  for (double alpha : {0.3, 1.0}) {
    const std::vector<double> w{1.0, alpha};
    EXPECT_NEAR(weighted_sum_with_partial_csi(inst, {}, {}, alpha).value, weighted_sum_capacity(inst, w).value,
                1e-12);
  }
  auto cont = rayleigh_pair();
  const std::vector<double> w{1.0, 0.6};
  EXPECT_NEAR(weighted_sum_with_partial_csi(cont, {}, {}, 0.6).value, weighted_sum_capacity(cont, w).value, 1e-12);
}

TEST(PartialCsi, FullyRevealingGivesPentagonCorners) {
  CounterRng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = fixtures::random_instance(rng, 2, 4);
    const double alpha = 0.1 + 0.9 * rng.next_open01();
    auto r = weighted_sum_with_partial_csi(inst, revealing(inst.users[0]), revealing(inst.users[1]), alpha);
    const auto& d1 = inst.users[0].as_discrete();
    const auto& d2 = inst.users[1].as_discrete();
    double expect = 0.0;
    for (std::size_t a = 0; a < d1.states.size(); ++a)
      for (std::size_t b = 0; b < d2.states.size(); ++b) {
        const std::vector<double> h{d1.states[a], d2.states[b]};
        const double c1 = subset_capacity(h, inst.powers, 1, inst.log_base);
        const double c12 = subset_capacity(h, inst.powers, 3, inst.log_base);
        expect += d1.probs[a] * d2.probs[b] * (c1 + alpha * (c12 - c1));
      }
    EXPECT_NEAR(r.value, expect, 1e-12) << trial;
  }
}

TEST(PartialCsi, RefiningNeverHurts) {
  CounterRng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = fixtures::random_instance(rng, 2, 5);
    const double t = 0.5 + 2.0 * rng.next_open01();
    const Quantizer coarse{{t}}, fine{{0.5 * t, t, 2.0 * t}};
    for (double alpha : {0.2, 0.7, 1.0}) {
      const double none = weighted_sum_with_partial_csi(inst, {}, {}, alpha).value;
      const double one = weighted_sum_with_partial_csi(inst, coarse, {}, alpha).value;
      const double both = weighted_sum_with_partial_csi(inst, coarse, coarse, alpha).value;
      const double more = weighted_sum_with_partial_csi(inst, fine, coarse, alpha).value;
      ASSERT_GE(one, none - 1e-12);
      ASSERT_GE(both, one - 1e-12);
      ASSERT_GE(more, both - 1e-12);
    }
  }
}

TEST(PartialCsi, AggregatedRatesAreCellWeightedSums) {
  auto inst = fixtures::reference_pair();
  auto r = weighted_sum_with_partial_csi(inst, Quantizer{{1.5}}, Quantizer{{2.0}}, 0.4);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t c = 0; c < r.per_cell.size(); ++c) {
    const double q = r.decomposition.cells[c].q1 * r.decomposition.cells[c].q2;
    e1 += q * r.per_cell[c].expected[0];
    e2 += q * r.per_cell[c].expected[1];
  }
  EXPECT_NEAR(r.expected[0], e1, 1e-12);
  EXPECT_NEAR(r.expected[1], e2, 1e-12);
  EXPECT_NEAR(r.value, r.expected[0] + 0.4 * r.expected[1], 1e-12);
}

TEST(PartialCsi, PerCellLawsAreOutageFree) {
  CounterRng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = fixtures::random_instance(rng, 2, 5);
    auto r = weighted_sum_with_partial_csi(inst, Quantizer{{1.0}}, Quantizer{{1.2, 2.5}}, 0.5);
    for (std::size_t c = 0; c < r.per_cell.size(); ++c) {
      const auto& sub = r.decomposition.cells[c].sub;
      ASSERT_TRUE(exhaustive_outage_check(strategy_on_original(r.per_cell[c].law, sub), 1e-9).pass);
    }
  }
}

TEST(PartialCsi, SingleStateUsersGainNothing) {
  MacInstance inst;
  inst.users = {FadingDistribution::discrete({1.0}, {1.0}), FadingDistribution::discrete({1.0}, {1.0})};
  inst.powers = {1.0, 1.0};
  auto base = region_sweep(inst, cosine_alpha_grid(5));
  auto part = region_sweep_partial(inst, Quantizer{{0.4}}, Quantizer{{0.4}}, cosine_alpha_grid(5));
  for (std::size_t k = 0; k < base.points.size(); ++k) {
    EXPECT_NEAR(base.points[k].er1, part.points[k].er1, 1e-12);
    EXPECT_NEAR(base.points[k].er2, part.points[k].er2, 1e-12);
  }
}

TEST(PartialCsi, ThresholdOnRayleighEnlargesAndStaysSymmetric) {
  auto inst = rayleigh_pair();
  const Quantizer q{{0.4}};
  const auto grid = cosine_alpha_grid(5);
  WeightedOptions opt;
  opt.nodes = 300;
  auto base = region_sweep(inst, grid, opt);
  auto part = region_sweep_partial(inst, q, q, grid, opt);
  const std::size_t half = part.points.size() / 2;
  for (std::size_t k = 0; k < part.points.size(); ++k) {
    EXPECT_GE(part.points[k].weighted_value, base.points[k].weighted_value - 1e-9);
    if (k < half) {
      EXPECT_NEAR(part.points[k].er1, part.points[half + k].er2, 1e-6);
    }
  }
  EXPECT_EQ(part.convexity_violations, 0u);
  // A strict gain somewhere in the interior.
  EXPECT_GT(part.points[2].weighted_value, base.points[2].weighted_value + 1e-4);
}

TEST(PartialPower, TrivialQuantizerMatchesIndividualCsi) {
  auto inst = fixtures::reference_pair();
  inst.power_mode = PowerMode::average;
  const std::vector<double> w{1.0, 0.5};
  auto single = optimize_power(inst, w);
  auto part = optimize_power_partial(inst, {}, {}, w);
  EXPECT_NEAR(part.value, single.value, 1e-8);
}

TEST(PartialPower, CrossCsiNeverHurtsAndRespectsBudget) {
  CounterRng rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = fixtures::random_instance(rng, 2, 4);
    inst.power_mode = PowerMode::average;
    const std::vector<double> w{1.0, 0.3 + 0.7 * rng.next_open01()};
    auto single = optimize_power(inst, w);
    auto part = optimize_power_partial(inst, Quantizer{{1.0}}, Quantizer{{1.0}}, w);
    EXPECT_TRUE(part.converged);
    EXPECT_GE(part.value, single.value - 1e-7) << trial;
    EXPECT_NEAR(part.value, part.restart_value, 1e-6) << trial;
    for (std::size_t i = 0; i < 2; ++i) {
      double used = 0.0;
      for (std::size_t c = 0; c < part.usage.size(); ++c) {
        const auto& cell = part.decomposition.cells[c];
        used += cell.q1 * cell.q2 * part.usage[c][i];
        EXPECT_TRUE(monotonicity_check(cell.sub.users[i], part.per_cell[c].power[i]).ok);
      }
      EXPECT_LE(used, inst.powers[i] + 1e-9);
    }
  }
}
