#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "macadapt/mac.hpp"
#include "test_support.hpp"

using namespace macadapt;

TEST(SubsetCapacity, Examples) {
  const std::vector<double> one{1, 1}, p{1, 1};
  EXPECT_NEAR(subset_capacity(one, p, 0b11), 0.792481250360578, 1e-12);
  EXPECT_EQ(subset_capacity(std::vector<double>{0, 5}, p, 0b01), 0.0);
  EXPECT_NEAR(subset_capacity(std::vector<double>{2, 3}, p, 0b11), 1.903677461028802, 1e-12);
  EXPECT_THROW(subset_capacity(one, p, 0), InvalidInput);
}

TEST(SubsetCapacity, MonotoneAndSubmodular) {
  CounterRng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> h(4), p(4);
    for (auto& v : h) v = 3.0 * rng.next_open01();
    for (auto& v : p) v = 3.0 * rng.next_open01();
    const SubsetMask S = SubsetMask(rng.next_u64() % 16), T = S | SubsetMask(rng.next_u64() % 16);
    const std::size_t i = rng.next_u64() % 4;
    const SubsetMask bit = SubsetMask(1) << i;
    if (T & bit) continue;
    auto f = [&](SubsetMask m) { return m ? subset_capacity(h, p, m) : 0.0; };
    // Marginal gain of i shrinks as the base set grows.
    ASSERT_GE(f(S | bit) - f(S), f(T | bit) - f(T) - 1e-14);
    auto h2 = h;
    h2[i] += 0.5;
    ASSERT_GE(subset_capacity(h2, p, S | bit), subset_capacity(h, p, S | bit));
  }
}

TEST(IsFeasible, Examples) {
  const std::vector<double> h{1, 1}, p{1, 1};
  EXPECT_TRUE(is_feasible(std::vector<double>{0, 0}, h, p, 0).feasible);
  EXPECT_TRUE(is_feasible(std::vector<double>{0.5, 0.29248}, h, p, 0).feasible);
  auto r = is_feasible(std::vector<double>{0.8, 0.1}, h, p, 0);
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.worst_subset, 0b01u);
  EXPECT_NEAR(r.max_violation, 0.3, 1e-12);
}

TEST(IsFeasible, ReducingARateKeepsFeasibility) {
  CounterRng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> h(3), p(3), r(3);
    for (auto& v : h) v = 2.0 * rng.next_open01();
    for (auto& v : p) v = 2.0 * rng.next_open01();
    for (auto& v : r) v = 0.6 * rng.next_open01();
    if (!is_feasible(r, h, p, 0).feasible) continue;
    r[rng.next_u64() % 3] *= rng.next_open01();
    ASSERT_TRUE(is_feasible(r, h, p, 0).feasible);
  }
}

TEST(SumBound, Examples) {
  MacInstance single;
  single.users = {FadingDistribution::discrete({1}, {1}), FadingDistribution::discrete({1}, {1})};
  single.powers = {1, 1};
  EXPECT_NEAR(sum_capacity_upper_bound(single), 0.792481250360578, 1e-12);
  EXPECT_NEAR(sum_capacity_upper_bound(fixtures::reference_pair()), 1.34807935569469, 1e-12);

  MacInstance silent = fixtures::reference_pair();
  silent.users[1] = FadingDistribution::discrete({0}, {1});
  const double alone = 0.5 * 0.5 * std::log2(2.0) + 0.5 * 0.5 * std::log2(5.0);
  EXPECT_NEAR(sum_capacity_upper_bound(silent), alone, 1e-12);
}

TEST(SumBound, ContinuousSingleUserMatchesExpectation) {
  MacInstance inst;
  inst.users = {FadingDistribution::uniform(0.0, 2.0)};
  inst.powers = {3.0};
  // E[1/2 log2(1 + 3 H^2)], H ~ U[0,2]: antiderivative of log(1+a x^2).
  const double a = 3.0, b = 2.0;
  const double integral = b * std::log1p(a * b * b) - 2.0 * b + 2.0 * std::atan(std::sqrt(a) * b) / std::sqrt(a);
  EXPECT_NEAR(sum_capacity_upper_bound(inst), 0.5 * integral / b / std::log(2.0), 1e-9);
}

TEST(SumBound, SameLawViaOwnLevelGrid) {
  CounterRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = fixtures::random_instance(rng, 1, 5);
    // A single-user instance evaluated directly as an expectation.
    const auto& d = inst.users[0].as_discrete();
    double direct = 0;
    for (std::size_t j = 0; j < d.states.size(); ++j)
      direct += d.probs[j] * half_log1p(d.states[j] * d.states[j] * inst.powers[0], LogBase::bits);
    ASSERT_NEAR(sum_capacity_upper_bound(inst), direct, 1e-12);
  }
}

TEST(LogConcavityGap, Examples) {
  EXPECT_NEAR(log_concavity_gap(0, 2, 1, 1), 0.415037499278844, 1e-12);
  EXPECT_EQ(log_concavity_gap(1, 2, 1, 2), 0.0);
  EXPECT_NEAR(log_concavity_gap(1, 3, 2, 2), 0.169925001442312, 1e-12);
  EXPECT_THROW(log_concavity_gap(1, 1, 0, 3), InvalidInput);
  EXPECT_THROW(log_concavity_gap(0, 2, 1, 2), InvalidInput);
}

TEST(LogConcavityGap, NonnegativeOnRandomQuadruples) {
  CounterRng rng(13);
  for (int trial = 0; trial < 10000; ++trial) {
    const double u1 = 5 * rng.next_open01(), u2 = 5 * rng.next_open01();
    const double lo = std::min(u1, u2), hi = std::max(u1, u2);
    const double v1 = lo + (hi - lo) * rng.next_open01();
    const double v2 = lo + hi - v1;
    ASSERT_GE(log_concavity_gap(lo, hi, v1, v2), -1e-15);
  }
}

TEST(MacInstance, Validation) {
  MacInstance inst = fixtures::reference_pair();
  inst.weights = {0, 0};
  EXPECT_THROW(inst.validate(), InvalidInput);
  inst.weights = {};
  inst.powers = {1, -1};
  EXPECT_THROW(inst.validate(), InvalidInput);
}
