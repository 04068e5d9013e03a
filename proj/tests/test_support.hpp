#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/rng.hpp"

namespace macadapt::fixtures {

inline FadingDistribution two_state(double a, double b) { return FadingDistribution::discrete({a, b}, {0.5, 0.5}); }

/// The 2x2 reference instance: {(1,.5),(2,.5)} and {(1,.5),(3,.5)} at unit power.
inline MacInstance reference_pair() {
  MacInstance inst;
  inst.users = {two_state(1, 2), two_state(1, 3)};
  inst.powers = {1.0, 1.0};
  return inst;
}

/// Random discrete law with 1..max_states states. Half the time the
/// probabilities sit on a 0.1 grid so that levels coincide across users.
inline FadingDistribution random_discrete(CounterRng& rng, std::size_t max_states, bool allow_zero_state = true) {
  const std::size_t k = 1 + std::size_t(rng.next_u64() % max_states);
  std::vector<double> states;
  double h = allow_zero_state && rng.next_open01() < 0.15 ? 0.0 : 0.1 + 2.0 * rng.next_open01();
  for (std::size_t j = 0; j < k; ++j) {
    states.push_back(h);
    h += 0.05 + 1.5 * rng.next_open01();
  }
  std::vector<double> probs(k);
  if (rng.next_open01() < 0.5 && k <= 10) {
    std::vector<int> tenths(k, 1);
    for (int extra = 10 - int(k); extra > 0; --extra) ++tenths[rng.next_u64() % k];
    for (std::size_t j = 0; j < k; ++j) probs[j] = tenths[j] / 10.0;
  } else {
    double total = 0.0;
    for (auto& p : probs) total += (p = 0.05 + rng.next_open01());
    for (auto& p : probs) p /= total;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) sum += probs[j];
  probs.back() = 1.0 - sum;
  return FadingDistribution::discrete(states, probs);
}

inline MacInstance random_instance(CounterRng& rng, std::size_t n, std::size_t max_states) {
  MacInstance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.users.push_back(random_discrete(rng, max_states));
    inst.powers.push_back(0.2 + 4.0 * rng.next_open01());
  }
  return inst;
}

}  // namespace macadapt::fixtures
