#pragma once

#include <cstdint>

namespace macadapt {

/// Counter-based SplitMix64: draw k of stream (seed) is a pure function of
/// (seed, k), so any block range can be regenerated independently.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) noexcept : seed_(seed), counter_(counter) {}

  static std::uint64_t at(std::uint64_t seed, std::uint64_t counter) noexcept {
    std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() noexcept { return at(seed_, counter_++); }

  /// Uniform on the open interval (0,1) with 53-bit resolution.
  double next_open01() noexcept { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_, counter_;
};

}  // namespace macadapt
