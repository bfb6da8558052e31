#pragma once

#include <cstdint>

namespace cpest {

/// Deterministic 64-bit generator (splitmix64). Chosen over std engines so that
/// seeded runs produce identical streams on every platform and standard library.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [-amplitude, +amplitude].
  double next_symmetric(double amplitude) { return amplitude * (2.0 * next_u01() - 1.0); }

 private:
  std::uint64_t state_;
};

}  // namespace cpest
