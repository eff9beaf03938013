#pragma once

#include <cstdint>

namespace bcl {

/// Counter-based pseudo-random stream (splitmix64). Each replicate of an
/// ensemble owns an independent stream derived from (seed, stream_id), so
/// serial and parallel execution produce identical draws.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static Rng stream(uint64_t seed, uint64_t stream_id);

  inline uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on (0, 1]; never returns 0 so log() is always safe.
  inline double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal (ziggurat).
  double next_normal();

  /// Exponential with mean 1 (ziggurat).
  double next_exponential();

 private:
  uint64_t state_;
};

}  // namespace bcl
