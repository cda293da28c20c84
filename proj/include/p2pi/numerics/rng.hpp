#pragma once

#include <cstdint>

namespace p2pi::numerics {

/// Counter-based deterministic generator (splitmix64 finalizer over a
/// seed/stream/counter triple). Same (seed, stream, counter) gives the same
/// draw on every platform; streams derived from one seed are independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace p2pi::numerics
