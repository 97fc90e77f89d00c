#pragma once

#include <cstdint>

namespace san {

/// Counter-based SplitMix64 generator.
///
/// Draw number i (0-based) of a stream with key `seed` is
/// `mix(seed + (i + 1) * 0x9E3779B97F4A7C15)`, where `mix` is the SplitMix64
/// finalizer. The output depends only on (seed, i), so sequences are
/// reproducible across platforms, and a generator can be repositioned by
/// setting its counter. Floating-point variates are derived with explicit
/// formulas (no <random> distributions, whose algorithms are
/// implementation-defined).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (cosine branch; two draws per variate).
  double normal();
  /// Unit-rate exponential, -log(1 - U).
  double exponential();
  /// Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t counter) { counter_ = counter; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Independent child key for (seed, tag); used to give every consumer
/// (data, latents, init, subset draws) its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace san
