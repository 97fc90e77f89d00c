#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "san/rng.hpp"
#include "san/tensor.hpp"

namespace san::data {

inline constexpr std::size_t kRingModes = 8;
inline constexpr double kRingRadius = 2.0;
inline constexpr double kRingStd = 0.02;

/// Centers of the 8 mixture components, evenly spaced starting at angle 0.
std::vector<std::array<double, 2>> ring8_centers();
/// [M, 2, 1, 1] batch from the 8-Gaussian ring.
Tensor sample_ring8(std::size_t samples, CounterRng& rng);

struct ModeStats {
  std::size_t covered = 0;
  double hq_fraction = 0.0;
  std::vector<std::size_t> counts;
};
/// A sample belongs to a mode when it lies within 3 std of its center; a mode
/// is covered when it holds at least `min_share` of the samples.
ModeStats ring8_mode_stats(const Tensor& samples, double min_share = 0.01);

inline constexpr std::size_t kTextureSize = 16;
/// [M, 1, 16, 16] batch of band-limited noise: white noise kept at radial
/// frequencies in [2, 4], scaled to std 0.5 and clipped to [-1, 1].
Tensor sample_textures16(std::size_t samples, CounterRng& rng);

/// Zero-mean triangle wave with slopes +-4*amplitude/period and value 0 at x = 0.
double triangle_wave(double x, double period, double amplitude);

}  // namespace san::data
