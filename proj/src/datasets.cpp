#include "san/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "san/errors.hpp"
#include "san/fft.hpp"

namespace san::data {

std::vector<std::array<double, 2>> ring8_centers() {
  std::vector<std::array<double, 2>> centers;
  for (std::size_t k = 0; k < kRingModes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / kRingModes;
    centers.push_back({kRingRadius * std::cos(angle), kRingRadius * std::sin(angle)});
  }
  return centers;
}

Tensor sample_ring8(std::size_t samples, CounterRng& rng) {
  const auto centers = ring8_centers();
  Tensor batch({samples, 2, 1, 1});
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& c = centers[rng.below(kRingModes)];
    batch[2 * s] = c[0] + kRingStd * rng.normal();
    batch[2 * s + 1] = c[1] + kRingStd * rng.normal();
  }
  return batch;
}

ModeStats ring8_mode_stats(const Tensor& samples, double min_share) {
  if (samples.rank() < 2 || samples.size() != 2 * samples.dim(0))
    throw DimensionError("ring8 samples must be [M, 2, ...] with 2 values per sample, got " +
                         shape_string(samples.shape()));
  const std::size_t m = samples.dim(0);
  const auto centers = ring8_centers();
  const double radius = 3.0 * kRingStd;
  ModeStats stats;
  stats.counts.assign(kRingModes, 0);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const double x = samples[2 * s], y = samples[2 * s + 1];
    for (std::size_t k = 0; k < kRingModes; ++k) {
      if (std::hypot(x - centers[k][0], y - centers[k][1]) <= radius) {
        ++stats.counts[k];
        ++hits;
        break;  // modes are 1.5 apart, balls of radius 0.06 cannot overlap
      }
    }
  }
  for (auto c : stats.counts)
    if (m > 0 && static_cast<double>(c) >= min_share * static_cast<double>(m)) ++stats.covered;
  stats.hq_fraction = m > 0 ? static_cast<double>(hits) / static_cast<double>(m) : 0.0;
  return stats;
}

Tensor sample_textures16(std::size_t samples, CounterRng& rng) {
  constexpr std::size_t n = kTextureSize;
  Tensor batch({samples, 1, n, n});
  std::vector<std::complex<double>> grid(n * n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& g : grid) g = {rng.normal(), 0.0};
    fft2_inplace(grid, n, n, false);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        const double fu = static_cast<double>(std::min(u, n - u));
        const double fv = static_cast<double>(std::min(v, n - v));
        const double r = std::hypot(fu, fv);
        if (r < 2.0 || r > 4.0) grid[u * n + v] = 0.0;
      }
    }
    fft2_inplace(grid, n, n, true);
    double sum_sq = 0.0;
    for (const auto& g : grid) sum_sq += g.real() * g.real();
    const double scale = sum_sq > 0.0 ? 0.5 / std::sqrt(sum_sq / (n * n)) : 0.0;
    double* out = batch.data() + s * n * n;
    for (std::size_t i = 0; i < n * n; ++i) out[i] = std::clamp(grid[i].real() * scale, -1.0, 1.0);
  }
  return batch;
}

double triangle_wave(double x, double period, double amplitude) {
  if (!(period > 0.0)) throw std::invalid_argument("triangle wave period must be > 0");
  const double s = x / period + 0.25;
  const double f = s - std::floor(s);
  return amplitude * (1.0 - 4.0 * std::abs(f - 0.5));
}

}  // namespace san::data
