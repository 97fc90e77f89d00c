#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "san/rng.hpp"
#include "san/tensor.hpp"

namespace testutil {

inline san::Tensor random_tensor(san::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  san::Tensor t(std::move(shape));
  san::CounterRng rng(seed);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline san::Tensor gaussian_tensor(san::Shape shape, std::uint64_t seed, double std = 1.0) {
  san::Tensor t(std::move(shape));
  san::CounterRng rng(seed);
  for (auto& v : t.values()) v = std * rng.normal();
  return t;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// Max |a - b| over max |b|.
inline double rel_diff(const san::Tensor& a, const san::Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace testutil
