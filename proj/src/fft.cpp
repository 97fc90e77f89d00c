#include "san/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "san/errors.hpp"

namespace san {

namespace {

using cplx = std::complex<double>;

void check_target(const PlaneView& input, std::size_t height, std::size_t width) {
  if (height < input.rows || width < input.cols)
    throw DimensionError("transform size " + std::to_string(height) + "x" + std::to_string(width) +
                         " is smaller than the " + std::to_string(input.rows) + "x" +
                         std::to_string(input.cols) + " input");
}

// Iterative radix-2 Cooley-Tukey on a strided sequence.
void fft1d_radix2(cplx* x, std::size_t n, std::size_t stride, bool inverse) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i * stride], x[j * stride]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<cplx> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      twiddle[k] = cplx(std::cos(angle), std::sin(angle));
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx& a = x[(start + k) * stride];
        cplx& b = x[(start + k + half) * stride];
        const cplx t = twiddle[k] * b;
        b = a - t;
        a += t;
      }
    }
  }
}

void dft1d_direct(cplx* x, std::size_t n, std::size_t stride, bool inverse) {
  std::vector<cplx> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t * stride] * cplx(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  for (std::size_t k = 0; k < n; ++k) x[k * stride] = out[k];
}

void transform1d(cplx* x, std::size_t n, std::size_t stride, bool inverse) {
  if (is_power_of_two(n))
    fft1d_radix2(x, n, stride, inverse);
  else
    dft1d_direct(x, n, stride, inverse);
}

std::vector<cplx> padded_grid(const PlaneView& input, std::size_t height, std::size_t width) {
  std::vector<cplx> grid(height * width);
  for (std::size_t r = 0; r < input.rows; ++r)
    for (std::size_t c = 0; c < input.cols; ++c) grid[r * width + c] = input(r, c);
  return grid;
}

ComplexSpectrum to_spectrum(const std::vector<cplx>& grid, std::size_t height, std::size_t width) {
  ComplexSpectrum s(height, width);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    s.re()[k] = grid[k].real();
    s.im()[k] = grid[k].imag();
  }
  return s;
}

std::vector<cplx> from_spectrum(const ComplexSpectrum& s) {
  std::vector<cplx> grid(s.height() * s.width());
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = cplx(s.re()[k], s.im()[k]);
  return grid;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft2_inplace(std::vector<cplx>& grid, std::size_t height, std::size_t width, bool inverse) {
  if (grid.size() != height * width) throw DimensionError("fft2_inplace: grid size mismatch");
  for (std::size_t r = 0; r < height; ++r) transform1d(grid.data() + r * width, width, 1, inverse);
  for (std::size_t c = 0; c < width; ++c) transform1d(grid.data() + c, height, width, inverse);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(height * width);
    for (auto& z : grid) z *= scale;
  }
}

ComplexSpectrum fft2(PlaneView input, std::size_t height, std::size_t width) {
  check_target(input, height, width);
  if (!is_power_of_two(height) || !is_power_of_two(width)) return naive_dft2(input, height, width);
  auto grid = padded_grid(input, height, width);
  fft2_inplace(grid, height, width, false);
  return to_spectrum(grid, height, width);
}

ComplexSpectrum naive_dft2(PlaneView input, std::size_t height, std::size_t width) {
  check_target(input, height, width);
  ComplexSpectrum s(height, width);
  for (std::size_t u = 0; u < height; ++u) {
    for (std::size_t v = 0; v < width; ++v) {
      double re = 0.0, im = 0.0;
      for (std::size_t p = 0; p < input.rows; ++p) {
        for (std::size_t q = 0; q < input.cols; ++q) {
          // Reduce the phase index exactly before converting to an angle.
          const std::size_t phase = ((u * p) % height) * width + ((v * q) % width) * height;
          const double angle = -2.0 * std::numbers::pi * static_cast<double>(phase % (height * width)) /
                               static_cast<double>(height * width);
          re += input(p, q) * std::cos(angle);
          im += input(p, q) * std::sin(angle);
        }
      }
      s.re()[u * width + v] = re;
      s.im()[u * width + v] = im;
    }
  }
  return s;
}

ComplexSpectrum fft2(const ComplexSpectrum& input) {
  auto grid = from_spectrum(input);
  fft2_inplace(grid, input.height(), input.width(), false);
  return to_spectrum(grid, input.height(), input.width());
}

ComplexSpectrum ifft2(const ComplexSpectrum& input) {
  auto grid = from_spectrum(input);
  fft2_inplace(grid, input.height(), input.width(), true);
  return to_spectrum(grid, input.height(), input.width());
}

}  // namespace san
