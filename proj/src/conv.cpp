#include "san/conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "san/errors.hpp"

namespace san {

void ConvGeometry::validate() const {
  if (kernel_height > height || kernel_width > width)
    throw DimensionError("kernel " + std::to_string(kernel_height) + "x" + std::to_string(kernel_width) +
                         " does not fit a " + std::to_string(height) + "x" + std::to_string(width) +
                         " plane");
}

namespace {

// dst[q] += w * src[(q - shift) mod W]
inline void add_shifted_row(double* dst, const double* src, std::size_t width, std::size_t shift,
                            double w) {
  for (std::size_t q = 0; q < shift; ++q) dst[q] += w * src[q + width - shift];
  for (std::size_t q = shift; q < width; ++q) dst[q] += w * src[q - shift];
}

// dst[s] += w * src[(s + shift) mod W]
inline void add_unshifted_row(double* dst, const double* src, std::size_t width, std::size_t shift,
                              double w) {
  const std::size_t split = width - shift;
  for (std::size_t s = 0; s < split; ++s) dst[s] += w * src[s + shift];
  for (std::size_t s = split; s < width; ++s) dst[s] += w * src[s + shift - width];
}

// sum_q a[q] * b[(q - shift) mod W]
inline double dot_shifted_row(const double* a, const double* b, std::size_t width, std::size_t shift) {
  double acc = 0.0;
  for (std::size_t q = 0; q < shift; ++q) acc += a[q] * b[q + width - shift];
  for (std::size_t q = shift; q < width; ++q) acc += a[q] * b[q - shift];
  return acc;
}

void check_sizes(const ConvGeometry& g, std::size_t weight, std::size_t in, std::size_t out) {
  g.validate();
  const std::size_t hw = g.height * g.width;
  if (weight != g.out_channels * g.in_channels * g.kernel_height * g.kernel_width ||
      in != g.in_channels * hw || out != g.out_channels * hw)
    throw DimensionError("convolution buffer sizes do not match the geometry");
}

}  // namespace

void conv_forward_accumulate(const ConvGeometry& g, std::span<const double> weight,
                             std::span<const double> input, std::span<double> output) {
  check_sizes(g, weight.size(), input.size(), output.size());
  const std::size_t H = g.height, W = g.width, hw = H * W;
  const std::size_t kh = g.kernel_height, kw = g.kernel_width, kk = kh * kw;
  const std::size_t m = g.out_channels, n = g.in_channels;
  if (hw == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += weight[i * n + j] * input[j];
      output[i] += acc;
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    double* y = output.data() + i * hw;
    for (std::size_t j = 0; j < n; ++j) {
      const double* x = input.data() + j * hw;
      const double* w = weight.data() + (i * n + j) * kk;
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double wab = w[a * kw + b];
          if (wab == 0.0) continue;
          for (std::size_t p = 0; p < H; ++p) {
            const std::size_t r = (p + H - a) % H;
            add_shifted_row(y + p * W, x + r * W, W, b, wab);
          }
        }
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> weight,
                         std::span<const double> output_grad, std::span<double> input_grad) {
  check_sizes(g, weight.size(), input_grad.size(), output_grad.size());
  const std::size_t H = g.height, W = g.width, hw = H * W;
  const std::size_t kh = g.kernel_height, kw = g.kernel_width, kk = kh * kw;
  const std::size_t m = g.out_channels, n = g.in_channels;
  if (hw == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = output_grad[i];
      if (gi == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) input_grad[j] += weight[i * n + j] * gi;
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* gy = output_grad.data() + i * hw;
    for (std::size_t j = 0; j < n; ++j) {
      double* gx = input_grad.data() + j * hw;
      const double* w = weight.data() + (i * n + j) * kk;
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double wab = w[a * kw + b];
          if (wab == 0.0) continue;
          // gx[r, s] += w[a,b] * gy[(r + a) mod H, (s + b) mod W]
          for (std::size_t r = 0; r < H; ++r) {
            const std::size_t p = (r + a) % H;
            add_unshifted_row(gx + r * W, gy + p * W, W, b, wab);
          }
        }
      }
    }
  }
}

void conv_backward_weight(const ConvGeometry& g, std::span<const double> input,
                          std::span<const double> output_grad, std::span<double> weight_grad) {
  check_sizes(g, weight_grad.size(), input.size(), output_grad.size());
  const std::size_t H = g.height, W = g.width, hw = H * W;
  const std::size_t kh = g.kernel_height, kw = g.kernel_width, kk = kh * kw;
  const std::size_t m = g.out_channels, n = g.in_channels;
  if (hw == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = output_grad[i];
      if (gi == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) weight_grad[i * n + j] += gi * input[j];
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* gy = output_grad.data() + i * hw;
    for (std::size_t j = 0; j < n; ++j) {
      const double* x = input.data() + j * hw;
      double* gw = weight_grad.data() + (i * n + j) * kk;
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          double acc = 0.0;
          for (std::size_t p = 0; p < H; ++p) {
            const std::size_t r = (p + H - a) % H;
            acc += dot_shifted_row(gy + p * W, x + r * W, W, b);
          }
          gw[a * kw + b] += acc;
        }
      }
    }
  }
}

Tensor cyclic_conv2(PlaneView x, PlaneView kernel) {
  const ConvGeometry g{1, 1, kernel.rows, kernel.cols, x.rows, x.cols};
  g.validate();
  Tensor y({x.rows, x.cols});
  conv_forward_accumulate(g, kernel.values, x.values, y.values());
  return y;
}

MultiChannelSignal mimo_conv(const KernelBank& bank, const MultiChannelSignal& x) {
  if (x.channels() != bank.in_channels())
    throw DimensionError("signal has " + std::to_string(x.channels()) + " channels, bank expects " +
                         std::to_string(bank.in_channels()));
  const ConvGeometry g{bank.out_channels(), bank.in_channels(), bank.kernel_height(),
                       bank.kernel_width(), x.height(), x.width()};
  g.validate();
  MultiChannelSignal y(bank.out_channels(), x.height(), x.width());
  conv_forward_accumulate(g, bank.tensor().values(), x.tensor().values(), y.tensor().values());
  return y;
}

std::vector<double> channel_norms(const MultiChannelSignal& x) {
  std::vector<double> norms(x.channels());
  for (std::size_t i = 0; i < x.channels(); ++i) {
    double s = 0.0;
    for (double v : x.channel(i).values) s += v * v;
    norms[i] = std::sqrt(s);
  }
  return norms;
}

double channel_sup_norm(const MultiChannelSignal& x) {
  const auto norms = channel_norms(x);
  return *std::max_element(norms.begin(), norms.end());
}

std::size_t channel_support_count(const MultiChannelSignal& x, double eps) {
  if (eps < 0.0) throw std::invalid_argument("channel_support_count: eps must be >= 0");
  const auto norms = channel_norms(x);
  return static_cast<std::size_t>(std::count_if(norms.begin(), norms.end(), [eps](double v) { return v > eps; }));
}

}  // namespace san
