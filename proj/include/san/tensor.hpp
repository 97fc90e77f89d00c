#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace san {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor. Values are held at 64-bit in memory; the on-disk
/// .sant container stores them as 32-bit floats.
class Tensor {
 public:
  /// A single zero, shape {1}.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Bounds-checked multi-index access.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Tensor reshaped(Shape shape) const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(double value);
  Tensor& operator*=(double scale);
  Tensor& operator+=(const Tensor& other);

  /// Euclidean norm with the sum accumulated at 64-bit.
  double norm() const;
  double max_abs() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Read-only view of an H x W real plane stored row-major.
struct PlaneView {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  PlaneView() = default;
  PlaneView(std::span<const double> v, std::size_t r, std::size_t c);
  /// A rank-2 tensor viewed as a plane.
  PlaneView(const Tensor& plane);  // NOLINT(google-explicit-constructor)

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// n-channel H x W feature map, backed by a [n, H, W] tensor.
class MultiChannelSignal {
 public:
  MultiChannelSignal(std::size_t channels, std::size_t height, std::size_t width);
  explicit MultiChannelSignal(Tensor data);

  std::size_t channels() const { return data_.dim(0); }
  std::size_t height() const { return data_.dim(1); }
  std::size_t width() const { return data_.dim(2); }

  PlaneView channel(std::size_t i) const;
  std::span<double> channel_values(std::size_t i);

  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }

 private:
  Tensor data_;
};

/// Convolution weights {w_ij} of one layer, backed by a [m, n, kh, kw] tensor:
/// filter (i, j) links input channel j to output channel i.
class KernelBank {
 public:
  KernelBank(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_height,
             std::size_t kernel_width);
  explicit KernelBank(Tensor data);

  std::size_t out_channels() const { return data_.dim(0); }
  std::size_t in_channels() const { return data_.dim(1); }
  std::size_t kernel_height() const { return data_.dim(2); }
  std::size_t kernel_width() const { return data_.dim(3); }
  std::size_t filter_count() const { return out_channels() * in_channels(); }

  PlaneView filter(std::size_t out, std::size_t in) const;
  std::span<double> filter_values(std::size_t out, std::size_t in);

  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }

 private:
  Tensor data_;
};

/// Complex 2-D spectrum, real and imaginary parts as [H, W] tensors.
class ComplexSpectrum {
 public:
  ComplexSpectrum(std::size_t height, std::size_t width);
  ComplexSpectrum(Tensor re, Tensor im);

  std::size_t height() const { return re_.dim(0); }
  std::size_t width() const { return re_.dim(1); }

  const Tensor& re() const { return re_; }
  const Tensor& im() const { return im_; }
  Tensor& re() { return re_; }
  Tensor& im() { return im_; }

  double magnitude(std::size_t u, std::size_t v) const;

 private:
  Tensor re_;
  Tensor im_;
};

}  // namespace san
