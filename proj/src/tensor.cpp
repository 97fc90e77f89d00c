#include "san/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "san/errors.hpp"

namespace san {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be >= 1, got " + shape_string(shape));
}
}  // namespace

Tensor::Tensor() : shape_{1}, values_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_product(shape_))
    throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_product(shape_)) + " values, got " +
                         std::to_string(values_.size()));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size())
    throw DimensionError("index rank " + std::to_string(index.size()) + " vs tensor rank " +
                         std::to_string(shape_.size()));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw DimensionError("index out of range for " + shape_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return values_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return values_[offset(index)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_product(shape) != values_.size())
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor& Tensor::operator*=(double scale) {
  for (auto& v : values_) v *= scale;
  return *this;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other))
    throw DimensionError("cannot add " + shape_string(other.shape_) + " to " + shape_string(shape_));
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

double Tensor::norm() const {
  double s = 0.0;
  for (auto v : values_) s += v * v;
  return std::sqrt(s);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (auto v : values_) m = std::max(m, std::abs(v));
  return m;
}

PlaneView::PlaneView(std::span<const double> v, std::size_t r, std::size_t c)
    : values(v), rows(r), cols(c) {
  if (r == 0 || c == 0) throw DimensionError("plane dimensions must be >= 1");
  if (v.size() != r * c)
    throw DimensionError("plane " + std::to_string(r) + "x" + std::to_string(c) + " needs " +
                         std::to_string(r * c) + " values, got " + std::to_string(v.size()));
}

PlaneView::PlaneView(const Tensor& plane) {
  if (plane.rank() != 2)
    throw DimensionError("plane view needs a rank-2 tensor, got " + shape_string(plane.shape()));
  *this = PlaneView(plane.values(), plane.dim(0), plane.dim(1));
}

MultiChannelSignal::MultiChannelSignal(std::size_t channels, std::size_t height, std::size_t width)
    : data_({channels, height, width}) {}

MultiChannelSignal::MultiChannelSignal(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 3)
    throw DimensionError("multi-channel signal needs shape [n,H,W], got " +
                         shape_string(data_.shape()));
}

PlaneView MultiChannelSignal::channel(std::size_t i) const {
  if (i >= channels()) throw DimensionError("channel index out of range");
  const std::size_t hw = height() * width();
  return PlaneView(data_.values().subspan(i * hw, hw), height(), width());
}

std::span<double> MultiChannelSignal::channel_values(std::size_t i) {
  if (i >= channels()) throw DimensionError("channel index out of range");
  const std::size_t hw = height() * width();
  return data_.values().subspan(i * hw, hw);
}

KernelBank::KernelBank(std::size_t out_channels, std::size_t in_channels,
                       std::size_t kernel_height, std::size_t kernel_width)
    : data_({out_channels, in_channels, kernel_height, kernel_width}) {}

KernelBank::KernelBank(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 4)
    throw DimensionError("kernel bank needs shape [m,n,kh,kw], got " + shape_string(data_.shape()));
}

PlaneView KernelBank::filter(std::size_t out, std::size_t in) const {
  if (out >= out_channels() || in >= in_channels()) throw DimensionError("filter index out of range");
  const std::size_t k = kernel_height() * kernel_width();
  return PlaneView(data_.values().subspan((out * in_channels() + in) * k, k), kernel_height(),
                   kernel_width());
}

std::span<double> KernelBank::filter_values(std::size_t out, std::size_t in) {
  if (out >= out_channels() || in >= in_channels()) throw DimensionError("filter index out of range");
  const std::size_t k = kernel_height() * kernel_width();
  return data_.values().subspan((out * in_channels() + in) * k, k);
}

ComplexSpectrum::ComplexSpectrum(std::size_t height, std::size_t width)
    : re_({height, width}), im_({height, width}) {}

ComplexSpectrum::ComplexSpectrum(Tensor re, Tensor im) : re_(std::move(re)), im_(std::move(im)) {
  if (re_.rank() != 2 || !re_.same_shape(im_))
    throw DimensionError("spectrum needs matching [H,W] real and imaginary parts");
}

double ComplexSpectrum::magnitude(std::size_t u, std::size_t v) const {
  const std::size_t k = u * width() + v;
  return std::hypot(re_[k], im_[k]);
}

}  // namespace san
