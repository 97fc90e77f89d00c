#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "san/tensor.hpp"

namespace san {

/// Circular 2-D convolution
///   y[p,q] = sum_{a,b} w[a,b] x[(p - a) mod H, (q - b) mod W].
/// Throws DimensionError if the kernel is larger than the plane.
Tensor cyclic_conv2(PlaneView x, PlaneView kernel);

/// y_i = sum_j w_ij * x_j over all input channels.
MultiChannelSignal mimo_conv(const KernelBank& bank, const MultiChannelSignal& x);

std::vector<double> channel_norms(const MultiChannelSignal& x);
double channel_sup_norm(const MultiChannelSignal& x);
/// Number of channels whose Euclidean norm exceeds eps.
std::size_t channel_support_count(const MultiChannelSignal& x, double eps = 0.0);

/// Raw-buffer cyclic convolution kernels shared by mimo_conv and the network
/// layers. Weights are [m, n, kh, kw]; signals [n, H, W] in, [m, H, W] out.
struct ConvGeometry {
  std::size_t out_channels;
  std::size_t in_channels;
  std::size_t kernel_height;
  std::size_t kernel_width;
  std::size_t height;
  std::size_t width;

  void validate() const;
};

/// output += W * input
void conv_forward_accumulate(const ConvGeometry& g, std::span<const double> weight,
                             std::span<const double> input, std::span<double> output);
/// input_grad += W^T * output_grad
void conv_backward_input(const ConvGeometry& g, std::span<const double> weight,
                         std::span<const double> output_grad, std::span<double> input_grad);
/// weight_grad += d<output_grad, W * input>/dW
void conv_backward_weight(const ConvGeometry& g, std::span<const double> input,
                          std::span<const double> output_grad, std::span<double> weight_grad);

}  // namespace san
