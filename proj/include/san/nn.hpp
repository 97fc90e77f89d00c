#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "san/rng.hpp"
#include "san/tensor.hpp"

namespace san::nn {

/// Per-sample signal shape. Vectors are (width, 1, 1).
struct Shape3 {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

/// Stride-1 convolution with cyclic padding. weight [m, n, kh, kw], bias [m].
struct ConvCyclic {
  Tensor weight;
  Tensor bias;
};

/// Fully connected on the flattened input. weight [out, in], bias [out].
struct Dense {
  Tensor weight;
  Tensor bias;
};

struct Relu {};
struct LeakyRelu {
  double slope = 0.1;
};
struct Tanh {};
/// Spatial mean per channel: (c, H, W) -> (c, 1, 1).
struct MeanPool {};
/// Reinterprets the flattened sample with a new shape of equal size.
struct Reshape {
  Shape3 target;
};

using Layer = std::variant<ConvCyclic, Dense, Relu, LeakyRelu, Tanh, MeanPool, Reshape>;

std::string layer_kind(const Layer& layer);
bool has_parameters(const Layer& layer);
/// Throws DimensionError when the layer cannot consume `input`.
Shape3 layer_output_shape(const Layer& layer, const Shape3& input);

/// A sequence of layers with a fixed per-sample input shape. Shape
/// consistency is checked on construction.
class Model {
 public:
  Model() = default;
  Model(Shape3 input, std::vector<Layer> layers);

  const Shape3& input_shape() const { return input_; }
  const Shape3& output_shape() const { return shapes_.back(); }
  /// Shape entering layer l (l == size() gives the output shape).
  const Shape3& shape_before(std::size_t l) const { return shapes_.at(l); }

  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  /// Mutable access for in-place weight changes; shapes must not change.
  Layer& layer(std::size_t l) { return layers_.at(l); }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Weight and bias tensors in layer order (weight before bias).
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

 private:
  Shape3 input_{};
  std::vector<Layer> layers_;
  std::vector<Shape3> shapes_{Shape3{}};
};

/// Appends layers with weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) (biases likewise).
class ModelBuilder {
 public:
  ModelBuilder(Shape3 input, std::uint64_t seed);

  ModelBuilder& conv(std::size_t out_channels, std::size_t kernel);
  ModelBuilder& conv(std::size_t out_channels, std::size_t kernel_height, std::size_t kernel_width);
  ModelBuilder& dense(std::size_t out);
  ModelBuilder& relu();
  ModelBuilder& leaky_relu(double slope);
  ModelBuilder& tanh();
  ModelBuilder& mean_pool();
  ModelBuilder& reshape(Shape3 target);
  ModelBuilder& add(Layer layer);

  Model build() const;

 private:
  Shape3 input_;
  Shape3 current_;
  std::vector<Layer> layers_;
  CounterRng rng_;
};

/// Batches are [M, c, h, w] tensors.
Tensor make_batch(std::size_t samples, const Shape3& shape);
Shape3 sample_shape(const Tensor& batch);

struct ForwardPass {
  /// activations[0] is the input, activations[l + 1] the output of layer l.
  std::vector<Tensor> activations;
  const Tensor& output() const { return activations.back(); }
};

ForwardPass forward(const Model& model, const Tensor& batch);
/// Forward without keeping intermediate activations.
Tensor predict(const Model& model, const Tensor& batch);

struct Gradients {
  /// Ordered like Model::parameters(); empty when not requested.
  std::vector<Tensor> parameters;
  Tensor input;

  std::vector<const Tensor*> tensors() const;
  Gradients& operator+=(const Gradients& other);
};

/// Reverse-mode sweep. `output_grad` has the shape of pass.output().
/// ReLU-family derivatives at exactly 0 use the negative branch.
Gradients backward(const Model& model, const ForwardPass& pass, const Tensor& output_grad,
                   bool parameter_grads = true);

struct HingeLoss {
  double value = 0.0;
  Tensor grad_real;
  Tensor grad_fake;
};

/// mean(max(0, 1 - real)) + mean(max(0, 1 + fake))
HingeLoss hinge_critic_loss(const Tensor& real_scores, const Tensor& fake_scores);

struct ScalarLoss {
  double value = 0.0;
  Tensor grad;
};

/// -mean(fake)
ScalarLoss generator_loss(const Tensor& fake_scores);
/// mean((prediction - target)^2)
ScalarLoss mse_loss(const Tensor& prediction, const Tensor& target);

struct AdamState {
  double alpha = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long long step = 0;
};

/// Bias-corrected Adam update of `params` in place. Moments are created on
/// the first call and must keep their shapes afterwards.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state);
void adam_step(Model& model, const Gradients& grads, AdamState& state);
/// Plain gradient descent, params -= lr * grads.
void sgd_step(Model& model, const Gradients& grads, double learning_rate);

/// Asymptotic slopes (f'(-inf), f'(+inf)) of x -> w2^T relu(w1 x + b1) + b2.
std::pair<double, double> slope_at_infinity(std::span<const double> w1, std::span<const double> b1,
                                            std::span<const double> w2);

/// Dense(1->n) + ReLU + Dense(n->1) network with the given parameters.
Model two_layer_relu(std::span<const double> w1, std::span<const double> b1,
                     std::span<const double> w2, double b2);

}  // namespace san::nn
