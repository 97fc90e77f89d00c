#include "san/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "san/conv.hpp"
#include "san/errors.hpp"

namespace san::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

ConvGeometry geometry(const ConvCyclic& c, const Shape3& in) {
  return {c.weight.dim(0), c.weight.dim(1), c.weight.dim(2), c.weight.dim(3), in.height, in.width};
}

}  // namespace

std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
         std::to_string(s.width) + ")";
}

std::string layer_kind(const Layer& layer) {
  return std::visit(Overloaded{[](const ConvCyclic&) { return std::string("conv_cyclic"); },
                               [](const Dense&) { return std::string("dense"); },
                               [](const Relu&) { return std::string("relu"); },
                               [](const LeakyRelu&) { return std::string("leaky_relu"); },
                               [](const Tanh&) { return std::string("tanh"); },
                               [](const MeanPool&) { return std::string("mean_pool"); },
                               [](const Reshape&) { return std::string("reshape"); }},
                    layer);
}

bool has_parameters(const Layer& layer) {
  return std::holds_alternative<ConvCyclic>(layer) || std::holds_alternative<Dense>(layer);
}

Shape3 layer_output_shape(const Layer& layer, const Shape3& in) {
  return std::visit(
      Overloaded{
          [&](const ConvCyclic& c) {
            if (c.weight.rank() != 4) throw DimensionError("conv weight must be [m,n,kh,kw]");
            const std::size_t m = c.weight.dim(0);
            if (c.bias.shape() != Shape{m}) throw DimensionError("conv bias must be [m]");
            if (c.weight.dim(1) != in.channels)
              throw DimensionError("conv expects " + std::to_string(c.weight.dim(1)) +
                                   " input channels, got shape " + to_string(in));
            geometry(c, in).validate();
            return Shape3{m, in.height, in.width};
          },
          [&](const Dense& d) {
            if (d.weight.rank() != 2) throw DimensionError("dense weight must be [out,in]");
            if (d.weight.dim(1) != in.size())
              throw DimensionError("dense expects " + std::to_string(d.weight.dim(1)) +
                                   " inputs, got shape " + to_string(in));
            if (d.bias.shape() != Shape{d.weight.dim(0)}) throw DimensionError("dense bias must be [out]");
            return Shape3{d.weight.dim(0), 1, 1};
          },
          [&](const LeakyRelu& l) {
            if (!(l.slope > 0.0 && l.slope < 1.0)) throw std::invalid_argument("leaky ReLU slope must lie in (0,1)");
            return in;
          },
          [&](const MeanPool&) { return Shape3{in.channels, 1, 1}; },
          [&](const Reshape& r) {
            if (r.target.size() != in.size())
              throw DimensionError("cannot reshape " + to_string(in) + " to " + to_string(r.target));
            return r.target;
          },
          [&](const auto&) { return in; }},
      layer);
}

Model::Model(Shape3 input, std::vector<Layer> layers)
    : input_(input), layers_(std::move(layers)), shapes_{input} {
  if (input.size() == 0) throw DimensionError("model input shape must be non-empty");
  for (const auto& layer : layers_) shapes_.push_back(layer_output_shape(layer, shapes_.back()));
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    if (auto* c = std::get_if<ConvCyclic>(&layer)) {
      out.push_back(&c->weight);
      out.push_back(&c->bias);
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      out.push_back(&d->weight);
      out.push_back(&d->bias);
    }
  }
  return out;
}

std::vector<const Tensor*> Model::parameters() const {
  std::vector<const Tensor*> out;
  for (auto* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

ModelBuilder::ModelBuilder(Shape3 input, std::uint64_t seed)
    : input_(input), current_(input), rng_(seed) {}

ModelBuilder& ModelBuilder::add(Layer layer) {
  current_ = layer_output_shape(layer, current_);
  layers_.push_back(std::move(layer));
  return *this;
}

ModelBuilder& ModelBuilder::conv(std::size_t out_channels, std::size_t kernel) {
  return conv(out_channels, kernel, kernel);
}

ModelBuilder& ModelBuilder::conv(std::size_t out_channels, std::size_t kh, std::size_t kw) {
  const std::size_t n = current_.channels;
  const double bound = 1.0 / std::sqrt(static_cast<double>(n * kh * kw));
  ConvCyclic c{Tensor({out_channels, n, kh, kw}), Tensor({out_channels})};
  for (auto& v : c.weight.values()) v = rng_.uniform(-bound, bound);
  for (auto& v : c.bias.values()) v = rng_.uniform(-bound, bound);
  return add(std::move(c));
}

ModelBuilder& ModelBuilder::dense(std::size_t out) {
  const std::size_t in = current_.size();
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d{Tensor({out, in}), Tensor({out})};
  for (auto& v : d.weight.values()) v = rng_.uniform(-bound, bound);
  for (auto& v : d.bias.values()) v = rng_.uniform(-bound, bound);
  return add(std::move(d));
}

ModelBuilder& ModelBuilder::relu() { return add(Relu{}); }
ModelBuilder& ModelBuilder::leaky_relu(double slope) { return add(LeakyRelu{slope}); }
ModelBuilder& ModelBuilder::tanh() { return add(Tanh{}); }
ModelBuilder& ModelBuilder::mean_pool() { return add(MeanPool{}); }
ModelBuilder& ModelBuilder::reshape(Shape3 target) { return add(Reshape{target}); }

Model ModelBuilder::build() const { return Model(input_, layers_); }

Tensor make_batch(std::size_t samples, const Shape3& shape) {
  return Tensor({samples, shape.channels, shape.height, shape.width});
}

Shape3 sample_shape(const Tensor& batch) {
  if (batch.rank() != 4) throw DimensionError("batch must be [M,c,h,w], got " + shape_string(batch.shape()));
  return {batch.dim(1), batch.dim(2), batch.dim(3)};
}

namespace {

Tensor layer_forward(const Layer& layer, const Shape3& in, const Shape3& out, const Tensor& x) {
  const std::size_t batch = x.dim(0);
  const std::size_t in_size = in.size(), out_size = out.size();
  Tensor y = make_batch(batch, out);
  const double* xs = x.data();
  double* ys = y.data();
  std::visit(
      Overloaded{
          [&](const ConvCyclic& c) {
            const auto g = geometry(c, in);
            const std::size_t hw = in.height * in.width;
            for (std::size_t s = 0; s < batch; ++s) {
              double* ysample = ys + s * out_size;
              for (std::size_t i = 0; i < out.channels; ++i)
                for (std::size_t k = 0; k < hw; ++k) ysample[i * hw + k] = c.bias[i];
              conv_forward_accumulate(g, c.weight.values(), {xs + s * in_size, in_size},
                                      {ysample, out_size});
            }
          },
          [&](const Dense& d) {
            const double* w = d.weight.data();
            for (std::size_t s = 0; s < batch; ++s) {
              const double* xv = xs + s * in_size;
              for (std::size_t o = 0; o < out_size; ++o) {
                double acc = d.bias[o];
                const double* row = w + o * in_size;
                for (std::size_t i = 0; i < in_size; ++i) acc += row[i] * xv[i];
                ys[s * out_size + o] = acc;
              }
            }
          },
          [&](const Relu&) {
            for (std::size_t k = 0; k < x.size(); ++k) ys[k] = xs[k] > 0.0 ? xs[k] : 0.0;
          },
          [&](const LeakyRelu& l) {
            for (std::size_t k = 0; k < x.size(); ++k) ys[k] = xs[k] > 0.0 ? xs[k] : l.slope * xs[k];
          },
          [&](const Tanh&) {
            for (std::size_t k = 0; k < x.size(); ++k) ys[k] = std::tanh(xs[k]);
          },
          [&](const MeanPool&) {
            const std::size_t hw = in.height * in.width;
            for (std::size_t s = 0; s < batch; ++s)
              for (std::size_t c = 0; c < in.channels; ++c) {
                double acc = 0.0;
                const double* plane = xs + s * in_size + c * hw;
                for (std::size_t k = 0; k < hw; ++k) acc += plane[k];
                ys[s * out_size + c] = acc / static_cast<double>(hw);
              }
          },
          [&](const Reshape&) { std::copy(xs, xs + x.size(), ys); }},
      layer);
  return y;
}

void check_input(const Model& model, const Tensor& batch) {
  if (sample_shape(batch) != model.input_shape())
    throw DimensionError("batch sample shape " + to_string(sample_shape(batch)) +
                         " does not match model input " + to_string(model.input_shape()));
}

}  // namespace

ForwardPass forward(const Model& model, const Tensor& batch) {
  check_input(model, batch);
  ForwardPass pass;
  pass.activations.reserve(model.size() + 1);
  pass.activations.push_back(batch);
  for (std::size_t l = 0; l < model.size(); ++l)
    pass.activations.push_back(layer_forward(model.layer(l), model.shape_before(l),
                                             model.shape_before(l + 1), pass.activations.back()));
  return pass;
}

Tensor predict(const Model& model, const Tensor& batch) {
  check_input(model, batch);
  Tensor x = batch;
  for (std::size_t l = 0; l < model.size(); ++l)
    x = layer_forward(model.layer(l), model.shape_before(l), model.shape_before(l + 1), x);
  return x;
}

std::vector<const Tensor*> Gradients::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& t : parameters) out.push_back(&t);
  return out;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (parameters.size() != other.parameters.size())
    throw DimensionError("cannot accumulate gradients of different models");
  for (std::size_t k = 0; k < parameters.size(); ++k) parameters[k] += other.parameters[k];
  return *this;
}

Gradients backward(const Model& model, const ForwardPass& pass, const Tensor& output_grad,
                   bool parameter_grads) {
  if (pass.activations.size() != model.size() + 1)
    throw std::logic_error("backward: forward cache missing or from another model");
  if (!output_grad.same_shape(pass.output()))
    throw DimensionError("output gradient shape " + shape_string(output_grad.shape()) +
                         " does not match output " + shape_string(pass.output().shape()));

  const std::size_t batch = output_grad.dim(0);
  std::vector<Tensor> layer_grads;  // collected back to front
  Tensor g = output_grad;

  for (std::size_t l = model.size(); l-- > 0;) {
    const Layer& layer = model.layer(l);
    const Shape3& in = model.shape_before(l);
    const Shape3& out = model.shape_before(l + 1);
    const std::size_t in_size = in.size(), out_size = out.size();
    const Tensor& x = pass.activations[l];
    const Tensor& y = pass.activations[l + 1];
    Tensor gx = make_batch(batch, in);
    const double* gs = g.data();
    const double* xs = x.data();
    double* gxs = gx.data();

    std::visit(
        Overloaded{
            [&](const ConvCyclic& c) {
              const auto geo = geometry(c, in);
              const std::size_t hw = in.height * in.width;
              Tensor gw(c.weight.shape()), gb(c.bias.shape());
              for (std::size_t s = 0; s < batch; ++s) {
                std::span<const double> gsample{gs + s * out_size, out_size};
                conv_backward_input(geo, c.weight.values(), gsample, {gxs + s * in_size, in_size});
                if (parameter_grads) {
                  conv_backward_weight(geo, {xs + s * in_size, in_size}, gsample, gw.values());
                  for (std::size_t i = 0; i < out.channels; ++i) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < hw; ++k) acc += gsample[i * hw + k];
                    gb[i] += acc;
                  }
                }
              }
              if (parameter_grads) {
                layer_grads.push_back(std::move(gb));
                layer_grads.push_back(std::move(gw));
              }
            },
            [&](const Dense& d) {
              const double* w = d.weight.data();
              Tensor gw(d.weight.shape()), gb(d.bias.shape());
              for (std::size_t s = 0; s < batch; ++s) {
                const double* gv = gs + s * out_size;
                const double* xv = xs + s * in_size;
                double* gxv = gxs + s * in_size;
                for (std::size_t o = 0; o < out_size; ++o) {
                  const double go = gv[o];
                  if (go == 0.0) continue;
                  const double* row = w + o * in_size;
                  for (std::size_t i = 0; i < in_size; ++i) gxv[i] += row[i] * go;
                  if (parameter_grads) {
                    double* grow = gw.data() + o * in_size;
                    for (std::size_t i = 0; i < in_size; ++i) grow[i] += go * xv[i];
                    gb[o] += go;
                  }
                }
              }
              if (parameter_grads) {
                layer_grads.push_back(std::move(gb));
                layer_grads.push_back(std::move(gw));
              }
            },
            [&](const Relu&) {
              for (std::size_t k = 0; k < gx.size(); ++k) gxs[k] = xs[k] > 0.0 ? gs[k] : 0.0;
            },
            [&](const LeakyRelu& lr) {
              for (std::size_t k = 0; k < gx.size(); ++k) gxs[k] = xs[k] > 0.0 ? gs[k] : lr.slope * gs[k];
            },
            [&](const Tanh&) {
              const double* ys = y.data();
              for (std::size_t k = 0; k < gx.size(); ++k) gxs[k] = gs[k] * (1.0 - ys[k] * ys[k]);
            },
            [&](const MeanPool&) {
              const std::size_t hw = in.height * in.width;
              const double scale = 1.0 / static_cast<double>(hw);
              for (std::size_t s = 0; s < batch; ++s)
                for (std::size_t c = 0; c < in.channels; ++c) {
                  const double v = gs[s * out_size + c] * scale;
                  double* plane = gxs + s * in_size + c * hw;
                  for (std::size_t k = 0; k < hw; ++k) plane[k] = v;
                }
            },
            [&](const Reshape&) { std::copy(gs, gs + g.size(), gxs); }},
        layer);
    g = std::move(gx);
  }

  Gradients result;
  result.parameters.assign(std::make_move_iterator(layer_grads.rbegin()),
                           std::make_move_iterator(layer_grads.rend()));
  result.input = std::move(g);
  return result;
}

namespace {
void check_scores(const Tensor& scores, const char* what) {
  if (scores.size() == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}
}  // namespace

HingeLoss hinge_critic_loss(const Tensor& real, const Tensor& fake) {
  check_scores(real, "hinge_critic_loss");
  check_scores(fake, "hinge_critic_loss");
  HingeLoss loss{0.0, Tensor(real.shape()), Tensor(fake.shape())};
  const double nr = static_cast<double>(real.size()), nf = static_cast<double>(fake.size());
  double sr = 0.0, sf = 0.0;
  for (std::size_t k = 0; k < real.size(); ++k) {
    const double margin = 1.0 - real[k];
    if (margin > 0.0) {
      sr += margin;
      loss.grad_real[k] = -1.0 / nr;
    }
  }
  for (std::size_t k = 0; k < fake.size(); ++k) {
    const double margin = 1.0 + fake[k];
    if (margin > 0.0) {
      sf += margin;
      loss.grad_fake[k] = 1.0 / nf;
    }
  }
  loss.value = sr / nr + sf / nf;
  return loss;
}

ScalarLoss generator_loss(const Tensor& fake) {
  check_scores(fake, "generator_loss");
  const double n = static_cast<double>(fake.size());
  ScalarLoss loss{0.0, Tensor(fake.shape(), -1.0 / n)};
  double s = 0.0;
  for (double v : fake.values()) s += v;
  loss.value = -s / n;
  return loss;
}

ScalarLoss mse_loss(const Tensor& prediction, const Tensor& target) {
  check_scores(prediction, "mse_loss");
  if (prediction.size() != target.size()) throw DimensionError("mse_loss: size mismatch");
  const double n = static_cast<double>(prediction.size());
  ScalarLoss loss{0.0, Tensor(prediction.shape())};
  double s = 0.0;
  for (std::size_t k = 0; k < prediction.size(); ++k) {
    const double d = prediction[k] - target[k];
    s += d * d;
    loss.grad[k] = 2.0 * d / n;
  }
  loss.value = s / n;
  return loss;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state) {
  if (!(state.beta1 >= 0.0 && state.beta1 < 1.0 && state.beta2 >= 0.0 && state.beta2 < 1.0))
    throw std::invalid_argument("Adam momentum coefficients must lie in [0, 1)");
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adam_step: state/parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (!params[k]->same_shape(*grads[k]) || !params[k]->same_shape(state.first_moment[k]))
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(k));

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k]->data();
    const double* g = grads[k]->data();
    double* m = state.first_moment[k].data();
    double* v = state.second_moment[k].data();
    for (std::size_t i = 0; i < params[k]->size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= state.alpha * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

void adam_step(Model& model, const Gradients& grads, AdamState& state) {
  const auto params = model.parameters();
  const auto g = grads.tensors();
  adam_step(std::span<Tensor* const>(params), std::span<const Tensor* const>(g), state);
}

void sgd_step(Model& model, const Gradients& grads, double learning_rate) {
  const auto params = model.parameters();
  if (params.size() != grads.parameters.size()) throw DimensionError("sgd_step: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads.parameters[k])) throw DimensionError("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < params[k]->size(); ++i) (*params[k])[i] -= learning_rate * grads.parameters[k][i];
  }
}

std::pair<double, double> slope_at_infinity(std::span<const double> w1, std::span<const double> b1,
                                            std::span<const double> w2) {
  if (w1.size() != w2.size() || b1.size() != w1.size())
    throw DimensionError("slope_at_infinity: w1, b1 and w2 must have the same width");
  double neg = 0.0, pos = 0.0;
  for (std::size_t i = 0; i < w1.size(); ++i) {
    if (w1[i] > 0.0) pos += w1[i] * w2[i];
    if (w1[i] < 0.0) neg += w1[i] * w2[i];
  }
  return {neg, pos};
}

Model two_layer_relu(std::span<const double> w1, std::span<const double> b1, std::span<const double> w2,
                     double b2) {
  if (w1.size() != w2.size() || b1.size() != w1.size() || w1.empty())
    throw DimensionError("two_layer_relu: widths must agree");
  const std::size_t n = w1.size();
  Dense first{Tensor({n, 1}, std::vector<double>(w1.begin(), w1.end())),
              Tensor({n}, std::vector<double>(b1.begin(), b1.end()))};
  Dense second{Tensor({1, n}, std::vector<double>(w2.begin(), w2.end())), Tensor({1}, b2)};
  return Model(Shape3{1, 1, 1}, {std::move(first), Relu{}, std::move(second)});
}

}  // namespace san::nn
