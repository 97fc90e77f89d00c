#include "san/gan_lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "san/checkpoint.hpp"
#include "san/conv.hpp"
#include "san/datasets.hpp"
#include "san/errors.hpp"
#include "san/operator_norms.hpp"
#include "san/rng.hpp"

namespace san::lab {

namespace {

// Stream tags so every consumer of the run seed draws independently.
enum : std::uint64_t {
  kTagData = 1,
  kTagLatent = 2,
  kTagCritic = 3,
  kTagGenerator = 4,
  kTagNormalize = 5,
  kTagEvalLatent = 6,
  kTagEvalReal = 7,
  kTagFitInit = 8,
};

constexpr std::size_t kFitEvalPoints = 1001;
constexpr std::size_t kProbeSamples = 256;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt(v[i]);
  }
  return s;
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json json_numbers(const std::vector<double>& v) {
  auto j = nlohmann::json::array();
  for (double x : v) j.push_back(json_number(x));
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

Tensor sample_latent(const ExperimentConfig& c, std::size_t samples, CounterRng& rng) {
  Tensor z({samples, c.latent_dim, 1, 1});
  for (auto& v : z.values()) v = rng.normal();
  return z;
}

double mean_grad_norm(const nn::Gradients& g) {
  if (g.parameters.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : g.parameters) s += t.norm();
  return s / static_cast<double>(g.parameters.size());
}

void optimizer_step(const ExperimentConfig& c, nn::Model& model, const nn::Gradients& grads, nn::AdamState& state) {
  if (c.optimizer == OptimizerKind::sgd)
    nn::sgd_step(model, grads, c.alpha);
  else
    nn::adam_step(model, grads, state);
}

nn::AdamState make_adam(const ExperimentConfig& c) {
  nn::AdamState s;
  s.alpha = c.alpha;
  s.beta1 = c.beta1;
  s.beta2 = c.beta2;
  return s;
}

// Channel norms of every sample of a [M, c, h, w] batch, flattened sample-major.
std::vector<double> batch_channel_norms(const Tensor& batch) {
  const nn::Shape3 s = nn::sample_shape(batch);
  const std::size_t m = batch.dim(0), plane = s.height * s.width;
  std::vector<double> norms(m * s.channels);
  for (std::size_t k = 0; k < norms.size(); ++k) {
    const double* p = batch.data() + k * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i] * p[i];
    norms[k] = std::sqrt(acc);
  }
  return norms;
}

template <class Enum, std::size_t N>
Enum parse_enum(const std::string& name, const Enum (&all)[N], const char* what) {
  for (Enum e : all)
    if (to_string(e) == name) return e;
  throw std::invalid_argument(std::string("unknown ") + what + " '" + name + "'");
}

}  // namespace

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::ring8: return "ring8";
    case DatasetKind::triangle_wave: return "triangle_wave";
    case DatasetKind::identity_line: return "identity_line";
    case DatasetKind::textures16: return "textures16";
  }
  return "unknown";
}

std::string to_string(NormOrder order) { return order == NormOrder::pre ? "pre" : "post"; }
std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

DatasetKind dataset_from_string(const std::string& name) {
  static const DatasetKind all[] = {DatasetKind::ring8, DatasetKind::triangle_wave, DatasetKind::identity_line,
                                    DatasetKind::textures16};
  return parse_enum(name, all, "dataset");
}

NormOrder norm_order_from_string(const std::string& name) {
  static const NormOrder all[] = {NormOrder::pre, NormOrder::post};
  return parse_enum(name, all, "norm_order");
}

OptimizerKind optimizer_from_string(const std::string& name) {
  static const OptimizerKind all[] = {OptimizerKind::adam, OptimizerKind::sgd};
  return parse_enum(name, all, "optimizer");
}

void ExperimentConfig::validate() const {
  policy.validate();
  if (n_dis < 1) throw std::invalid_argument("n_dis must be >= 1");
  if (batch < 2) throw std::invalid_argument("batch must be >= 2");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("beta1 and beta2 must lie in [0, 1)");
  if (dataset == DatasetKind::triangle_wave && !(period > 0.0))
    throw std::invalid_argument("triangle_wave period must be > 0");
  if (!(x_max > x_min)) throw std::invalid_argument("x_max must exceed x_min");
  if (channels < 1 || latent_dim < 1) throw std::invalid_argument("channels and latent_dim must be >= 1");
  if (eval_samples < 1) throw std::invalid_argument("eval_samples must be >= 1");
  if (fit_points < 2) throw std::invalid_argument("fit_points must be >= 2");
  if (!(critic_slope >= 0.0 && critic_slope < 1.0)) throw std::invalid_argument("critic_slope must lie in [0, 1)");
  if (!(sparsity_eps >= 0.0)) throw std::invalid_argument("sparsity_eps must be >= 0");
}

std::size_t ExperimentConfig::hidden_width() const {
  if (hidden > 0) return hidden;
  return is_fit_dataset() ? 100 : 64;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") {
        if (v.is_object()) {
          for (const auto& [dk, dv] : v.items()) {
            if (dk == "name" || dk == "kind") c.dataset = dataset_from_string(dv.get<std::string>());
            else if (dk == "period") c.period = dv.get<double>();
            else if (dk == "amplitude") c.amplitude = dv.get<double>();
            else if (dk == "x_min") c.x_min = dv.get<double>();
            else if (dk == "x_max") c.x_max = dv.get<double>();
            else throw std::invalid_argument("unknown dataset field '" + dk + "'");
          }
        } else {
          c.dataset = dataset_from_string(v.get<std::string>());
        }
      }
      else if (key == "period") c.period = v.get<double>();
      else if (key == "amplitude") c.amplitude = v.get<double>();
      else if (key == "x_min") c.x_min = v.get<double>();
      else if (key == "x_max") c.x_max = v.get<double>();
      else if (key == "policy") c.policy = policy_from_json(v);
      else if (key == "n_dis") c.n_dis = v.get<int>();
      else if (key == "batch" || key == "M") c.batch = v.get<std::size_t>();
      else if (key == "steps") c.steps = v.get<long long>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "optimizer") c.optimizer = optimizer_from_string(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "eval_every") c.eval_every = v.get<long long>();
      else if (key == "norm_order") c.norm_order = norm_order_from_string(v.get<std::string>());
      else if (key == "hidden") c.hidden = v.get<std::size_t>();
      else if (key == "critic_slope") c.critic_slope = v.get<double>();
      else if (key == "critic_hidden") c.critic_hidden = v.get<std::size_t>();
      else if (key == "generator_hidden") c.generator_hidden = v.get<std::size_t>();
      else if (key == "channels") c.channels = v.get<std::size_t>();
      else if (key == "latent_dim") c.latent_dim = v.get<std::size_t>();
      else if (key == "eval_samples") c.eval_samples = v.get<std::size_t>();
      else if (key == "fit_points") c.fit_points = v.get<std::size_t>();
      else if (key == "sparsity_eps") c.sparsity_eps = v.get<double>();
      else if (key == "record_timing") c.record_timing = v.get<bool>();
      else if (key == "checkpoint_dir") c.checkpoint_dir = v.get<std::string>();
      else throw std::invalid_argument("unknown config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["dataset"] = to_string(c.dataset);
  j["period"] = c.period;
  j["amplitude"] = c.amplitude;
  j["x_min"] = c.x_min;
  j["x_max"] = c.x_max;
  j["policy"] = to_json(c.policy);
  j["n_dis"] = c.n_dis;
  j["batch"] = c.batch;
  j["steps"] = c.steps;
  j["alpha"] = c.alpha;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["optimizer"] = to_string(c.optimizer);
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["norm_order"] = to_string(c.norm_order);
  j["hidden"] = c.hidden;
  j["critic_hidden"] = c.critic_hidden;
  j["critic_slope"] = c.critic_slope;
  j["generator_hidden"] = c.generator_hidden;
  j["channels"] = c.channels;
  j["latent_dim"] = c.latent_dim;
  j["eval_samples"] = c.eval_samples;
  j["fit_points"] = c.fit_points;
  j["sparsity_eps"] = c.sparsity_eps;
  j["record_timing"] = c.record_timing;
  j["checkpoint_dir"] = c.checkpoint_dir;
  return j;
}

namespace {

void critic_activation(nn::ModelBuilder& b, const ExperimentConfig& c) {
  if (c.critic_slope > 0.0)
    b.leaky_relu(c.critic_slope);
  else
    b.relu();
}

}  // namespace

nn::Model make_critic(const ExperimentConfig& c, std::uint64_t seed) {
  switch (c.dataset) {
    case DatasetKind::ring8: {
      // A 3-layer MLP written as 1x1 convolutions on a 1x1 plane.
      const std::size_t h = c.critic_hidden ? c.critic_hidden : c.hidden_width();
      nn::ModelBuilder b({2, 1, 1}, seed);
      b.conv(h, 1);
      critic_activation(b, c);
      b.conv(h, 1);
      critic_activation(b, c);
      return b.conv(1, 1).build();
    }
    case DatasetKind::textures16: {
      const std::size_t ch = c.channels;
      nn::ModelBuilder b({1, data::kTextureSize, data::kTextureSize}, seed);
      for (int k = 0; k < 4; ++k) {
        b.conv(ch, 3);
        critic_activation(b, c);
      }
      b.mean_pool().dense(ch);
      critic_activation(b, c);
      return b.dense(1).build();
    }
    default: break;
  }
  throw std::invalid_argument("dataset " + to_string(c.dataset) + " has no GAN critic");
}

nn::Model make_generator(const ExperimentConfig& c, std::uint64_t seed) {
  const nn::Shape3 latent{c.latent_dim, 1, 1};
  switch (c.dataset) {
    case DatasetKind::ring8: {
      const std::size_t h = c.generator_hidden ? c.generator_hidden : c.hidden_width();
      return nn::ModelBuilder(latent, seed).dense(h).relu().dense(h).relu().dense(2).build();
    }
    case DatasetKind::textures16: {
      constexpr std::size_t n = data::kTextureSize;
      return nn::ModelBuilder(latent, seed).dense(128).relu().dense(n * n).tanh().reshape({1, n, n}).build();
    }
    default: break;
  }
  throw std::invalid_argument("dataset " + to_string(c.dataset) + " has no generator");
}

Tensor sample_real(const ExperimentConfig& c, std::size_t samples, CounterRng& rng) {
  if (c.dataset == DatasetKind::ring8) return data::sample_ring8(samples, rng);
  if (c.dataset == DatasetKind::textures16) return data::sample_textures16(samples, rng);
  throw std::invalid_argument("dataset " + to_string(c.dataset) + " is not a GAN dataset");
}

// ---------------------------------------------------------------- fit1d

double fit_target(const ExperimentConfig& c, double x) {
  if (c.dataset == DatasetKind::identity_line) return x;
  if (c.dataset == DatasetKind::triangle_wave) return data::triangle_wave(x, c.period, c.amplitude);
  throw std::invalid_argument("run_fit1d needs triangle_wave or identity_line, got " + to_string(c.dataset));
}

namespace {

struct FitData {
  Tensor x;
  Tensor y;
};

FitData fit_grid(const ExperimentConfig& c, std::size_t points) {
  FitData d{nn::make_batch(points, {1, 1, 1}), nn::make_batch(points, {1, 1, 1})};
  for (std::size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(points - 1);
    d.x[k] = c.x_min + (c.x_max - c.x_min) * t;
    d.y[k] = fit_target(c, d.x[k]);
  }
  return d;
}

double eval_mse(const nn::Model& model, const FitData& d) {
  return nn::mse_loss(nn::predict(model, d.x), d.y).value;
}

void project_unit_ball(nn::Model& model) {
  for (std::size_t l = 0; l < model.size(); ++l) {
    auto* dense = std::get_if<nn::Dense>(&model.layer(l));
    if (!dense) continue;
    // Both weights are vectors here (n x 1 and 1 x n), whose spectral norm is the L2 norm.
    const double norm = dense->weight.norm();
    if (norm > 1.0) dense->weight *= 1.0 / norm;
  }
}

}  // namespace

Fit1dResult run_fit1d(const ExperimentConfig& c) {
  c.validate();
  if (!c.is_fit_dataset())
    throw std::invalid_argument("run_fit1d needs triangle_wave or identity_line, got " + to_string(c.dataset));
  const FitData train = fit_grid(c, c.fit_points);
  const FitData eval = fit_grid(c, kFitEvalPoints);
  const nn::Model init =
      nn::ModelBuilder({1, 1, 1}, derive_seed(c.seed, kTagFitInit)).dense(c.hidden_width()).relu().dense(1).build();

  Fit1dResult result;
  for (const bool projected : {false, true}) {
    nn::Model model = init;
    nn::AdamState adam = make_adam(c);
    const std::string arm = projected ? "projected" : "vanilla";
    double final_mse = 0.0;
    for (long long step = 1; step <= c.steps; ++step) {
      const auto pass = nn::forward(model, train.x);
      const auto loss = nn::mse_loss(pass.output(), train.y);
      optimizer_step(c, model, nn::backward(model, pass, loss.grad), adam);
      if (projected) project_unit_ball(model);
      if (step == 1 || step % c.eval_every == 0 || step == c.steps) {
        final_mse = eval_mse(model, eval);
        result.rows.push_back({arm, step, eval_mse(model, train), final_mse});
      }
    }
    (projected ? result.projected_mse : result.vanilla_mse) = final_mse;
  }
  return result;
}

void write_fit_csv(std::ostream& out, const std::vector<FitRow>& rows) {
  out << "arm,step,train_mse,eval_mse\n";
  for (const auto& r : rows) out << r.arm << ',' << r.step << ',' << fmt(r.train_mse) << ',' << fmt(r.eval_mse) << '\n';
}

nlohmann::json to_json(const Fit1dResult& r) {
  nlohmann::json j;
  j["vanilla_mse"] = r.vanilla_mse;
  j["projected_mse"] = r.projected_mse;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"arm", row.arm}, {"step", row.step}, {"train_mse", row.train_mse}, {"eval_mse", row.eval_mse}});
  return j;
}

// ---------------------------------------------------------------- WGAN

std::string metrics_header() {
  return "step,critic_loss,gen_loss,critic_grad_norm,mode_coverage,hq_fraction,sparsity,sigma_san,sigma_reshape,"
         "sigma_exact,wall_ms";
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << metrics_header() << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << fmt(r.critic_loss) << ',' << fmt(r.gen_loss) << ',' << fmt(r.critic_grad_norm) << ',';
    if (r.mode_coverage) out << *r.mode_coverage;
    out << ',';
    if (r.hq_fraction) out << fmt(*r.hq_fraction);
    out << ',' << join(r.sparsity) << ',' << join(r.sigma_san) << ',' << join(r.sigma_reshape) << ','
        << join(r.sigma_exact) << ',' << fmt(r.wall_ms) << '\n';
  }
}

nlohmann::json to_json(const MetricsRow& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["critic_loss"] = json_number(r.critic_loss);
  j["gen_loss"] = json_number(r.gen_loss);
  j["critic_grad_norm"] = json_number(r.critic_grad_norm);
  j["mode_coverage"] = r.mode_coverage ? nlohmann::json(*r.mode_coverage) : nlohmann::json(nullptr);
  j["hq_fraction"] = r.hq_fraction ? json_number(*r.hq_fraction) : nlohmann::json(nullptr);
  j["sparsity"] = json_numbers(r.sparsity);
  j["sigma_san"] = json_numbers(r.sigma_san);
  j["sigma_reshape"] = json_numbers(r.sigma_reshape);
  j["sigma_exact"] = json_numbers(r.sigma_exact);
  j["wall_ms"] = r.wall_ms;
  return j;
}

namespace {

struct CriticUpdate {
  double loss = 0.0;
  double grad_norm = 0.0;
};

CriticUpdate critic_update(const ExperimentConfig& c, nn::Model& critic, nn::AdamState& adam,
                           const nn::Model& generator, CounterRng& data_rng, CounterRng& latent_rng) {
  const Tensor real = sample_real(c, c.batch, data_rng);
  const Tensor fake = nn::predict(generator, sample_latent(c, c.batch, latent_rng));
  const auto real_pass = nn::forward(critic, real);
  const auto fake_pass = nn::forward(critic, fake);
  const auto loss = nn::hinge_critic_loss(real_pass.output(), fake_pass.output());
  auto grads = nn::backward(critic, real_pass, loss.grad_real);
  grads += nn::backward(critic, fake_pass, loss.grad_fake);
  optimizer_step(c, critic, grads, adam);
  return {loss.value, mean_grad_norm(grads)};
}

double generator_update(const ExperimentConfig& c, nn::Model& generator, nn::AdamState& adam,
                        const nn::Model& critic, CounterRng& latent_rng) {
  const auto gen_pass = nn::forward(generator, sample_latent(c, c.batch, latent_rng));
  const auto critic_pass = nn::forward(critic, gen_pass.output());
  const auto loss = nn::generator_loss(critic_pass.output());
  const auto critic_grads = nn::backward(critic, critic_pass, loss.grad, false);
  optimizer_step(c, generator, nn::backward(generator, gen_pass, critic_grads.input), adam);
  return loss.value;
}

void fill_probes(MetricsRow& row, const nn::Model& critic, const Tensor& probe_batch, double eps) {
  const auto pass = nn::forward(critic, probe_batch);
  for (std::size_t l = 0; l < critic.size(); ++l) {
    const auto* conv = std::get_if<nn::ConvCyclic>(&critic.layer(l));
    if (!conv) continue;
    const auto norms = batch_channel_norms(pass.activations[l]);
    const auto zero = std::count_if(norms.begin(), norms.end(), [eps](double v) { return v <= eps; });
    row.sparsity.push_back(static_cast<double>(zero) / static_cast<double>(norms.size()));

    const KernelBank bank(conv->weight);
    const auto& s = critic.shape_before(l);
    row.sigma_san.push_back(san_norm(bank, s.height, s.width).value);
    row.sigma_reshape.push_back(reshape_spectral_norm(bank).value);
    const bool affordable = bank.filter_count() * s.height * s.width <= kExactNormMaxEntries;
    row.sigma_exact.push_back(affordable ? exact_conv_spectral_norm(bank, s.height, s.width).value
                                         : std::numeric_limits<double>::quiet_NaN());
  }
}

}  // namespace

WganResult run_wgan(const ExperimentConfig& c, const WganHooks& hooks) {
  c.validate();
  if (c.dataset != DatasetKind::ring8 && c.dataset != DatasetKind::textures16)
    throw std::invalid_argument("run_wgan needs ring8 or textures16, got " + to_string(c.dataset));

  WganResult r;
  r.critic = make_critic(c, derive_seed(c.seed, kTagCritic));
  r.generator = make_generator(c, derive_seed(c.seed, kTagGenerator));
  nn::AdamState critic_adam = make_adam(c), gen_adam = make_adam(c);
  CounterRng data_rng(c.seed, kTagData), latent_rng(c.seed, kTagLatent);
  const std::uint64_t norm_seed = derive_seed(c.seed, kTagNormalize);

  CounterRng eval_latent_rng(c.seed, kTagEvalLatent), eval_real_rng(c.seed, kTagEvalReal);
  const bool ring = c.dataset == DatasetKind::ring8;
  const Tensor eval_latent = ring ? sample_latent(c, c.eval_samples, eval_latent_rng) : Tensor();
  const Tensor probe_batch = sample_real(c, kProbeSamples, eval_real_rng);

  auto normalize = [&](long long critic_step) {
    auto event = apply_normalization(r.critic, c.policy, critic_step, norm_seed);
    if (!event.applied) return;
    ++r.normalization_events;
    for (auto& w : event.warnings) r.warnings.push_back("critic step " + std::to_string(critic_step) + ": " + w);
    if (hooks.after_normalization) hooks.after_normalization(critic_step, r.critic, event);
  };

  double timed_ms = 0.0;
  long long timed_updates = 0;
  for (long long step = 1; step <= c.steps; ++step) {
    CriticUpdate last;
    for (int d = 0; d < c.n_dis; ++d) {
      const long long s = ++r.critic_steps;
      const auto t0 = std::chrono::steady_clock::now();
      if (c.norm_order == NormOrder::pre) normalize(s);
      last = critic_update(c, r.critic, critic_adam, r.generator, data_rng, latent_rng);
      if (c.norm_order == NormOrder::post) normalize(s);
      if (c.record_timing) {
        timed_ms += elapsed_ms(t0);
        ++timed_updates;
      }
    }
    const double gen_loss = generator_update(c, r.generator, gen_adam, r.critic, latent_rng);

    if (step == 1 || step % c.eval_every == 0 || step == c.steps) {
      MetricsRow row;
      row.step = step;
      row.critic_loss = last.loss;
      row.gen_loss = gen_loss;
      row.critic_grad_norm = last.grad_norm;
      if (ring) {
        const auto stats = data::ring8_mode_stats(nn::predict(r.generator, eval_latent));
        row.mode_coverage = stats.covered;
        row.hq_fraction = stats.hq_fraction;
      }
      fill_probes(row, r.critic, probe_batch, c.sparsity_eps);
      if (c.record_timing && timed_updates > 0) row.wall_ms = timed_ms / static_cast<double>(timed_updates);
      timed_ms = 0.0;
      timed_updates = 0;
      r.rows.push_back(std::move(row));
    }
  }

  if (!c.checkpoint_dir.empty()) {
    const std::filesystem::path dir(c.checkpoint_dir);
    nn::save_checkpoint(dir / "critic", r.critic, {c.seed, r.critic_steps});
    nn::save_checkpoint(dir / "generator", r.generator, {c.seed, c.steps});
  }
  return r;
}

// ---------------------------------------------------------------- probes

SparsityReport sparsity_probe(const nn::Model& model, std::size_t layer, const Tensor& batch, double eps,
                              std::size_t bins) {
  if (layer >= model.size())
    throw std::out_of_range("layer index " + std::to_string(layer) + " out of range (model has " +
                            std::to_string(model.size()) + " layers)");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  const auto& shape = model.shape_before(layer);
  if (shape.channels < 2)
    throw DimensionError("layer " + std::to_string(layer) + " input has a single channel");

  Tensor signal = batch;
  if (layer > 0) signal = nn::forward(model, batch).activations[layer];
  else if (nn::sample_shape(batch) != shape)
    throw DimensionError("batch sample shape " + nn::to_string(nn::sample_shape(batch)) + " does not match " +
                         nn::to_string(shape));
  const auto norms = batch_channel_norms(signal);

  SparsityReport rep;
  rep.layer = layer;
  rep.eps = eps;
  rep.channels = norms.size();
  const double top = norms.empty() ? eps : std::max(eps, *std::max_element(norms.begin(), norms.end()));
  rep.bin_lo.push_back(0.0);
  rep.bin_hi.push_back(eps);
  const double width = (top - eps) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    rep.bin_lo.push_back(eps + width * static_cast<double>(b));
    rep.bin_hi.push_back(b + 1 == bins ? top : eps + width * static_cast<double>(b + 1));
  }
  rep.counts.assign(bins + 1, 0);
  for (double v : norms) {
    if (v <= eps) {
      ++rep.counts[0];
      continue;
    }
    auto b = width > 0.0 ? static_cast<std::size_t>((v - eps) / width) : 0;
    ++rep.counts[1 + std::min(b, bins - 1)];
  }
  rep.zero_fraction = norms.empty() ? 0.0 : static_cast<double>(rep.counts[0]) / static_cast<double>(norms.size());
  return rep;
}

void write_sparsity_csv(std::ostream& out, const SparsityReport& rep) {
  out << "bin_lo,bin_hi,count,fraction\n";
  for (std::size_t b = 0; b < rep.counts.size(); ++b) {
    const double frac = rep.channels ? static_cast<double>(rep.counts[b]) / static_cast<double>(rep.channels) : 0.0;
    out << fmt(rep.bin_lo[b]) << ',' << fmt(rep.bin_hi[b]) << ',' << rep.counts[b] << ',' << fmt(frac) << '\n';
  }
}

nlohmann::json to_json(const SparsityReport& rep) {
  nlohmann::json j;
  j["layer"] = rep.layer;
  j["eps"] = rep.eps;
  j["channels"] = rep.channels;
  j["zero_fraction"] = rep.zero_fraction;
  j["bin_lo"] = rep.bin_lo;
  j["bin_hi"] = rep.bin_hi;
  j["counts"] = rep.counts;
  return j;
}

std::vector<SingvalRow> singvals_report(const nn::Model& model) {
  std::vector<SingvalRow> rows;
  for (std::size_t l = 0; l < model.size(); ++l) {
    const auto* conv = std::get_if<nn::ConvCyclic>(&model.layer(l));
    if (!conv) continue;
    const KernelBank bank(conv->weight);
    const auto& s = model.shape_before(l);
    SingvalRow row;
    row.layer = l;
    row.out_channels = bank.out_channels();
    row.in_channels = bank.in_channels();
    row.kernel = bank.kernel_height() == bank.kernel_width() ? bank.kernel_height() : 0;
    row.height = s.height;
    row.width = s.width;
    row.exact = exact_conv_spectral_norm(bank, s.height, s.width).value;
    row.reshape = reshape_spectral_norm(bank).value;
    row.san = san_norm(bank, s.height, s.width).value;
    row.ratio = row.reshape > 0.0 ? row.exact / row.reshape : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

void write_singvals_csv(std::ostream& out, const std::vector<SingvalRow>& rows) {
  out << "layer,out_channels,in_channels,kernel,height,width,exact,reshape,san,ratio\n";
  for (const auto& r : rows)
    out << r.layer << ',' << r.out_channels << ',' << r.in_channels << ',' << r.kernel << ',' << r.height << ','
        << r.width << ',' << fmt(r.exact) << ',' << fmt(r.reshape) << ',' << fmt(r.san) << ',' << fmt(r.ratio) << '\n';
}

nlohmann::json to_json(const SingvalRow& r) {
  return {{"layer", r.layer},     {"out_channels", r.out_channels}, {"in_channels", r.in_channels},
          {"kernel", r.kernel},   {"height", r.height},             {"width", r.width},
          {"exact", r.exact},     {"reshape", r.reshape},           {"san", r.san},
          {"ratio", json_number(r.ratio)}};
}

// ---------------------------------------------------------------- bench

std::vector<BenchRow> bench_update(const ExperimentConfig& c, const std::vector<NormalizationPolicy>& policies,
                                   int reps) {
  c.validate();
  if (reps < 10) throw std::invalid_argument("bench needs reps >= 10");
  if (policies.empty()) throw std::invalid_argument("bench needs at least one method");
  std::vector<BenchRow> rows;
  for (const auto& policy : policies) {
    policy.validate();
    nn::Model critic = make_critic(c, derive_seed(c.seed, kTagCritic));
    const nn::Model generator = make_generator(c, derive_seed(c.seed, kTagGenerator));
    nn::AdamState adam = make_adam(c);
    CounterRng data_rng(c.seed, kTagData), latent_rng(c.seed, kTagLatent);
    const std::uint64_t norm_seed = derive_seed(c.seed, kTagNormalize);

    std::vector<double> update_ms, norm_ms;
    for (int k = 0; k < reps; ++k) {
      auto t0 = std::chrono::steady_clock::now();
      critic_update(c, critic, adam, generator, data_rng, latent_rng);
      update_ms.push_back(elapsed_ms(t0));
      if (policy.method != NormalizationMethod::none) {
        NormalizationPolicy every_step = policy;
        every_step.every = 1;
        t0 = std::chrono::steady_clock::now();
        apply_normalization(critic, every_step, k + 1, norm_seed);
        norm_ms.push_back(elapsed_ms(t0));
      }
    }
    BenchRow row;
    row.method = to_string(policy.method);
    row.every = policy.every;
    row.reps = reps;
    row.update_ms = median(update_ms);
    row.normalize_ms = median(norm_ms);
    row.amortized_ms = row.update_ms + row.normalize_ms / static_cast<double>(policy.every);
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "method,every,reps,update_ms,normalize_ms,amortized_ms\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.every << ',' << r.reps << ',' << fmt(r.update_ms) << ',' << fmt(r.normalize_ms)
        << ',' << fmt(r.amortized_ms) << '\n';
}

nlohmann::json to_json(const BenchRow& r) {
  return {{"method", r.method},       {"every", r.every},
          {"reps", r.reps},           {"update_ms", r.update_ms},
          {"normalize_ms", r.normalize_ms}, {"amortized_ms", r.amortized_ms}};
}

// ---------------------------------------------------------------- ablations

std::vector<AblationSetting> ablation_settings(const ExperimentConfig& base) {
  struct Hp {
    const char* label;
    double alpha, beta1, beta2;
    int n_dis;
  };
  static const Hp table[] = {
      {"A", 5e-4, 0.5, 0.9, 1}, {"B", 2e-4, 0.5, 0.9, 1}, {"C", 2e-4, 0.0, 0.9, 1},
      {"D", 5e-4, 0.0, 0.9, 1}, {"E", 2e-4, 0.5, 0.9, 2}, {"F", 5e-4, 0.0, 0.9, 2},
  };
  std::vector<AblationSetting> out;
  for (const auto& hp : table) {
    ExperimentConfig c = base;
    c.alpha = hp.alpha;
    c.beta1 = hp.beta1;
    c.beta2 = hp.beta2;
    c.n_dis = hp.n_dis;
    out.push_back({hp.label, c});
  }
  return out;
}

std::vector<AblationSetting> multiplier_grid(const ExperimentConfig& base, const std::vector<double>& multipliers) {
  std::vector<AblationSetting> out;
  for (double m : multipliers) {
    ExperimentConfig c = base;
    c.policy.multiplier = m;
    out.push_back({"multiplier=" + fmt(m), c});
  }
  return out;
}

std::vector<AblationRow> run_ablation_grid(const std::vector<AblationSetting>& settings) {
  if (settings.empty()) throw std::invalid_argument("ablation grid is empty");
  for (const auto& s : settings)
    if (s.config.dataset != settings.front().config.dataset)
      throw std::invalid_argument("ablation settings must share one dataset");
  std::vector<AblationRow> rows;
  for (const auto& s : settings) {
    const auto run = run_wgan(s.config);
    rows.push_back({s.label, s.config.alpha, s.config.beta1, s.config.beta2, s.config.n_dis,
                    s.config.policy.multiplier, run.rows.back()});
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "label,alpha,beta1,beta2,n_dis,multiplier,step,critic_loss,gen_loss,critic_grad_norm,mode_coverage,"
         "hq_fraction\n";
  for (const auto& r : rows) {
    const auto& m = r.final_metrics;
    out << r.label << ',' << fmt(r.alpha) << ',' << fmt(r.beta1) << ',' << fmt(r.beta2) << ',' << r.n_dis << ','
        << fmt(r.multiplier) << ',' << m.step << ',' << fmt(m.critic_loss) << ',' << fmt(m.gen_loss) << ','
        << fmt(m.critic_grad_norm) << ',';
    if (m.mode_coverage) out << *m.mode_coverage;
    out << ',';
    if (m.hq_fraction) out << fmt(*m.hq_fraction);
    out << '\n';
  }
}

nlohmann::json to_json(const AblationRow& r) {
  nlohmann::json j = to_json(r.final_metrics);
  j["label"] = r.label;
  j["alpha"] = r.alpha;
  j["beta1"] = r.beta1;
  j["beta2"] = r.beta2;
  j["n_dis"] = r.n_dis;
  j["multiplier"] = r.multiplier;
  return j;
}

}  // namespace san::lab
