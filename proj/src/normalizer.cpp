#include "san/normalizer.hpp"

#include <algorithm>
#include <stdexcept>

#include "san/compensation.hpp"
#include "san/operator_norms.hpp"
#include "san/rng.hpp"

namespace san {

std::string to_string(NormalizationMethod method) {
  switch (method) {
    case NormalizationMethod::none: return "none";
    case NormalizationMethod::weight_clip: return "weight_clip";
    case NormalizationMethod::reshape_sn: return "reshape_sn";
    case NormalizationMethod::exact_sn: return "exact_sn";
    case NormalizationMethod::san: return "san";
    case NormalizationMethod::san_subset: return "san_subset";
  }
  return "unknown";
}

NormalizationMethod normalization_method_from_string(const std::string& name) {
  for (auto m : {NormalizationMethod::none, NormalizationMethod::weight_clip, NormalizationMethod::reshape_sn,
                 NormalizationMethod::exact_sn, NormalizationMethod::san, NormalizationMethod::san_subset})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown normalization method '" + name + "'");
}

void NormalizationPolicy::validate() const {
  if (every < 1) throw std::invalid_argument("normalization interval 'every' must be >= 1");
  if (!(multiplier > 0.0)) throw std::invalid_argument("multiplier must be > 0");
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("rate must lie in (0, 1]");
  if (compensation && !(*compensation >= 1.0)) throw std::invalid_argument("compensation must be >= 1");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be > 0");
  if (!(eps_sigma >= 0.0)) throw std::invalid_argument("eps_sigma must be >= 0");
}

NormalizationPolicy policy_from_json(const nlohmann::json& j) {
  NormalizationPolicy p;
  if (!j.is_object()) throw std::invalid_argument("policy must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "method") p.method = normalization_method_from_string(value.get<std::string>());
    else if (key == "every") p.every = value.get<long long>();
    else if (key == "rate") p.rate = value.get<double>();
    else if (key == "multiplier") p.multiplier = value.get<double>();
    else if (key == "clip") p.clip = value.get<double>();
    else if (key == "eps_sigma") p.eps_sigma = value.get<double>();
    else if (key == "compensation") {
      if (value.is_string()) {
        if (value.get<std::string>() != "auto")
          throw std::invalid_argument("compensation must be \"auto\" or a number");
        p.compensation.reset();
      } else {
        p.compensation = value.get<double>();
      }
    } else {
      throw std::invalid_argument("unknown policy field '" + key + "'");
    }
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const NormalizationPolicy& p) {
  nlohmann::json j;
  j["method"] = to_string(p.method);
  j["every"] = p.every;
  j["rate"] = p.rate;
  if (p.compensation)
    j["compensation"] = *p.compensation;
  else
    j["compensation"] = "auto";
  j["multiplier"] = p.multiplier;
  j["clip"] = p.clip;
  j["eps_sigma"] = p.eps_sigma;
  return j;
}

double layer_norm_constant(const nn::Layer& layer, const NormalizationPolicy& policy,
                           const nn::Shape3& input_shape, std::uint64_t seed) {
  if (!nn::has_parameters(layer)) return 1.0;
  if (policy.method == NormalizationMethod::none || policy.method == NormalizationMethod::weight_clip)
    throw std::invalid_argument("method " + to_string(policy.method) + " defines no norm for layer '" +
                                nn::layer_kind(layer) + "'");

  if (const auto* dense = std::get_if<nn::Dense>(&layer)) return dense_spectral_norm(dense->weight);

  const auto& conv = std::get<nn::ConvCyclic>(layer);
  const KernelBank bank(conv.weight);
  const std::size_t h = input_shape.height, w = input_shape.width;
  switch (policy.method) {
    case NormalizationMethod::san: return san_norm(bank, h, w).value;
    case NormalizationMethod::san_subset: {
      const auto plan = sample_filter_subset(bank.out_channels(), bank.in_channels(), policy.rate, seed);
      return san_subset_norm(bank, h, w, plan, 1.0).value;
    }
    case NormalizationMethod::reshape_sn: return reshape_spectral_norm(bank).value;
    case NormalizationMethod::exact_sn: return exact_conv_spectral_norm(bank, h, w).value;
    default: break;
  }
  throw std::invalid_argument("unsupported layer/method pair");
}

NormalizationEvent apply_normalization(nn::Model& model, const NormalizationPolicy& policy, long long step,
                                       std::uint64_t seed) {
  policy.validate();
  NormalizationEvent event;
  if (policy.method == NormalizationMethod::none || step % policy.every != 0) return event;
  event.applied = true;

  for (std::size_t l = 0; l < model.size(); ++l) {
    nn::Layer& layer = model.layer(l);
    if (!nn::has_parameters(layer)) continue;
    Tensor& weight = std::holds_alternative<nn::ConvCyclic>(layer) ? std::get<nn::ConvCyclic>(layer).weight
                                                                   : std::get<nn::Dense>(layer).weight;
    LayerNormalization record;
    record.layer = l;

    if (policy.method == NormalizationMethod::weight_clip) {
      for (auto& v : weight.values()) v = std::clamp(v, -policy.clip, policy.clip);
      event.layers.push_back(record);
      continue;
    }

    // A fresh subset per (step, layer).
    const std::uint64_t layer_seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(step)), l);
    record.sigma = layer_norm_constant(layer, policy, model.shape_before(l), layer_seed);
    if (policy.method == NormalizationMethod::san_subset && std::holds_alternative<nn::ConvCyclic>(layer)) {
      const std::size_t filters = weight.dim(0) * weight.dim(1);
      record.compensation = policy.compensation ? *policy.compensation : compensation_factor(filters, policy.rate);
    }
    if (!(record.sigma > policy.eps_sigma)) {
      record.skipped = true;
      event.warnings.push_back("layer " + std::to_string(l) + " (" + nn::layer_kind(layer) +
                               "): sigma " + std::to_string(record.sigma) + " <= eps_sigma, left unnormalized");
    } else {
      record.scale = policy.multiplier / (record.compensation * record.sigma);
      weight *= record.scale;
    }
    event.layers.push_back(record);
  }
  return event;
}

}  // namespace san
