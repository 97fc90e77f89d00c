#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "san/nn.hpp"

namespace san {

enum class NormalizationMethod { none, weight_clip, reshape_sn, exact_sn, san, san_subset };

std::string to_string(NormalizationMethod method);
NormalizationMethod normalization_method_from_string(const std::string& name);

struct NormalizationPolicy {
  NormalizationMethod method = NormalizationMethod::none;
  /// Clamp bound for weight_clip.
  double clip = 0.01;
  /// Filter subset rate for san_subset.
  double rate = 1.0;
  /// Fixed compensation g for san_subset; empty means the order-statistics formula.
  std::optional<double> compensation;
  /// Normalize on steps that are multiples of `every`.
  long long every = 1;
  /// Target norm after normalization (constraint looseness).
  double multiplier = 1.0;
  /// Layers with sigma at or below this are left alone.
  double eps_sigma = 1e-12;

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

/// {"method", "every", "rate", "compensation": "auto" | number, "multiplier", "clip"}
NormalizationPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizationPolicy& policy);

/// Normalization constant sigma of one layer before compensation. Convolutions
/// use the norm selected by the method (san_subset: max over a fresh subset
/// drawn from `seed`), dense layers their spectral norm, and activation-type
/// layers return 1. weight_clip/none have no sigma for weight layers and
/// throw std::invalid_argument.
double layer_norm_constant(const nn::Layer& layer, const NormalizationPolicy& policy,
                           const nn::Shape3& input_shape, std::uint64_t seed);

struct LayerNormalization {
  std::size_t layer = 0;
  double sigma = 0.0;
  double compensation = 1.0;
  /// Factor the weights were multiplied by (1 when skipped).
  double scale = 1.0;
  bool skipped = false;
};

struct NormalizationEvent {
  bool applied = false;
  std::vector<LayerNormalization> layers;
  std::vector<std::string> warnings;
};

/// One step of the normalization schedule. No-op unless step % every == 0;
/// otherwise each weight layer gets W <- W * multiplier / (g * sigma), or its
/// weights clamped to [-clip, clip] for weight_clip. Biases are never touched.
NormalizationEvent apply_normalization(nn::Model& model, const NormalizationPolicy& policy,
                                       long long step, std::uint64_t seed);

}  // namespace san
