#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "san/normalizer.hpp"
#include "san/nn.hpp"

namespace san::lab {

enum class DatasetKind { ring8, triangle_wave, identity_line, textures16 };
enum class NormOrder { pre, post };
enum class OptimizerKind { adam, sgd };

std::string to_string(DatasetKind kind);
std::string to_string(NormOrder order);
std::string to_string(OptimizerKind kind);
DatasetKind dataset_from_string(const std::string& name);
NormOrder norm_order_from_string(const std::string& name);
OptimizerKind optimizer_from_string(const std::string& name);

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::ring8;
  // triangle_wave parameters and the fit1d input interval
  double period = 1.6;
  double amplitude = 0.4;
  double x_min = -2.0;
  double x_max = 2.0;

  NormalizationPolicy policy;
  int n_dis = 1;
  std::size_t batch = 64;
  long long steps = 1000;
  double alpha = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  long long eval_every = 100;
  NormOrder norm_order = NormOrder::pre;

  /// Hidden width; 0 picks the dataset default (100 for fit1d, 64 for ring8).
  std::size_t hidden = 0;
  /// Per-network overrides of `hidden` for the ring8 models; 0 keeps `hidden`.
  std::size_t critic_hidden = 0;
  std::size_t generator_hidden = 0;
  /// Negative slope of the critic's activations; 0 means ReLU.
  double critic_slope = 0.0;
  /// Conv width of the textures16 critic.
  std::size_t channels = 8;
  std::size_t latent_dim = 16;
  /// Generated samples per mode-coverage evaluation.
  std::size_t eval_samples = 4096;
  /// Evenly spaced training inputs for fit1d (full batch).
  std::size_t fit_points = 256;
  double sparsity_eps = 1e-6;
  /// Measure wall_ms; off by default so metrics files stay reproducible.
  bool record_timing = false;
  /// When set, final critic and generator checkpoints go to <dir>/critic and <dir>/generator.
  std::string checkpoint_dir;

  void validate() const;
  std::size_t hidden_width() const;
  bool is_fit_dataset() const {
    return dataset == DatasetKind::triangle_wave || dataset == DatasetKind::identity_line;
  }
};

/// Reads the fields present in `j` on top of `base`; unknown fields throw.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& config);

nn::Model make_critic(const ExperimentConfig& config, std::uint64_t seed);
nn::Model make_generator(const ExperimentConfig& config, std::uint64_t seed);
/// [M, ...] batch of real samples for a GAN dataset.
Tensor sample_real(const ExperimentConfig& config, std::size_t samples, CounterRng& rng);

// fit1d

struct FitRow {
  std::string arm;  // "vanilla" or "projected"
  long long step = 0;
  double train_mse = 0.0;
  double eval_mse = 0.0;
};

struct Fit1dResult {
  std::vector<FitRow> rows;
  double vanilla_mse = 0.0;
  double projected_mse = 0.0;
};

/// Target function of a fit dataset.
double fit_target(const ExperimentConfig& config, double x);
/// Trains Dense(1->n) + ReLU + Dense(n->1) twice from the same init: unconstrained,
/// and with each weight tensor rescaled to unit L2 norm after any step that
/// leaves it above 1. MSEs are measured on 1001 evenly spaced points.
Fit1dResult run_fit1d(const ExperimentConfig& config);
void write_fit_csv(std::ostream& out, const std::vector<FitRow>& rows);
nlohmann::json to_json(const Fit1dResult& result);

// WGAN

struct MetricsRow {
  long long step = 0;
  double critic_loss = 0.0;
  double gen_loss = 0.0;
  /// Mean of ||grad||_2 over the critic's parameter tensors.
  double critic_grad_norm = 0.0;
  /// ring8 only.
  std::optional<std::size_t> mode_coverage;
  std::optional<double> hq_fraction;
  /// Per conv layer of the critic, on a fixed batch of real samples.
  std::vector<double> sparsity;
  std::vector<double> sigma_san;
  std::vector<double> sigma_reshape;
  /// NaN where the exact norm is over the size guard.
  std::vector<double> sigma_exact;
  /// Mean wall time of one critic update since the previous row; 0 unless timed.
  double wall_ms = 0.0;
};

/// step,critic_loss,gen_loss,critic_grad_norm,mode_coverage,hq_fraction,sparsity,sigma_san,sigma_reshape,sigma_exact,wall_ms
std::string metrics_header();
/// Per-layer columns hold ';'-separated values; missing ring8 metrics are empty fields.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
nlohmann::json to_json(const MetricsRow& row);

struct WganHooks {
  /// Called after every normalization event with the 1-based critic step.
  std::function<void(long long, const nn::Model&, const NormalizationEvent&)> after_normalization;
};

struct WganResult {
  std::vector<MetricsRow> rows;
  nn::Model critic;
  nn::Model generator;
  long long critic_steps = 0;
  long long normalization_events = 0;
  std::vector<std::string> warnings;
};

/// Alternates n_dis hinge-loss critic updates (normalized per policy and
/// norm_order) with one generator update. Rows are written at step 1, every
/// eval_every steps and at the last step.
WganResult run_wgan(const ExperimentConfig& config, const WganHooks& hooks = {});

// Probes on trained models

struct SparsityReport {
  std::size_t layer = 0;
  double eps = 0.0;
  std::size_t channels = 0;  // samples * channels examined
  /// bins[0] is the zero bin [0, eps]; the rest split (eps, max] evenly.
  std::vector<double> bin_lo;
  std::vector<double> bin_hi;
  std::vector<std::size_t> counts;
  double zero_fraction = 0.0;
};

/// Histogram of per-channel norms of the signal entering `layer` over `batch`.
SparsityReport sparsity_probe(const nn::Model& model, std::size_t layer, const Tensor& batch, double eps,
                              std::size_t bins = 20);
void write_sparsity_csv(std::ostream& out, const SparsityReport& report);
nlohmann::json to_json(const SparsityReport& report);

struct SingvalRow {
  std::size_t layer = 0;
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double exact = 0.0;
  double reshape = 0.0;
  double san = 0.0;
  double ratio = 0.0;  // exact / reshape
};

/// One row per conv layer. Throws SizeGuardError when an exact norm is unaffordable.
std::vector<SingvalRow> singvals_report(const nn::Model& model);
void write_singvals_csv(std::ostream& out, const std::vector<SingvalRow>& rows);
nlohmann::json to_json(const SingvalRow& row);

struct BenchRow {
  std::string method;
  long long every = 1;
  int reps = 0;
  /// Median of one critic update without normalization.
  double update_ms = 0.0;
  /// Median of one normalization event.
  double normalize_ms = 0.0;
  /// update_ms + normalize_ms / every
  double amortized_ms = 0.0;
};

/// Times critic updates of the config's critic under each policy, all on the
/// same shapes and seed. reps must be >= 10.
std::vector<BenchRow> bench_update(const ExperimentConfig& config, const std::vector<NormalizationPolicy>& policies,
                                   int reps);
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
nlohmann::json to_json(const BenchRow& row);

struct AblationSetting {
  std::string label;
  ExperimentConfig config;
};

/// Settings A-F: (alpha, beta1, beta2, n_dis) on top of `base`.
std::vector<AblationSetting> ablation_settings(const ExperimentConfig& base);
/// One setting per constraint multiplier; {0.5, 1.0, 1.1, 1.5} by default.
std::vector<AblationSetting> multiplier_grid(const ExperimentConfig& base,
                                             const std::vector<double>& multipliers = {0.5, 1.0, 1.1, 1.5});

struct AblationRow {
  std::string label;
  double alpha = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  int n_dis = 1;
  double multiplier = 1.0;
  MetricsRow final_metrics;
};

/// Runs every setting to completion. Throws on an empty grid or mixed datasets.
std::vector<AblationRow> run_ablation_grid(const std::vector<AblationSetting>& settings);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
nlohmann::json to_json(const AblationRow& row);

}  // namespace san::lab
