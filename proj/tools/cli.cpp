#include "cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "san/checkpoint.hpp"
#include "san/compensation.hpp"
#include "san/errors.hpp"
#include "san/gan_lab.hpp"
#include "san/operator_norms.hpp"
#include "san/sant_io.hpp"

namespace san::cli {

namespace {

using nlohmann::json;

// Bad flag values found before any work starts; reported with exit code 2.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  bool json() const { return format == "json"; }
};

// Both spellings of a multi-word flag: --n_dis,--n-dis
std::string flag(const std::string& name) {
  std::string dashed = name;
  for (auto& ch : dashed)
    if (ch == '_') ch = '-';
  return dashed == name ? "--" + name : "--" + name + ",--" + dashed;
}

// Config fields that can be given on the command line; set values override the --config file.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> dataset, optimizer, norm_order, method, compensation, checkpoint_dir;
  std::optional<double> period, amplitude, x_min, x_max, alpha, beta1, beta2, rate, multiplier, clip, sparsity_eps,
      critic_slope;
  std::optional<long long> steps, eval_every, every;
  std::optional<int> n_dis;
  std::optional<std::size_t> batch, hidden, critic_hidden, generator_hidden, channels, latent_dim, eval_samples,
      fit_points;
  bool record_timing = false;

  void add_to(CLI::App* app, bool policy_flags = true) {
    app->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--dataset", dataset, "ring8 | triangle_wave | identity_line | textures16");
    app->add_option("--period", period);
    app->add_option("--amplitude", amplitude);
    app->add_option(flag("x_min"), x_min);
    app->add_option(flag("x_max"), x_max);
    app->add_option(flag("n_dis"), n_dis, "critic updates per generator update");
    app->add_option("--batch,-M", batch, "samples per batch");
    app->add_option("--steps", steps, "generator (or fit) steps");
    app->add_option("--alpha", alpha, "learning rate");
    app->add_option("--beta1", beta1);
    app->add_option("--beta2", beta2);
    app->add_option("--optimizer", optimizer, "adam | sgd");
    app->add_option(flag("eval_every"), eval_every);
    app->add_option(flag("norm_order"), norm_order, "pre | post");
    app->add_option("--hidden", hidden);
    app->add_option(flag("critic_hidden"), critic_hidden);
    app->add_option(flag("generator_hidden"), generator_hidden);
    app->add_option(flag("critic_slope"), critic_slope);
    app->add_option("--channels", channels);
    app->add_option(flag("latent_dim"), latent_dim);
    app->add_option(flag("eval_samples"), eval_samples);
    app->add_option(flag("fit_points"), fit_points);
    app->add_option(flag("sparsity_eps"), sparsity_eps);
    app->add_flag(flag("record_timing") + ",--timing", record_timing, "measure wall_ms");
    app->add_option(flag("checkpoint_dir"), checkpoint_dir);
    if (policy_flags) app->add_option("--method", method, "normalization method");
    app->add_option("--every", every, "normalize every k critic steps");
    app->add_option("--rate", rate, "filter subset rate");
    app->add_option("--compensation", compensation, "auto or a number");
    app->add_option("--multiplier", multiplier, "target norm after normalization");
    app->add_option("--clip", clip, "weight_clip bound");
  }

  lab::ExperimentConfig build(const Globals& g, lab::DatasetKind default_dataset) const {
    lab::ExperimentConfig c;
    c.dataset = default_dataset;
    try {
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        c = lab::config_from_json(json::parse(in), c);
      }
      if (dataset) c.dataset = lab::dataset_from_string(*dataset);
      if (period) c.period = *period;
      if (amplitude) c.amplitude = *amplitude;
      if (x_min) c.x_min = *x_min;
      if (x_max) c.x_max = *x_max;
      if (n_dis) c.n_dis = *n_dis;
      if (batch) c.batch = *batch;
      if (steps) c.steps = *steps;
      if (alpha) c.alpha = *alpha;
      if (beta1) c.beta1 = *beta1;
      if (beta2) c.beta2 = *beta2;
      if (optimizer) c.optimizer = lab::optimizer_from_string(*optimizer);
      if (eval_every) c.eval_every = *eval_every;
      if (norm_order) c.norm_order = lab::norm_order_from_string(*norm_order);
      if (hidden) c.hidden = *hidden;
      if (critic_hidden) c.critic_hidden = *critic_hidden;
      if (generator_hidden) c.generator_hidden = *generator_hidden;
      if (critic_slope) c.critic_slope = *critic_slope;
      if (channels) c.channels = *channels;
      if (latent_dim) c.latent_dim = *latent_dim;
      if (eval_samples) c.eval_samples = *eval_samples;
      if (fit_points) c.fit_points = *fit_points;
      if (sparsity_eps) c.sparsity_eps = *sparsity_eps;
      if (record_timing) c.record_timing = true;
      if (checkpoint_dir) c.checkpoint_dir = *checkpoint_dir;
      if (method) c.policy.method = normalization_method_from_string(*method);
      if (every) c.policy.every = *every;
      if (rate) c.policy.rate = *rate;
      if (compensation) {
        if (*compensation == "auto")
          c.policy.compensation.reset();
        else
          c.policy.compensation = std::stod(*compensation);
      }
      if (multiplier) c.policy.multiplier = *multiplier;
      if (clip) c.policy.clip = *clip;
      if (g.seed) c.seed = *g.seed;
      c.validate();
    } catch (const json::exception& e) {
      throw UsageError("config " + config_path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

std::pair<std::size_t, std::size_t> parse_plane(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    const auto h = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    const auto w = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument("");
    return {h, w};
  } catch (const std::exception&) {
    throw UsageError("--plane must look like 32x32, got '" + text + "'");
  }
}

std::string csv_text(const std::function<void(std::ostream&)>& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

void emit(const Globals& g, std::ostream& out, const std::string& text) {
  if (g.out.empty()) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream f(g.out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open output file " + g.out);
  f << text;
  if (!f) throw std::runtime_error("failed writing " + g.out);
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

template <class Row>
json json_rows(const std::vector<Row>& rows) {
  auto a = json::array();
  for (const auto& r : rows) a.push_back(lab::to_json(r));
  return a;
}

// ---------------------------------------------------------------- norm

struct NormArgs {
  std::string input;
  std::string plane;
  std::string method = "san";
  double rate = 1.0;
  std::string compensation = "auto";
};

std::string run_norm(const NormArgs& a, const Globals& g) {
  const auto [h, w] = parse_plane(a.plane);
  NormMethod method;
  try {
    method = norm_method_from_string(a.method);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(a.rate > 0.0 && a.rate <= 1.0)) throw UsageError("--rate must lie in (0, 1]");
  std::optional<double> fixed_g;
  if (a.compensation != "auto") {
    try {
      fixed_g = std::stod(a.compensation);
    } catch (const std::exception&) {
      throw UsageError("--compensation must be 'auto' or a number");
    }
  }

  const Tensor t = read_sant(std::filesystem::path(a.input));
  const KernelBank bank(t.rank() == 2 ? t.reshaped({1, 1, t.dim(0), t.dim(1)}) : t);
  NormEstimate e;
  switch (method) {
    case NormMethod::san: e = san_norm(bank, h, w); break;
    case NormMethod::san_subset: {
      const auto plan = sample_filter_subset(bank.out_channels(), bank.in_channels(), a.rate, g.seed.value_or(0));
      const double comp = fixed_g ? *fixed_g : compensation_factor(bank.filter_count(), a.rate);
      e = san_subset_norm(bank, h, w, plan, comp);
      break;
    }
    case NormMethod::exact: e = exact_conv_spectral_norm(bank, h, w); break;
    case NormMethod::reshape:
      e = reshape_spectral_norm(bank);
      e.signal_h = h;
      e.signal_w = w;
      break;
    case NormMethod::oracle_san:
    case NormMethod::oracle_exact:
      e.method = method;
      e.signal_h = h;
      e.signal_w = w;
      e.value = method == NormMethod::oracle_san ? oracle::oracle_san_norm(bank, h, w)
                                                  : oracle::oracle_exact_norm(bank, h, w);
      break;
  }
  if (g.json()) return json_text(to_json(e));
  std::ostringstream s;
  s << "value,method,signal_h,signal_w,subset_rate,compensation,argmax_out,argmax_in,argmax_u,argmax_v\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", e.value);
  s << buf << ',' << to_string(e.method) << ',' << e.signal_h << ',' << e.signal_w << ',';
  std::snprintf(buf, sizeof buf, "%.17g,%.17g", e.subset_rate, e.compensation);
  s << buf << ',';
  if (e.argmax) s << e.argmax->out << ',' << e.argmax->in << ',' << e.argmax->u << ',' << e.argmax->v;
  else s << ",,,";
  s << '\n';
  return s.str();
}

// ---------------------------------------------------------------- compensation

struct CompensationArgs {
  std::vector<std::size_t> filters{4096};
  std::vector<double> rates{0.25, 0.5, 1.0};
  std::size_t trials = 10000;
};

std::string run_compensation(const CompensationArgs& a, const Globals& g) {
  if (a.filters.empty() || a.rates.empty()) throw UsageError("--filters and --rates must be non-empty");
  for (auto f : a.filters)
    if (f == 0) throw UsageError("--filters entries must be positive");
  for (auto r : a.rates)
    if (!(r > 0.0 && r <= 1.0)) throw UsageError("--rates entries must lie in (0, 1]");
  if (a.trials == 0) throw UsageError("--trials must be positive");
  for (auto f : a.filters)
    for (auto r : a.rates)
      if (round_half_even(static_cast<double>(f) * r) == 0)
        throw UsageError("rate " + std::to_string(r) + " leaves no filters out of " + std::to_string(f));

  const auto rows = compensation_table(a.filters, a.rates, a.trials, g.seed.value_or(0));
  if (g.json()) {
    auto arr = json::array();
    for (const auto& r : rows)
      arr.push_back({{"total", r.total}, {"rate", r.rate}, {"g_formula", r.g_formula}, {"g_montecarlo", r.g_montecarlo}});
    return json_text(arr);
  }
  return csv_text([&](std::ostream& s) { write_compensation_csv(s, rows); });
}

// ---------------------------------------------------------------- checkpoints

lab::ExperimentConfig config_for_model(const nn::Model& model) {
  lab::ExperimentConfig c;
  const auto& in = model.input_shape();
  if (in == nn::Shape3{2, 1, 1}) c.dataset = lab::DatasetKind::ring8;
  else if (in == nn::Shape3{1, 16, 16}) c.dataset = lab::DatasetKind::textures16;
  else throw UsageError("cannot infer a dataset for input shape " + nn::to_string(in) + "; pass --input");
  return c;
}

struct SparsityArgs {
  std::string checkpoint;
  std::size_t layer = 0;
  std::string input;
  std::optional<std::string> dataset;
  std::size_t samples = 256;
  double eps = 1e-6;
  std::size_t bins = 20;
};

std::string run_sparsity(const SparsityArgs& a, const Globals& g) {
  if (!(a.eps >= 0.0)) throw UsageError("--eps must be >= 0");
  if (a.bins == 0 || a.samples == 0) throw UsageError("--bins and --samples must be positive");
  const auto loaded = nn::load_checkpoint(a.checkpoint);
  Tensor batch;
  if (!a.input.empty()) {
    batch = read_sant(std::filesystem::path(a.input));
  } else {
    lab::ExperimentConfig c = config_for_model(loaded.model);
    if (a.dataset) c.dataset = lab::dataset_from_string(*a.dataset);
    CounterRng rng(g.seed.value_or(loaded.info.seed), 0x5BA25E);
    batch = lab::sample_real(c, a.samples, rng);
  }
  const auto rep = lab::sparsity_probe(loaded.model, a.layer, batch, a.eps, a.bins);
  if (g.json()) return json_text(lab::to_json(rep));
  return csv_text([&](std::ostream& s) { lab::write_sparsity_csv(s, rep); });
}

std::string run_singvals(const std::string& checkpoint, const Globals& g) {
  const auto loaded = nn::load_checkpoint(checkpoint);
  const auto rows = lab::singvals_report(loaded.model);
  if (g.json()) return json_text(json_rows(rows));
  return csv_text([&](std::ostream& s) { lab::write_singvals_csv(s, rows); });
}

// ---------------------------------------------------------------- experiments

std::string run_fit(const ConfigFlags& f, const Globals& g) {
  const auto c = f.build(g, lab::DatasetKind::triangle_wave);
  if (!c.is_fit_dataset()) throw UsageError("fit1d needs --dataset triangle_wave or identity_line");
  const auto r = lab::run_fit1d(c);
  if (g.json()) return json_text(lab::to_json(r));
  return csv_text([&](std::ostream& s) { lab::write_fit_csv(s, r.rows); });
}

std::string run_train(const ConfigFlags& f, const Globals& g, std::ostream& err) {
  const auto c = f.build(g, lab::DatasetKind::ring8);
  if (c.is_fit_dataset()) throw UsageError("train needs --dataset ring8 or textures16 (use fit1d)");
  const auto r = lab::run_wgan(c);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  if (g.json()) return json_text(json_rows(r.rows));
  return csv_text([&](std::ostream& s) { lab::write_metrics_csv(s, r.rows); });
}

struct BenchArgs {
  std::vector<std::string> methods{"none", "san", "reshape_sn"};
  int reps = 20;
};

std::string run_bench(const ConfigFlags& f, const BenchArgs& a, const Globals& g) {
  const auto c = f.build(g, lab::DatasetKind::textures16);
  if (c.is_fit_dataset()) throw UsageError("bench needs a GAN dataset");
  if (a.reps < 10) throw UsageError("--reps must be >= 10");
  std::vector<NormalizationPolicy> policies;
  for (const auto& m : a.methods) {
    NormalizationPolicy p = c.policy;
    try {
      p.method = normalization_method_from_string(m);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    policies.push_back(p);
  }
  const auto rows = lab::bench_update(c, policies, a.reps);
  if (g.json()) return json_text(json_rows(rows));
  return csv_text([&](std::ostream& s) { lab::write_bench_csv(s, rows); });
}

struct AblateArgs {
  std::string grid = "settings";
  std::vector<double> multipliers{0.5, 1.0, 1.1, 1.5};
};

std::string run_ablate(const ConfigFlags& f, const AblateArgs& a, const Globals& g) {
  auto c = f.build(g, lab::DatasetKind::ring8);
  if (c.is_fit_dataset()) throw UsageError("ablate needs a GAN dataset");
  if (!f.method && f.config_path.empty()) c.policy.method = NormalizationMethod::san;
  std::vector<lab::AblationSetting> settings;
  if (a.grid == "settings") settings = lab::ablation_settings(c);
  else if (a.grid == "multipliers") settings = lab::multiplier_grid(c, a.multipliers);
  else throw UsageError("--grid must be 'settings' or 'multipliers'");
  if (settings.empty()) throw UsageError("ablation grid is empty");
  for (const auto& s : settings) {
    try {
      s.config.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(s.label + ": " + e.what());
    }
  }
  const auto rows = lab::run_ablation_grid(settings);
  if (g.json()) return json_text(json_rows(rows));
  return csv_text([&](std::ostream& s) { lab::write_ablation_csv(s, rows); });
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Operator-norm estimates, normalization policies and toy GAN experiments", "san"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--out", g.out, "write results to this file instead of stdout");
  app.add_option("--format", g.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

  NormArgs norm_args;
  auto* norm = app.add_subcommand("norm", "operator norm of a kernel bank (.sant)");
  norm->add_option("--input", norm_args.input, "[m,n,kh,kw] or [kh,kw] .sant tensor")->required();
  norm->add_option("--plane", norm_args.plane, "signal size HxW")->required();
  norm->add_option("--method", norm_args.method, "san | san_subset | exact | reshape | oracle_san | oracle_exact");
  norm->add_option("--rate", norm_args.rate, "filter subset rate (san_subset)");
  norm->add_option("--compensation", norm_args.compensation, "auto or a number (san_subset)");

  CompensationArgs comp_args;
  auto* comp = app.add_subcommand("compensation", "subset compensation factors, formula and Monte Carlo");
  comp->add_option("--filters", comp_args.filters, "filter counts m*n")->delimiter(',');
  comp->add_option("--rates", comp_args.rates, "subset rates")->delimiter(',');
  comp->add_option("--trials", comp_args.trials, "Monte-Carlo trials");

  ConfigFlags fit_flags, train_flags, bench_flags, ablate_flags;
  auto* fit = app.add_subcommand("fit1d", "fit a 1-D Lipschitz target, vanilla vs projected");
  fit_flags.add_to(fit);
  auto* train = app.add_subcommand("train", "WGAN training run emitting a metrics table");
  train_flags.add_to(train);

  SparsityArgs sparsity_args;
  auto* sparsity = app.add_subcommand("sparsity", "channel-norm histogram at a layer input");
  sparsity->add_option("--checkpoint", sparsity_args.checkpoint, "checkpoint directory")->required();
  sparsity->add_option("--layer", sparsity_args.layer, "layer index")->required();
  sparsity->add_option("--input", sparsity_args.input, "[M,c,h,w] .sant batch (default: real samples)");
  sparsity->add_option("--dataset", sparsity_args.dataset, "dataset for the generated batch");
  sparsity->add_option("--samples", sparsity_args.samples, "generated batch size");
  sparsity->add_option("--eps", sparsity_args.eps, "zero-channel threshold");
  sparsity->add_option("--bins", sparsity_args.bins, "histogram bins above eps");

  std::string singvals_checkpoint;
  auto* singvals = app.add_subcommand("singvals", "exact, reshape and SAN norms of every conv layer");
  singvals->add_option("--checkpoint", singvals_checkpoint, "checkpoint directory")->required();

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "time one critic update per method");
  bench_flags.add_to(bench, false);
  bench->add_option("--methods", bench_args.methods, "normalization methods")->delimiter(',');
  bench->add_option("--reps", bench_args.reps, "repetitions (>= 10)");

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "grid of runs: settings A-F or constraint multipliers");
  ablate_flags.add_to(ablate);
  ablate->add_option("--grid", ablate_args.grid, "settings | multipliers");
  ablate->add_option("--multipliers", ablate_args.multipliers, "multiplier grid")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    std::string text;
    if (*norm) text = run_norm(norm_args, g);
    else if (*comp) text = run_compensation(comp_args, g);
    else if (*fit) text = run_fit(fit_flags, g);
    else if (*train) text = run_train(train_flags, g, err);
    else if (*sparsity) text = run_sparsity(sparsity_args, g);
    else if (*singvals) text = run_singvals(singvals_checkpoint, g);
    else if (*bench) text = run_bench(bench_flags, bench_args, g);
    else if (*ablate) text = run_ablate(ablate_flags, ablate_args, g);
    emit(g, out, text);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const SizeGuardError& e) {
    err << "error: size guard: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace san::cli
