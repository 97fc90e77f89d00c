#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <variant>

#include "san/checkpoint.hpp"
#include "san/datasets.hpp"
#include "san/errors.hpp"
#include "san/gan_lab.hpp"
#include "san/operator_norms.hpp"
#include "test_util.hpp"

using namespace san;
using namespace san::lab;

namespace {

ExperimentConfig ring_config(long long steps) {
  ExperimentConfig c;
  c.dataset = DatasetKind::ring8;
  c.steps = steps;
  c.eval_every = 10;
  c.hidden = 16;
  c.eval_samples = 512;
  c.batch = 32;
  c.seed = 5;
  c.policy.method = NormalizationMethod::san;
  return c;
}

ExperimentConfig texture_config(long long steps) {
  ExperimentConfig c;
  c.dataset = DatasetKind::textures16;
  c.steps = steps;
  c.eval_every = 2;
  c.channels = 4;
  c.batch = 8;
  c.seed = 6;
  c.policy.method = NormalizationMethod::exact_sn;
  return c;
}

std::string metrics_csv(const WganResult& r) {
  std::ostringstream os;
  write_metrics_csv(os, r.rows);
  return os.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("ring8 data") {
  const auto centers = data::ring8_centers();
  REQUIRE(centers.size() == 8);
  for (const auto& c : centers) CHECK(std::hypot(c[0], c[1]) == doctest::Approx(2.0));
  CHECK(centers[0][0] == doctest::Approx(2.0));
  CHECK(centers[2][1] == doctest::Approx(2.0));

  CounterRng rng(1);
  const Tensor x = data::sample_ring8(4000, rng);
  CHECK(x.shape() == Shape{4000, 2, 1, 1});
  const auto stats = data::ring8_mode_stats(x);
  CHECK(stats.covered == 8);
  CHECK(stats.hq_fraction > 0.98);
  for (auto n : stats.counts) CHECK(std::abs(static_cast<double>(n) - 500.0 * stats.hq_fraction) < 100);

  Tensor one({100, 2, 1, 1});
  for (std::size_t i = 0; i < 100; ++i) one[2 * i + 1] = -2.0;
  const auto collapsed = data::ring8_mode_stats(one);
  CHECK(collapsed.covered == 1);
  CHECK(collapsed.counts[6] == 100);
  CHECK(data::ring8_mode_stats(Tensor({10, 2, 1, 1})).covered == 0);
}

TEST_CASE("textures16 data") {
  CounterRng rng(2);
  const Tensor t = data::sample_textures16(6, rng);
  CHECK(t.shape() == Shape{6, 1, 16, 16});
  CHECK(t.max_abs() <= 1.0);
  double mean = 0.0, sq = 0.0;
  for (double v : t.values()) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(t.size());
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::sqrt(sq / static_cast<double>(t.size())) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("triangle wave") {
  CHECK(data::triangle_wave(0.0, 1.6, 0.4) == doctest::Approx(0.0));
  CHECK(data::triangle_wave(0.4, 1.6, 0.4) == doctest::Approx(0.4));
  CHECK(data::triangle_wave(-0.4, 1.6, 0.4) == doctest::Approx(-0.4));
  CHECK(data::triangle_wave(1.2, 1.6, 0.4) == doctest::Approx(-0.4));
  CHECK(data::triangle_wave(0.1, 1.6, 0.4) == doctest::Approx(0.1));
  // four interior kinks on [-2, 2]
  int kinks = 0;
  const double h = 1e-3;
  for (double x = -2.0 + h; x < 2.0 - h; x += h) {
    const double a = data::triangle_wave(x, 1.6, 0.4) - data::triangle_wave(x - h, 1.6, 0.4);
    const double b = data::triangle_wave(x + h, 1.6, 0.4) - data::triangle_wave(x, 1.6, 0.4);
    kinks += a * b < 0 && std::abs(a) > 1e-9;
  }
  CHECK(kinks == 4);
}

TEST_CASE("config json") {
  ExperimentConfig c = ring_config(123);
  c.policy.every = 4;
  c.critic_slope = 0.2;
  c.norm_order = NormOrder::post;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_from_json({{"M", 17}}).batch == 17);
  CHECK(config_from_json({{"dataset", {{"name", "triangle_wave"}, {"period", 2.0}}}}).period == 2.0);
  CHECK_THROWS_AS(config_from_json({{"stepz", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"steps", "many"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"n_dis", 0}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"dataset", "mnist"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"beta1", 1.0}}), std::invalid_argument);
}

TEST_CASE("model factories") {
  ExperimentConfig c = ring_config(1);
  const auto critic = make_critic(c, 1);
  CHECK(critic.input_shape() == nn::Shape3{2, 1, 1});
  CHECK(critic.output_shape() == nn::Shape3{1, 1, 1});
  CHECK(make_generator(c, 1).output_shape() == nn::Shape3{2, 1, 1});
  const auto tc = texture_config(1);
  CHECK(make_critic(tc, 1).input_shape() == nn::Shape3{1, 16, 16});
  CHECK(make_generator(tc, 1).output_shape() == nn::Shape3{1, 16, 16});
  ExperimentConfig fit;
  fit.dataset = DatasetKind::identity_line;
  CHECK_THROWS_AS(make_critic(fit, 1), std::invalid_argument);
  CHECK_THROWS_AS(run_wgan(fit), std::invalid_argument);
}

TEST_CASE("fit1d") {
  ExperimentConfig c;
  c.dataset = DatasetKind::triangle_wave;
  c.steps = 40;
  c.eval_every = 20;
  c.hidden = 16;
  c.fit_points = 32;
  const auto r = run_fit1d(c);
  REQUIRE(r.rows.size() == 6);
  CHECK(r.rows.front().arm == "vanilla");
  CHECK(r.rows.back().arm == "projected");
  CHECK(r.rows.back().step == 40);
  CHECK(r.vanilla_mse == r.rows[2].eval_mse);
  CHECK(r.projected_mse == r.rows.back().eval_mse);
  CHECK(std::isfinite(r.vanilla_mse));
  CHECK(fit_target(c, 0.4) == doctest::Approx(0.4));
  c.dataset = DatasetKind::identity_line;
  CHECK(fit_target(c, -1.3) == -1.3);

  std::ostringstream os;
  write_fit_csv(os, r.rows);
  CHECK(first_line(os.str()) == "arm,step,train_mse,eval_mse");
  c.dataset = DatasetKind::ring8;
  CHECK_THROWS_AS(run_fit1d(c), std::invalid_argument);
}

TEST_CASE("wgan liveness and metrics rows") {
  const auto r = run_wgan(ring_config(25));
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].step == 1);
  CHECK(r.rows[1].step == 10);
  CHECK(r.rows[3].step == 25);
  CHECK(r.critic_steps == 25);
  CHECK(r.normalization_events == 25);
  for (const auto& row : r.rows) {
    CHECK(std::isfinite(row.critic_loss));
    CHECK(std::isfinite(row.gen_loss));
    CHECK(row.critic_grad_norm > 0.0);
    REQUIRE(row.mode_coverage);
    CHECK(*row.mode_coverage <= 8);
    CHECK(row.sigma_san.size() == 3);
    CHECK(row.wall_ms == 0.0);
  }
  // normalized before the update, so the norms drift only by one step
  CHECK(r.rows.back().sigma_san[0] == doctest::Approx(1.0).epsilon(0.05));
  const std::string csv = metrics_csv(r);
  CHECK(first_line(csv) == metrics_header());

  const auto t = run_wgan(texture_config(3));
  REQUIRE(t.rows.size() == 3);
  CHECK_FALSE(t.rows[0].mode_coverage);
  CHECK(t.rows[0].sigma_exact.size() == 4);
  CHECK(std::isfinite(t.rows[0].sigma_exact[0]));
}

TEST_CASE("wgan runs are deterministic") {
  ExperimentConfig c = ring_config(20);
  c.n_dis = 2;
  CHECK(metrics_csv(run_wgan(c)) == metrics_csv(run_wgan(c)));
  ExperimentConfig d = c;
  d.seed = 6;
  CHECK(metrics_csv(run_wgan(c)) != metrics_csv(run_wgan(d)));
}

TEST_CASE("san normalization holds at every event") {
  ExperimentConfig c = ring_config(12);
  c.n_dis = 2;
  c.policy.every = 3;
  for (auto order : {NormOrder::pre, NormOrder::post}) {
    c.norm_order = order;
    long long events = 0;
    double worst = 0.0;
    WganHooks hooks;
    hooks.after_normalization = [&](long long step, const nn::Model& critic, const NormalizationEvent& ev) {
      CHECK(step % 3 == 0);
      CHECK(ev.applied);
      ++events;
      for (std::size_t l = 0; l < critic.size(); ++l)
        if (const auto* conv = std::get_if<nn::ConvCyclic>(&critic.layer(l)))
          worst = std::max(worst, std::abs(san_norm(KernelBank(conv->weight), 1, 1).value - 1.0));
    };
    const auto r = run_wgan(c, hooks);
    CHECK(r.critic_steps == 24);
    CHECK(events == 8);
    CHECK(r.normalization_events == 8);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("checkpoints and probes") {
  const auto dir = std::filesystem::temp_directory_path() / "san_test_gan_lab";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = ring_config(5);
  c.checkpoint_dir = dir.string();
  const auto r = run_wgan(c);
  const auto critic = nn::load_checkpoint(dir / "critic");
  CHECK(critic.info.step == 5);
  CHECK(critic.info.seed == 5);
  CHECK(nn::load_checkpoint(dir / "generator").model.size() == r.generator.size());
  std::filesystem::remove_all(dir);

  const auto zero = sparsity_probe(r.critic, 0, Tensor({10, 2, 1, 1}), 1e-6, 5);
  CHECK(zero.zero_fraction == 1.0);
  CHECK(zero.counts[0] == 20);
  CHECK(zero.counts.size() == 6);
  CounterRng rng(3);
  const auto live = sparsity_probe(r.critic, 2, data::sample_ring8(50, rng), 1e-6, 4);
  std::size_t total = 0;
  for (auto n : live.counts) total += n;
  CHECK(total == 50 * 16);
  CHECK(live.bin_lo[1] == 1e-6);
  std::ostringstream os;
  write_sparsity_csv(os, live);
  CHECK(first_line(os.str()) == "bin_lo,bin_hi,count,fraction");
  CHECK_THROWS_AS(sparsity_probe(r.critic, 9, Tensor({1, 2, 1, 1}), 1e-6), std::out_of_range);
  const auto tex = make_critic(texture_config(1), 1);
  CHECK_THROWS_AS(sparsity_probe(tex, 0, Tensor({1, 1, 16, 16}), 1e-6), DimensionError);
}

TEST_CASE("singular value report") {
  Tensor w({3, 3, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) w.at({i, i, 0, 0}) = 1.0;
  const nn::Model ident({3, 6, 6}, {nn::ConvCyclic{w, Tensor({3})}, nn::Relu{}});
  const auto rows = singvals_report(ident);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].exact == doctest::Approx(1.0));
  CHECK(rows[0].reshape == doctest::Approx(1.0));
  CHECK(rows[0].san == doctest::Approx(1.0));
  CHECK(rows[0].kernel == 3);

  const auto ring = singvals_report(make_critic(ring_config(1), 9));
  REQUIRE(ring.size() == 3);
  for (const auto& row : ring) {
    CHECK(row.ratio == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(row.san <= row.exact + 1e-9);
  }
  std::ostringstream os;
  write_singvals_csv(os, ring);
  CHECK(first_line(os.str()) == "layer,out_channels,in_channels,kernel,height,width,exact,reshape,san,ratio");
}

TEST_CASE("ablation grids") {
  const auto s = ablation_settings(ring_config(1));
  REQUIRE(s.size() == 6);
  CHECK(s[0].label == "A");
  CHECK(s[0].config.alpha == 5e-4);
  CHECK(s[2].config.beta1 == 0.0);
  CHECK(s[4].config.n_dis == 2);
  CHECK(s[5].config.alpha == 5e-4);
  CHECK(s[5].config.beta1 == 0.0);
  CHECK(s[5].config.n_dis == 2);
  for (const auto& x : s) CHECK(x.config.beta2 == 0.9);

  const auto m = multiplier_grid(ring_config(3));
  REQUIRE(m.size() == 4);
  CHECK(m[0].label == "multiplier=0.5");
  CHECK(m[3].config.policy.multiplier == 1.5);

  const auto a = run_ablation_grid(m);
  const auto b = run_ablation_grid(m);
  REQUIRE(a.size() == 4);
  std::ostringstream oa, ob;
  write_ablation_csv(oa, a);
  write_ablation_csv(ob, b);
  CHECK(oa.str() == ob.str());
  CHECK(a[1].multiplier == 1.0);
  CHECK(a[1].final_metrics.step == 3);

  CHECK_THROWS_AS(run_ablation_grid({}), std::invalid_argument);
  CHECK_THROWS_AS(run_ablation_grid({m[0], {"t", texture_config(1)}}), std::invalid_argument);
}

TEST_CASE("bench") {
  NormalizationPolicy p;
  p.method = NormalizationMethod::san;
  p.every = 4;
  const auto rows = bench_update(texture_config(1), {p}, 10);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].method == "san");
  CHECK(rows[0].reps == 10);
  CHECK(rows[0].update_ms > 0.0);
  CHECK(rows[0].amortized_ms == doctest::Approx(rows[0].update_ms + rows[0].normalize_ms / 4));
  CHECK_THROWS_AS(bench_update(texture_config(1), {p}, 5), std::invalid_argument);
}

TEST_CASE("bench overheads") {
  NormalizationPolicy none, sparse, dense, reshape;
  sparse.method = NormalizationMethod::san;
  sparse.every = 1000;
  dense.method = NormalizationMethod::san;
  reshape.method = NormalizationMethod::reshape_sn;
  none.method = NormalizationMethod::none;
  const auto rows = bench_update(texture_config(1), {none, sparse, dense, reshape}, 10);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].normalize_ms == 0.0);
  CHECK(rows[1].amortized_ms - rows[1].update_ms < 0.01 * rows[1].update_ms);
  const double ratio = rows[2].amortized_ms / rows[3].amortized_ms;
  INFO("san/reshape_sn per update " << ratio);
  CHECK(ratio < 10.0);
  CHECK(ratio > 0.1);
}

TEST_CASE("projected fit of the identity on [-1, 1]") {
  ExperimentConfig c;
  c.dataset = DatasetKind::identity_line;
  c.x_min = -1.0;
  c.x_max = 1.0;
  c.steps = 1000;
  c.eval_every = 500;
  c.alpha = 1e-3;
  c.seed = 3;
  const auto r = run_fit1d(c);
  CHECK(r.projected_mse < 1e-2);
}

TEST_CASE("sparsity fraction grows with eps") {
  ExperimentConfig c = texture_config(4);
  c.policy.method = NormalizationMethod::none;
  const auto r = run_wgan(c);
  CounterRng rng(11);
  const Tensor batch = data::sample_textures16(64, rng);
  const std::size_t last = r.critic.size();
  std::size_t conv = 0;
  for (std::size_t l = 0; l < last; ++l)
    if (std::holds_alternative<nn::ConvCyclic>(r.critic.layer(l))) conv = l;
  double previous = -1.0;
  for (double eps : {1e-9, 1e-6, 1e-3, 1e-1, 1.0, 10.0}) {
    const double f = sparsity_probe(r.critic, conv, batch, eps).zero_fraction;
    CHECK(f >= previous);
    previous = f;
  }
  CHECK(previous > 0.0);
}

TEST_CASE("exact >= reshape on a trained texture critic") {
  ExperimentConfig c = texture_config(6);
  c.policy.method = NormalizationMethod::none;
  const auto rows = singvals_report(run_wgan(c).critic);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(row.exact >= row.reshape * (1.0 - 1e-6));
    CHECK(row.exact >= row.san * (1.0 - 1e-6));
  }
}

TEST_CASE("channel sparsity of an unnormalized texture critic") {
  ExperimentConfig c;
  c.dataset = DatasetKind::textures16;
  c.steps = 500;
  c.eval_every = 500;
  c.batch = 16;
  c.seed = 2;
  c.policy.method = NormalizationMethod::none;
  const auto r = run_wgan(c);
  const auto& last = r.rows.back().sparsity;
  REQUIRE(last.size() == 4);
  // first verified run
  CHECK(last.back() > 0.2);
  CHECK(last.back() == 0.25);
}
