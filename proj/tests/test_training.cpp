#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "odegs/checkpoint.hpp"
#include "odegs/training.hpp"
#include "reference_losses.hpp"

using namespace odegs;
namespace ref = odegs::reference;

namespace {

Tensor tensor_of(const std::vector<double>& v, Shape s) { return Tensor(std::move(s), v); }

ForecasterConfig tiny(ForecastVariant v = ForecastVariant::kDeterministic) {
  ForecasterConfig c;
  c.context_steps = 4;
  c.d_model = 8;
  c.heads = 2;
  c.layers = 1;
  c.ff_mult = 2;
  c.d_latent = 4;
  c.field_hidden = 8;
  c.field_layers = 2;
  c.decoder_hidden = 16;
  c.decoder_layers = 2;
  c.variant = v;
  c.seed = 3;
  c.solver.method = SolverMethod::kRk4;
  c.solver.rk4_step = 0.05;
  return c;
}

SamplerConfig tiny_sampler() {
  SamplerConfig s;
  s.context_steps = 4;
  s.target_steps = 3;
  s.context_span = 0.3;
  s.t0_stride = 0.1;
  return s;
}

// M identical Gaussians holding one state for the whole window.
SampleDataset constant_dataset(std::size_t m, const SamplerConfig& s) {
  std::vector<double> times;
  for (int j = 0; j <= 20; ++j) times.push_back(0.05 * j);
  TrajectorySet set(m, times);
  StateVec st{1.0, 2.0, 3.0, 0.8, 0.0, 0.6, 0.0, -2.0, -1.5, -1.0};
  for (std::size_t j = 0; j < times.size(); ++j) set.set_frame(j, std::vector<StateVec>(m, st));
  return build_dataset(source_from(set), m, 0.0, 1.0, s);
}

SampleDataset moving_dataset(std::size_t m, const SamplerConfig& s) {
  std::vector<double> times;
  for (int j = 0; j <= 40; ++j) times.push_back(0.025 * j);
  TrajectorySet set(m, times);
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::vector<StateVec> frame(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double ph = 0.7 * static_cast<double>(k);
      frame[k] = {std::cos(3.0 * times[j] + ph), std::sin(3.0 * times[j] + ph), 0.1 * k, 1, 0, 0, 0, -2, -2, -2};
    }
    set.set_frame(j, frame);
  }
  return build_dataset(source_from(set), m, 0.0, 1.0, s);
}

PositionNormalizer fit_normalizer(const SampleDataset& ds) {
  std::vector<double> all;
  for (const auto& g : ds.groups) all.insert(all.end(), g.context.begin(), g.context.end());
  return PositionNormalizer::fit(all);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("extrapolation loss") {
  RecordScope off(nullptr);
  const Tensor a({2, 3, 10}, 0.25);
  CHECK(loss_extrapolation(a, a).item() == 0.0);
  std::vector<double> d(10, 0.0);
  d[0] = 1.0;
  CHECK(loss_extrapolation(tensor_of(d, {1, 1, 10}), Tensor({1, 1, 10}, 0.0)).item() == 1.0);
  CHECK_THROWS_AS(loss_extrapolation(a, Tensor({2, 2, 10}, 0.0)), ShapeError);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 8, b = 1 + rng() % 6, c = 1 + rng() % 10;
    const auto p = ref::random_values(n * b * c, rng, 3.0);
    const auto t = ref::random_values(n * b * c, rng, 3.0);
    CHECK(std::abs(loss_extrapolation(tensor_of(p, {n, b, c}), tensor_of(t, {n, b, c})).item() -
                   ref::l1_loss(p, t, n, b, c)) < 1e-12);
  }
}

TEST_CASE("latent smoothness regularizer") {
  RecordScope off(nullptr);
  SUBCASE("constant field output") {
    const std::vector<double> t{0.1, 0.3, 0.35, 0.9};
    CHECK(reg_latent(Tensor({4, 2, 5}, 0.7), t).item() == 0.0);
  }
  SUBCASE("two steps") {
    const std::vector<double> t{0.0, 0.5};
    const std::vector<double> f{1.0, 2.0, 3.0, 2.0, 0.0, 3.0};
    // v = (1, -2, 0), dt = 0.5 -> ||v/dt||^2 = 4 + 16
    CHECK(reg_latent(tensor_of(f, {2, 1, 3}), t).item() == doctest::Approx(20.0).epsilon(1e-15));
  }
  SUBCASE("fewer than two steps") {
    const std::vector<double> t{0.2};
    CHECK(reg_latent(Tensor({1, 3, 4}, 1.0), t).item() == 0.0);
  }
  SUBCASE("reference fixtures") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng() % 8, b = 1 + rng() % 5, c = 1 + rng() % 8;
      const auto t = ref::random_times(n, rng);
      const auto f = ref::random_values(n * b * c, rng, 2.0);
      const double got = reg_latent(tensor_of(f, {n, b, c}), t).item();
      const double want = ref::latent_smoothness(f, t, n, b, c);
      CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("trajectory acceleration regularizer") {
  RecordScope off(nullptr);
  SUBCASE("constant velocity is exactly zero") {
    const std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> mu;
    for (double ti : t)
      for (int k = 0; k < 2; ++k) {
        mu.push_back(1.0 + 2.0 * ti);
        mu.push_back(-0.5 * ti);
        mu.push_back(0.125 + 4.0 * ti * (k + 1));
      }
    CHECK(reg_traj(tensor_of(mu, {5, 2, 3}), t).item() == 0.0);
  }
  SUBCASE("hand-evaluated three-step case") {
    const std::vector<double> t{0.0, 1.0, 2.0};
    const std::vector<double> mu{0, 0, 0, 0, 0, 0, 1, 0, 0};
    CHECK(reg_traj(tensor_of(mu, {3, 1, 3}), t).item() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("homogeneous of degree two") {
    std::mt19937_64 rng(3);
    const auto t = ref::random_times(6, rng);
    const auto mu = ref::random_values(6 * 4 * 3, rng);
    std::vector<double> scaled = mu;
    for (auto& v : scaled) v *= 3.0;
    const double base = reg_traj(tensor_of(mu, {6, 4, 3}), t).item();
    CHECK(reg_traj(tensor_of(scaled, {6, 4, 3}), t).item() == doctest::Approx(9.0 * base).epsilon(1e-12));
  }
  SUBCASE("fewer than three steps") {
    const std::vector<double> t{0.0, 1.0};
    CHECK(reg_traj(Tensor({2, 1, 3}, 5.0), t).item() == 0.0);
  }
  SUBCASE("reference fixtures") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 3 + rng() % 8, m = 1 + rng() % 5;
      const auto t = ref::random_times(n, rng);
      const auto mu = ref::random_values(n * m * 3, rng, 2.0);
      const double got = reg_traj(tensor_of(mu, {n, m, 3}), t).item();
      const double want = ref::acceleration_penalty(mu, t, n, m);
      CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("adaptive regularizer scale") {
  LossConfig cfg;
  CHECK(adaptive_scale(cfg.loss_end, cfg) == 1.0);
  CHECK(adaptive_scale(-1.0, cfg) == 1.0);
  CHECK(adaptive_scale(cfg.loss_init, cfg) == std::exp(-1.0 / cfg.temperature));
  CHECK(adaptive_scale(5.0, cfg) == std::exp(-1.0 / cfg.temperature));
  CHECK(adaptive_scale(0.5 * (cfg.loss_init + cfg.loss_end), cfg) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.01, 0.05);
  for (int trial = 0; trial < 200; ++trial) {
    LossConfig c;
    c.temperature = 0.1 + u(rng) * 20.0 + 0.2;
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const double sa = adaptive_scale(a, c), sb = adaptive_scale(b, c);
    CHECK(sb <= sa);
    CHECK(sa <= 1.0);
    CHECK(sb >= std::exp(-1.0 / c.temperature));
    CHECK(std::abs(sa - ref::scale_factor(a, c.loss_init, c.loss_end, c.temperature)) < 1e-12);
  }
}

TEST_CASE("loss moving average") {
  double ema = 0.3;
  for (int i = 0; i < 10; ++i) ema = update_ema(ema, 0.3, 0.9);
  CHECK(ema == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(update_ema(7.0, 2.0, 0.0) == 2.0);
  CHECK(update_ema(1.0, 0.0, 0.9) == doctest::Approx(0.9).epsilon(1e-15));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double p = u(rng), c = u(rng), a = 0.99 * u(rng);
    CHECK(std::abs(update_ema(p, c, a) - ref::ema_step(p, c, a)) < 1e-15);
  }
}

TEST_CASE("variational objective terms") {
  RecordScope off(nullptr);
  const std::size_t d = 6;
  CHECK(kl_to_standard_normal(Tensor({2, d}, 0.0), Tensor({2, d}, 0.0)).item() == 0.0);
  CHECK(kl_to_standard_normal(Tensor({3, d}, 1.0), Tensor({3, d}, 0.0)).item() == doctest::Approx(0.5 * d).epsilon(1e-15));
  std::mt19937_64 rng(7);
  const auto mu = ref::random_values(d, rng);
  double sq = 0.0;
  for (double v : mu) sq += v * v;
  CHECK(kl_to_standard_normal(tensor_of(mu, {1, d}), Tensor({1, d}, 0.0)).item() == doctest::Approx(0.5 * sq).epsilon(1e-14));

  const double sigma = 0.05;
  const Tensor same({3, 2, 10}, 0.4);
  const double constant = 3.0 * 5.0 * std::log(2.0 * std::numbers::pi * sigma * sigma);
  CHECK(gaussian_nll(same, same, sigma).item() == doctest::Approx(constant).epsilon(1e-14));
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 5, b = 1 + rng() % 4, c = 1 + rng() % 10;
    const auto p = ref::random_values(n * b * c, rng), t = ref::random_values(n * b * c, rng);
    const double want = ref::gaussian_nll(p, t, n, b, c, sigma);
    CHECK(std::abs(gaussian_nll(tensor_of(p, {n, b, c}), tensor_of(t, {n, b, c}), sigma).item() - want) <=
          1e-12 * std::abs(want));
    const auto m = ref::random_values(b * c, rng), lv = ref::random_values(b * c, rng);
    CHECK(std::abs(kl_to_standard_normal(tensor_of(m, {b, c}), tensor_of(lv, {b, c})).item() -
                   ref::kl_standard(m, lv, b, c)) < 1e-12);
  }
}

TEST_CASE("reparameterized objective gradient matches finite differences") {
  ForecasterConfig c = tiny(ForecastVariant::kVariational);
  const Forecaster f(c);
  std::mt19937_64 rng(8);
  std::vector<Tensor> leaves{testing::random_tensor({2, c.d_latent}, rng, -0.5, 0.5),
                             testing::random_tensor({2, c.d_latent}, rng, -1.0, 0.0)};
  const Tensor target({2, 2, kStateDim}, 0.1);
  const std::vector<double> times{0.3, 0.6};
  const double err = testing::gradcheck(
      [&](const std::vector<Tensor>& l) {
        Rng eps(99);  // same noise for every evaluation
        const LatentGaussian q{l[0], l[1]};
        const Tensor states = f.forecast_from_latent(Forecaster::sample_latent(q, eps), 0.0, times).states;
        return gaussian_nll(states, target, 0.05) + kl_to_standard_normal(q.mean, q.logvar);
      },
      leaves);
  CHECK(err < 1e-4);
}

TEST_CASE("config validation") {
  LossConfig l;
  l.temperature = 0.0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = {};
  l.ema_decay = 1.0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = {};
  l.loss_init = 0.0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = {};
  l.lambda_traj = -1.0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("training converges on constant trajectories") {
  SamplerConfig s = tiny_sampler();
  s.t0_stride = 0.005;
  const SampleDataset ds = constant_dataset(16, s);
  const PositionNormalizer norm = fit_normalizer(ds);
  Forecaster model(tiny());
  TrainConfig t;
  t.epochs = 5;
  t.batch_size = 4;
  t.lr_max = 2e-2;
  t.seed = 1;
  const TrainResult r = train_forecaster(model, ds, norm, t, LossConfig{});
  REQUIRE(r.epoch_loss_e.size() == 5);
  CHECK(r.epoch_loss_e.back() < r.epoch_loss_e.front());
  // Loss of the trained model over the whole dataset.
  RecordScope off(nullptr);
  Rng rng(0);
  std::vector<std::size_t> all(ds.gaussians);
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  double worst = 0.0;
  for (std::size_t g = 0; g < ds.groups.size(); ++g) {
    const auto [context, target] = pack_batch(ds, g, all, norm);
    const auto& times = ds.groups[g].times;
    worst = std::max(worst, batch_terms(model, context, target, times.context.back(), times.target, LossConfig{}, rng)
                                .parts.loss_e);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("training log, schedule and checkpoints") {
  const SamplerConfig s = tiny_sampler();
  const SampleDataset ds = moving_dataset(6, s);
  const PositionNormalizer norm = fit_normalizer(ds);
  const auto dir = std::filesystem::temp_directory_path() / "odegs_train_test";
  std::filesystem::remove_all(dir);
  TrainConfig t;
  t.epochs = 3;
  t.batch_size = 4;
  t.seed = 11;
  t.checkpoint = dir / "model.ckpt";
  t.metrics_csv = dir / "metrics.csv";
  Forecaster model(tiny());
  const TrainResult r = train_forecaster(model, ds, norm, t, LossConfig{});

  const std::size_t per_epoch = ds.groups.size() * 2;  // 6 Gaussians in batches of 4
  REQUIRE(r.steps.size() == 3 * per_epoch);
  CHECK(r.steps.front().lr == 1e-3);
  CHECK(std::abs(r.steps.back().lr - 1e-6) < 1e-9);
  for (const auto& m : r.steps) {
    CHECK(m.reg_latent >= 0.0);
    CHECK(m.reg_traj >= 0.0);
    CHECK(m.total >= m.loss_e);
    CHECK(m.scale <= 1.0);
    CHECK(m.scale >= std::exp(-1.0 / LossConfig{}.temperature));
  }
  // The first step initializes the moving average with its own loss.
  CHECK(r.steps[0].scale == adaptive_scale(r.steps[0].loss_e, LossConfig{}));
  const double ema1 = update_ema(r.steps[0].loss_e, r.steps[1].loss_e, 0.9);
  CHECK(r.steps[1].scale == adaptive_scale(ema1, LossConfig{}));

  const std::string csv = slurp(t.metrics_csv);
  CHECK(csv.rfind("step,epoch,loss_e,reg_latent,reg_traj,kl,s_t,lr,total\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.steps.size() + 1);

  const LoadedForecaster saved = load_forecaster(t.checkpoint);
  CHECK(saved.metadata["epoch"] == 2);
  CHECK(saved.model.params().snapshot() == model.params().snapshot());

  SUBCASE("same seed reproduces the log") {
    TrainConfig t2 = t;
    t2.metrics_csv = dir / "metrics2.csv";
    t2.checkpoint.clear();
    Forecaster again(tiny());
    train_forecaster(again, ds, norm, t2, LossConfig{});
    CHECK(slurp(t2.metrics_csv) == csv);
    CHECK(again.params().snapshot() == model.params().snapshot());
  }
  SUBCASE("a different seed shuffles differently") {
    TrainConfig t2 = t;
    t2.seed = 12;
    t2.metrics_csv.clear();
    t2.checkpoint.clear();
    Forecaster other(tiny());
    const TrainResult r2 = train_forecaster(other, ds, norm, t2, LossConfig{});
    bool differs = false;
    for (std::size_t i = 0; i < r.steps.size(); ++i) differs |= r.steps[i].loss_e != r2.steps[i].loss_e;
    CHECK(differs);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("regularizer-free mode and the other variants train") {
  const SamplerConfig s = tiny_sampler();
  const SampleDataset ds = moving_dataset(6, s);
  const PositionNormalizer norm = fit_normalizer(ds);
  TrainConfig t;
  t.epochs = 4;
  t.batch_size = 6;
  t.lr_max = 3e-3;
  SUBCASE("no regularizers") {
    LossConfig l;
    l.lambda_latent = 0.0;
    l.lambda_traj = 0.0;
    Forecaster model(tiny());
    const TrainResult r = train_forecaster(model, ds, norm, t, l);
    for (const auto& m : r.steps) CHECK(m.total == m.loss_e);
  }
  for (const auto v : {ForecastVariant::kVariational, ForecastVariant::kAutoregressive}) {
    CAPTURE(to_string(v));
    Forecaster model(tiny(v));
    const TrainResult r = train_forecaster(model, ds, norm, t, LossConfig{});
    CHECK(r.epoch_loss_e.back() < r.epoch_loss_e.front());
    if (v == ForecastVariant::kVariational) CHECK(r.steps.back().kl > 0.0);
    if (v == ForecastVariant::kAutoregressive) CHECK(r.steps.back().reg_latent == 0.0);
  }
}

TEST_CASE("non-finite loss aborts and restores the last good parameters") {
  const SamplerConfig s = tiny_sampler();
  SampleDataset ds = moving_dataset(4, s);
  const PositionNormalizer norm = fit_normalizer(ds);
  for (auto& g : ds.groups) g.target[3] = std::numeric_limits<double>::quiet_NaN();
  const auto path = std::filesystem::temp_directory_path() / "odegs_nan.ckpt";
  std::filesystem::remove(path);
  Forecaster model(tiny());
  const std::vector<double> initial = model.params().snapshot();
  TrainConfig t;
  t.checkpoint = path;
  CHECK_THROWS_WITH_AS(train_forecaster(model, ds, norm, t, LossConfig{}), doctest::Contains("non-finite loss"),
                       TrainingError);
  CHECK(model.params().snapshot() == initial);
  const LoadedForecaster saved = load_forecaster(path);
  CHECK(saved.metadata["aborted"] == true);
  CHECK(saved.model.params().snapshot() == initial);
  std::filesystem::remove(path);
}

TEST_CASE("training argument errors") {
  const SamplerConfig s = tiny_sampler();
  const SampleDataset ds = moving_dataset(3, s);
  Forecaster wrong([] {
    ForecasterConfig c = tiny();
    c.context_steps = 5;
    return c;
  }());
  CHECK_THROWS_AS(train_forecaster(wrong, ds, PositionNormalizer{}, TrainConfig{}, LossConfig{}), std::invalid_argument);
  Forecaster model(tiny());
  SampleDataset empty;
  empty.gaussians = 3;
  empty.config = s;
  CHECK_THROWS_AS(train_forecaster(model, empty, PositionNormalizer{}, TrainConfig{}, LossConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(pack_batch(ds, 99, std::vector<std::size_t>{0}, PositionNormalizer{}), std::out_of_range);
  CHECK_THROWS_AS(pack_batch(ds, 0, std::vector<std::size_t>{7}, PositionNormalizer{}), std::out_of_range);
}
