#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "odegs/checkpoint.hpp"
#include "odegs/forecaster.hpp"
#include "odegs/training.hpp"

using namespace odegs;
using odegs::testing::gradcheck;

namespace {

ForecasterConfig tiny(ForecastVariant v = ForecastVariant::kDeterministic, std::size_t nc = 4) {
  ForecasterConfig c;
  c.context_steps = nc;
  c.d_model = 8;
  c.heads = 2;
  c.layers = 1;
  c.ff_mult = 2;
  c.d_latent = 4;
  c.field_hidden = 8;
  c.field_layers = 2;
  c.decoder_hidden = 8;
  c.decoder_layers = 2;
  c.variant = v;
  c.seed = 5;
  return c;
}

Tensor random_context(std::size_t b, std::size_t nc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> d(b * nc * kStateDim);
  for (auto& v : d) v = u(rng);
  return Tensor({b, nc, kStateDim}, std::move(d));
}

void zero_params(Forecaster& f, const std::string& prefix) {
  for (auto& [name, t] : f.params().entries())
    if (name.rfind(prefix, 0) == 0) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor row(const Tensor& states, std::size_t j) { return slice(states, 0, j, 1); }

}  // namespace

TEST_CASE("encoder is deterministic and order sensitive") {
  RecordScope off(nullptr);
  const Forecaster f(tiny(ForecastVariant::kDeterministic, 6));
  const Tensor ctx = random_context(3, 6, 1);
  const Tensor again = Tensor(ctx.shape(), std::vector<double>(ctx.data().begin(), ctx.data().end()));
  CHECK(max_abs_diff(f.encode(ctx).data(), f.encode(again).data()) == 0.0);

  std::vector<Tensor> rows;
  for (std::size_t i = 6; i-- > 0;) rows.push_back(slice(ctx, 1, i, 1));
  const Tensor reversed = concat(rows, 1);
  CHECK(max_abs_diff(f.encode(ctx).data(), f.encode(reversed).data()) > 1e-6);
}

TEST_CASE("zero context through a zeroed latent projection gives a zero latent") {
  RecordScope off(nullptr);
  Forecaster f(tiny());
  zero_params(f, "latent");
  const Tensor z0 = f.encode(Tensor({2, 4, kStateDim}, 0.0));
  for (double v : z0.data()) CHECK(v == 0.0);
}

TEST_CASE("zero vector field freezes the forecast at decode(z0)") {
  RecordScope off(nullptr);
  Forecaster f(tiny());
  zero_params(f, "field");
  const Tensor ctx = random_context(3, 4, 2);
  const std::vector<double> times{0.1, 0.5, 2.0, 7.0};
  const ForecastResult r = f.forecast(ctx, 0.0, times);
  const Tensor expected = f.decode(f.encode(ctx));
  for (std::size_t j = 0; j < times.size(); ++j) {
    CHECK(max_abs_diff(row(r.states, j).data(), row(r.states, 0).data()) == 0.0);
    // Batched versus single decoder matmuls may round differently.
    CHECK(max_abs_diff(row(r.states, j).data(), expected.data()) < 1e-14);
  }
}

TEST_CASE("denser output grids leave shared predictions unchanged") {
  RecordScope off(nullptr);
  const Forecaster f(tiny());
  const Tensor ctx = random_context(4, 4, 3);
  std::vector<double> coarse, fine;
  for (int j = 1; j <= 8; ++j) coarse.push_back(0.6 + 0.05 * j);
  for (int j = 1; j <= 16; ++j) fine.push_back(0.6 + 0.025 * j);
  const Tensor a = f.forecast(ctx, 0.6, coarse).states;
  const Tensor b = f.forecast(ctx, 0.6, fine).states;
  for (std::size_t j = 0; j < coarse.size(); ++j)
    CHECK(max_abs_diff(row(a, j).data(), row(b, 2 * j + 1).data()) < 1e-12);
}

TEST_CASE("forecast shape contract over random configurations") {
  RecordScope off(nullptr);
  std::mt19937_64 rng(9);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  for (int trial = 0; trial < 12; ++trial) {
    ForecasterConfig c = tiny(static_cast<ForecastVariant>(trial % 3), pick(1, 7));
    c.heads = pick(1, 3);
    c.d_model = c.heads * pick(1, 4);
    c.layers = pick(0, 2);
    c.d_latent = pick(1, 6);
    c.field_layers = pick(1, 3);
    c.decoder_layers = pick(1, 3);
    c.seed = trial;
    const Forecaster f(c);
    const std::size_t b = pick(1, 5), ne = pick(1, 6);
    std::vector<double> times(ne);
    for (std::size_t j = 0; j < ne; ++j) times[j] = 1.0 + 0.1 * static_cast<double>(j + 1);
    const Tensor ctx = random_context(b, c.context_steps, trial);
    const Tensor states = c.variant == ForecastVariant::kAutoregressive ? f.forecast_autoregressive(ctx, ne)
                                                                         : f.forecast(ctx, 1.0, times).states;
    CHECK(states.shape() == Shape{ne, b, kStateDim});
  }
}

TEST_CASE("every parameter tensor receives gradient from the extrapolation loss") {
  for (const auto variant : {ForecastVariant::kDeterministic, ForecastVariant::kAutoregressive}) {
    CAPTURE(to_string(variant));
    Forecaster f(tiny(variant));
    if (variant == ForecastVariant::kAutoregressive) {
      // Move off the identity-copy start, where the zero output layer blocks upstream gradient.
      std::mt19937_64 rng(1);
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      for (auto& v : f.params().find("decoder.1.weight")->mutable_data()) v = u(rng);
    }
    const Tensor ctx = random_context(5, 4, 4);
    const Tensor target = random_context(3, 5, 5);  // reused as a [3, 5, 10] target
    const std::vector<double> times{1.2, 1.4, 1.6};
    GradRecord rec;
    {
      RecordScope scope(&rec);
      const Tensor states = variant == ForecastVariant::kAutoregressive ? f.forecast_autoregressive(ctx, 3)
                                                                         : f.forecast(ctx, 1.0, times).states;
      f.params().zero_grad();
      rec.backward(loss_extrapolation(states, reshape(target, {3, 5, kStateDim})));
    }
    for (const auto& [name, t] : f.params().entries()) {
      double norm = 0.0;
      for (double g : t.grad()) norm += g * g;
      CAPTURE(name);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("finite-difference check of forecast plus loss on a tiny model") {
  for (const SolverMethod method : {SolverMethod::kRk4, SolverMethod::kDopri5}) {
    CAPTURE(to_string(method));
    ForecasterConfig c = tiny();
    c.solver.method = method;
    c.solver.rk4_step = 0.1;
    if (method == SolverMethod::kDopri5) {
      // Step sizes are treated as constants by backprop; tight tolerances make their sensitivity negligible.
      c.solver.rtol = 1e-11;
      c.solver.atol = 1e-11;
    }
    Forecaster f(c);
    const Tensor ctx = random_context(2, 4, 6);
    const Tensor target = reshape(random_context(2, 2, 7), {2, 2, kStateDim});
    const std::vector<double> times{0.5, 0.9};
    std::vector<Tensor> leaves;
    for (auto& [name, t] : f.params().entries()) leaves.push_back(t);
    const double err = gradcheck(
        [&](const std::vector<Tensor>&) { return loss_extrapolation(f.forecast(ctx, 0.2, times).states, target); },
        leaves);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("forecast is continuous in the query time") {
  RecordScope off(nullptr);
  ForecasterConfig c = tiny();
  c.solver.rtol = 1e-12;
  c.solver.atol = 1e-12;
  const Forecaster f(c);
  const Tensor ctx = random_context(1, 4, 8);
  const double t = 1.5;
  const ForecastResult base = f.forecast(ctx, 1.0, std::vector<double>{t});
  // Time derivative of the prediction: decoder Jacobian applied to f(z(t)).
  const Tensor z = base.latents[0];
  const Tensor v = f.field(z);
  const double eps = 1e-6;
  const Tensor rate = (f.decode(z + v * eps) - f.decode(z - v * eps)) * (0.5 / eps);
  double prev_gap = 1e9;
  for (const double delta : {1e-2, 1e-3, 1e-4}) {
    const Tensor moved = f.forecast(ctx, 1.0, std::vector<double>{t + delta}).states;
    const double gap = max_abs_diff(moved.data(), base.states.data());
    CHECK(gap < prev_gap);
    prev_gap = gap;
    double rate_max = 0.0;
    for (double r : rate.data()) rate_max = std::max(rate_max, std::abs(r));
    CHECK(gap <= 1.01 * rate_max * delta + 1e-9);
  }
}

TEST_CASE("variational head") {
  RecordScope off(nullptr);
  Forecaster f(tiny(ForecastVariant::kVariational));
  const Tensor ctx = random_context(3, 4, 10);
  SUBCASE("vanishing variance reproduces the deterministic path") {
    zero_params(f, "logvar.weight");
    for (auto& [name, t] : f.params().entries())
      if (name == "logvar.bias") std::fill(t.mutable_data().begin(), t.mutable_data().end(), -80.0);
    const LatentGaussian q = f.encode_variational(ctx);
    Rng rng(1);
    const Tensor z0 = Forecaster::sample_latent(q, rng);
    CHECK(max_abs_diff(z0.data(), q.mean.data()) < 1e-12);
    const std::vector<double> times{0.3, 0.6};
    const Tensor sampled = f.forecast_from_latent(z0, 0.0, times).states;
    const Tensor mean_path = f.forecast(ctx, 0.0, times).states;
    CHECK(max_abs_diff(sampled.data(), mean_path.data()) < 1e-6);
  }
  SUBCASE("samples spread with the posterior scale") {
    const LatentGaussian q{Tensor({2000, 1}, 0.5), Tensor({2000, 1}, std::log(4.0))};
    Rng rng(2);
    const Tensor z = Forecaster::sample_latent(q, rng);
    double mean = 0.0, var = 0.0;
    for (double v : z.data()) mean += v / 2000.0;
    for (double v : z.data()) var += (v - mean) * (v - mean) / 1999.0;
    CHECK(std::abs(mean - 0.5) < 0.15);
    CHECK(std::abs(std::sqrt(var) - 2.0) < 0.15);
  }
}

TEST_CASE("autoregressive rollout") {
  RecordScope off(nullptr);
  SUBCASE("a fresh model copies the last context row") {
    const Forecaster f(tiny(ForecastVariant::kAutoregressive));
    const Tensor ctx = random_context(3, 4, 11);
    const Tensor out = f.forecast_autoregressive(ctx, 6);
    const Tensor last = slice(ctx, 1, 3, 1);
    for (std::size_t j = 0; j < 6; ++j) CHECK(max_abs_diff(row(out, j).data(), last.data()) == 0.0);
  }
  SUBCASE("one step is a single encoder-decoder pass") {
    Forecaster f(tiny(ForecastVariant::kAutoregressive));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& [name, t] : f.params().entries())
      if (name.rfind("decoder", 0) == 0)
        for (auto& v : t.mutable_data()) v = u(rng);
    const Tensor ctx = random_context(2, 4, 12);
    const Tensor out = f.forecast_autoregressive(ctx, 1);
    const Tensor expected = reshape(slice(ctx, 1, 3, 1), {2, kStateDim}) + f.decode(f.encode(ctx));
    CHECK(out.shape() == Shape{1, 2, kStateDim});
    CHECK(max_abs_diff(out.data(), expected.data()) < 1e-15);
    // Step two sees the window shifted by one row with the prediction appended.
    const Tensor two = f.forecast_autoregressive(ctx, 2);
    const std::array<Tensor, 2> parts{slice(ctx, 1, 1, 3), reshape(expected, {2, 1, kStateDim})};
    const Tensor window = concat(parts, 1);
    const Tensor second = reshape(slice(window, 1, 3, 1), {2, kStateDim}) + f.decode(f.encode(window));
    CHECK(max_abs_diff(row(two, 1).data(), second.data()) < 1e-12);
  }
}

TEST_CASE("extrapolate works in scene units across inference chunks") {
  const Forecaster f(tiny());
  const std::size_t m = 300;
  ContextBatch ctx;
  ctx.gaussians = m;
  ctx.times = {0.0, 0.1, 0.2, 0.3};
  const Tensor raw = random_context(m, 4, 13);
  ctx.states.assign(raw.data().begin(), raw.data().end());
  PositionNormalizer norm;
  norm.center = Vec3(1.0, -2.0, 0.5);
  norm.scale = 3.0;
  const std::vector<double> times{0.4, 0.8};
  const TrajectorySet out = extrapolate(f, norm, ctx, times);
  REQUIRE(out.gaussians() == m);
  REQUIRE(out.steps() == 2);

  RecordScope off(nullptr);
  const Tensor packed = pack_context(ctx, norm);
  for (const std::size_t k : {std::size_t{0}, std::size_t{255}, std::size_t{256}, std::size_t{299}}) {
    std::vector<double> s(f.forecast(slice(packed, 0, k, 1), 0.3, times).states.data().begin(),
                          f.forecast(slice(packed, 0, k, 1), 0.3, times).states.data().end());
    norm.invert(s);
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t i = 0; i < kStateDim; ++i) CHECK(std::abs(out.state(k, j)[i] - s[j * kStateDim + i]) < 1e-5);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto path = std::filesystem::temp_directory_path() / "odegs_forecaster.ckpt";
  ForecasterConfig c = tiny(ForecastVariant::kVariational);
  c.solver.method = SolverMethod::kRk4;
  c.solver.rk4_step = 0.05;
  const Forecaster f(c);
  PositionNormalizer norm;
  norm.center = Vec3(0.1, 0.2, 0.3);
  norm.scale = 1.7;
  save_forecaster(path, f, norm, {{"epoch", 3}});
  const LoadedForecaster g = load_forecaster(path);
  CHECK(g.model.config().variant == ForecastVariant::kVariational);
  CHECK(g.model.config().solver.method == SolverMethod::kRk4);
  CHECK(g.model.config().solver.rk4_step == 0.05);
  CHECK(g.metadata["epoch"] == 3);
  CHECK(g.normalizer.scale == 1.7);
  CHECK((g.normalizer.center - norm.center).norm() == 0.0);
  RecordScope off(nullptr);
  const Tensor ctx = random_context(2, 4, 14);
  const std::vector<double> times{0.5};
  CHECK(max_abs_diff(f.forecast(ctx, 0.0, times).states.data(), g.model.forecast(ctx, 0.0, times).states.data()) ==
        0.0);
  std::filesystem::remove(path);
}

TEST_CASE("forecaster errors") {
  RecordScope off(nullptr);
  const Forecaster f(tiny());
  const Forecaster ar(tiny(ForecastVariant::kAutoregressive));
  const Tensor ctx = random_context(2, 4, 15);
  CHECK_THROWS_AS(f.encode(random_context(2, 5, 1)), ShapeError);
  CHECK_THROWS_AS(f.encode(Tensor({4, kStateDim}, 0.0)), ShapeError);
  CHECK_THROWS_AS(f.forecast(ctx, 1.0, std::vector<double>{0.5}), std::invalid_argument);
  {
    RecordScope off(nullptr);
    const Tensor at_end = f.forecast(ctx, 1.0, std::vector<double>{1.0}).states;
    const Tensor direct = f.decode(f.encode(ctx));
    CHECK(max_abs_diff(at_end.data(), direct.data()) == 0.0);
  }
  CHECK_THROWS_AS(f.forecast(ctx, 1.0, std::vector<double>{1.5, 1.2}), std::invalid_argument);
  CHECK_THROWS_AS(f.forecast(ctx, 1.0, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(f.encode_variational(ctx), std::logic_error);
  CHECK_THROWS_AS(ar.field(Tensor({1, 4}, 0.0)), std::logic_error);
  CHECK_THROWS_AS(ar.forecast_autoregressive(ctx, 0), std::invalid_argument);
  CHECK_THROWS_AS(forecast_variant_from_string("sde"), std::invalid_argument);
  ForecasterConfig bad = tiny();
  bad.heads = 3;
  CHECK_THROWS_AS(Forecaster{bad}, std::invalid_argument);

  const auto path = std::filesystem::temp_directory_path() / "odegs_not_forecaster.ckpt";
  ParamStore store;
  store.add_zeros("w", {2});
  write_checkpoint(path, store, R"({"kind":"interp"})");
  CHECK_THROWS_AS(load_forecaster(path), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("solver failure propagates out of a forecast") {
  RecordScope off(nullptr);
  ForecasterConfig c = tiny();
  c.solver.max_steps = 2;
  c.solver.rtol = 1e-12;
  c.solver.atol = 1e-12;
  const Forecaster f(c);
  CHECK_THROWS_AS(f.forecast(random_context(1, 4, 16), 0.0, std::vector<double>{50.0}), SolverError);
}
