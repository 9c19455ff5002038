#include "odegs/forecaster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "odegs/checkpoint.hpp"

namespace odegs {

namespace {

constexpr std::size_t kInferenceChunk = 256;

std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t hidden, std::size_t maps, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i + 1 < maps; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

void zero_fill(Tensor& t) { std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0); }

}  // namespace

ForecastVariant forecast_variant_from_string(const std::string& s) {
  if (s == "deterministic") return ForecastVariant::kDeterministic;
  if (s == "variational") return ForecastVariant::kVariational;
  if (s == "autoregressive") return ForecastVariant::kAutoregressive;
  throw std::invalid_argument("unknown forecaster variant '" + s +
                              "' (expected deterministic, variational or autoregressive)");
}

std::string to_string(ForecastVariant v) {
  switch (v) {
    case ForecastVariant::kDeterministic: return "deterministic";
    case ForecastVariant::kVariational: return "variational";
    case ForecastVariant::kAutoregressive: return "autoregressive";
  }
  return "unknown";
}

void ForecasterConfig::validate() const {
  if (context_steps < 1) throw std::invalid_argument("ForecasterConfig: context_steps must be >= 1");
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    throw std::invalid_argument("ForecasterConfig: d_model must be a positive multiple of heads");
  if (d_latent == 0 || field_hidden == 0 || decoder_hidden == 0 || ff_mult == 0)
    throw std::invalid_argument("ForecasterConfig: widths must be positive");
  if (field_layers < 1 || decoder_layers < 1) throw std::invalid_argument("ForecasterConfig: MLPs need >= 1 layer");
  solver.validate();
}

nlohmann::json to_json(const ForecasterConfig& c) {
  return {{"context_steps", c.context_steps},
          {"d_model", c.d_model},
          {"heads", c.heads},
          {"layers", c.layers},
          {"ff_mult", c.ff_mult},
          {"d_latent", c.d_latent},
          {"field_hidden", c.field_hidden},
          {"field_layers", c.field_layers},
          {"decoder_hidden", c.decoder_hidden},
          {"decoder_layers", c.decoder_layers},
          {"variant", to_string(c.variant)},
          {"seed", c.seed},
          {"solver",
           {{"method", to_string(c.solver.method)},
            {"rtol", c.solver.rtol},
            {"atol", c.solver.atol},
            {"initial_step", c.solver.initial_step},
            {"max_steps", c.solver.max_steps},
            {"rk4_step", c.solver.rk4_step}}}};
}

ForecasterConfig forecaster_config_from_json(const nlohmann::json& j) {
  ForecasterConfig c;
  c.context_steps = j.value("context_steps", c.context_steps);
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.d_latent = j.value("d_latent", c.d_latent);
  c.field_hidden = j.value("field_hidden", c.field_hidden);
  c.field_layers = j.value("field_layers", c.field_layers);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.variant = forecast_variant_from_string(j.value("variant", to_string(c.variant)));
  c.seed = j.value("seed", c.seed);
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    c.solver.method = solver_method_from_string(s.value("method", to_string(c.solver.method)));
    c.solver.rtol = s.value("rtol", c.solver.rtol);
    c.solver.atol = s.value("atol", c.solver.atol);
    c.solver.initial_step = s.value("initial_step", c.solver.initial_step);
    c.solver.max_steps = s.value("max_steps", c.solver.max_steps);
    c.solver.rk4_step = s.value("rk4_step", c.solver.rk4_step);
  }
  c.validate();
  return c;
}

std::vector<double> sinusoidal_table(std::size_t steps, std::size_t dim) {
  std::vector<double> t(steps * dim);
  for (std::size_t p = 0; p < steps; ++p)
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      t[p * dim + i] = i % 2 == 0 ? std::sin(static_cast<double>(p) * freq) : std::cos(static_cast<double>(p) * freq);
    }
  return t;
}

Forecaster::Forecaster(const ForecasterConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const std::size_t d = cfg_.d_model;
  embed_ = Linear(store_, "embed", kStateDim, d, rng);
  position_table_ = Tensor({cfg_.context_steps, d}, sinusoidal_table(cfg_.context_steps, d));
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    const std::string p = "encoder." + std::to_string(i);
    EncoderLayer l;
    l.norm_attn = LayerNorm(store_, p + ".norm_attn", d);
    l.qkv = Linear(store_, p + ".qkv", d, 3 * d, rng);
    l.attn_out = Linear(store_, p + ".attn_out", d, d, rng);
    l.norm_ff = LayerNorm(store_, p + ".norm_ff", d);
    l.ff_in = Linear(store_, p + ".ff_in", d, cfg_.ff_mult * d, rng);
    l.ff_out = Linear(store_, p + ".ff_out", cfg_.ff_mult * d, d, rng);
    encoder_.push_back(std::move(l));
  }
  final_norm_ = LayerNorm(store_, "final_norm", d);
  latent_ = Linear(store_, "latent", d, cfg_.d_latent, rng);
  if (cfg_.variant == ForecastVariant::kVariational) {
    logvar_ = Linear(store_, "logvar", d, cfg_.d_latent, rng);
  }
  if (cfg_.variant != ForecastVariant::kAutoregressive) {
    field_ = Mlp(store_, "field", mlp_widths(cfg_.d_latent, cfg_.field_hidden, cfg_.field_layers, cfg_.d_latent),
                 Activation::kTanh, rng);
  }
  decoder_ = Mlp(store_, "decoder",
                 mlp_widths(cfg_.d_latent, cfg_.decoder_hidden, cfg_.decoder_layers, kStateDim), Activation::kRelu,
                 rng);
  if (cfg_.variant == ForecastVariant::kAutoregressive) {
    // Identity-copy start: each step initially repeats the last context row.
    zero_fill(decoder_.layers.back().weight);
  }
}

void Forecaster::check_context(const Tensor& context) const {
  const Shape& s = context.shape();
  if (s.size() != 3 || s[1] != cfg_.context_steps || s[2] != kStateDim)
    throw ShapeError("Forecaster: context must be [B, " + std::to_string(cfg_.context_steps) + ", " +
                     std::to_string(kStateDim) + "], got " + shape_str(s));
}

Tensor Forecaster::attention(const EncoderLayer& l, const Tensor& x) const {
  const std::size_t d = cfg_.d_model;
  const std::size_t dh = d / cfg_.heads;
  const Tensor qkv = l.qkv(x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(cfg_.heads);
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const Tensor q = slice(qkv, 2, h * dh, dh);
    const Tensor k = slice(qkv, 2, d + h * dh, dh);
    const Tensor v = slice(qkv, 2, 2 * d + h * dh, dh);
    const Tensor weights = softmax(matmul(q, transpose(k)) * scale);
    heads.push_back(matmul(weights, v));
  }
  return l.attn_out(concat(heads, 2));
}

Tensor Forecaster::encode_features(const Tensor& context) const {
  check_context(context);
  Tensor h = embed_(context) + position_table_;
  for (const auto& l : encoder_) {
    h = h + attention(l, l.norm_attn(h));
    h = h + l.ff_out(relu(l.ff_in(l.norm_ff(h))));
  }
  return mean_axis(final_norm_(h), 1);
}

Tensor Forecaster::encode(const Tensor& context) const { return latent_(encode_features(context)); }

LatentGaussian Forecaster::encode_variational(const Tensor& context) const {
  if (cfg_.variant != ForecastVariant::kVariational)
    throw std::logic_error("Forecaster::encode_variational: model was built without the variational head");
  const Tensor f = encode_features(context);
  return {latent_(f), logvar_(f)};
}

Tensor Forecaster::sample_latent(const LatentGaussian& q, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> eps(q.mean.numel());
  for (auto& e : eps) e = n(rng);
  return q.mean + exp(q.logvar * 0.5) * Tensor(q.mean.shape(), std::move(eps));
}

Tensor Forecaster::field(const Tensor& z) const {
  if (cfg_.variant == ForecastVariant::kAutoregressive)
    throw std::logic_error("Forecaster::field: the autoregressive variant has no latent ODE");
  return field_(z);
}

Tensor Forecaster::decode(const Tensor& z) const { return decoder_(z); }

ForecastResult Forecaster::forecast_from_latent(const Tensor& z0, double t_end, std::span<const double> times) const {
  if (times.empty()) throw std::invalid_argument("Forecaster::forecast: no output times");
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!(times[j] >= t_end) || (j > 0 && !(times[j] > times[j - 1]))) {
      std::ostringstream os;
      os << "Forecaster::forecast: output times must be strictly increasing and not before the context end " << t_end;
      throw std::invalid_argument(os.str());
    }
  }
  ForecastResult r;
  r.z0 = z0;
  r.times.assign(times.begin(), times.end());
  const VectorField f = [this](double, const Tensor& z) { return field(z); };
  r.latents = integrate(f, z0, t_end, times, cfg_.solver);
  const std::size_t b = z0.dim(0);
  r.states = reshape(decode(concat(r.latents, 0)), {times.size(), b, kStateDim});
  return r;
}

ForecastResult Forecaster::forecast(const Tensor& context, double t_end, std::span<const double> times) const {
  return forecast_from_latent(encode(context), t_end, times);
}

Tensor Forecaster::forecast_autoregressive(const Tensor& context, std::size_t n_steps) const {
  check_context(context);
  if (n_steps == 0) throw std::invalid_argument("Forecaster::forecast_autoregressive: n_steps must be >= 1");
  const std::size_t b = context.dim(0), n = cfg_.context_steps;
  Tensor window = context;
  std::vector<Tensor> outputs;
  outputs.reserve(n_steps);
  for (std::size_t s = 0; s < n_steps; ++s) {
    const Tensor last = reshape(slice(window, 1, n - 1, 1), {b, kStateDim});
    const Tensor next = last + decode(encode(window));
    const Tensor row = reshape(next, {b, 1, kStateDim});
    outputs.push_back(reshape(next, {1, b, kStateDim}));
    if (s + 1 < n_steps && n == 1) {
      window = row;
    } else if (s + 1 < n_steps) {
      const std::array<Tensor, 2> parts{slice(window, 1, 1, n - 1), row};
      window = concat(parts, 1);
    }
  }
  return concat(outputs, 0);
}

Tensor pack_context(const ContextBatch& ctx, const PositionNormalizer& norm) {
  const std::size_t n = ctx.times.size();
  if (ctx.states.size() != ctx.gaussians * n * kStateDim)
    throw ShapeError("pack_context: context states do not match M x N_c x 10");
  std::vector<double> data = ctx.states;
  norm.apply(data);
  return Tensor({ctx.gaussians, n, kStateDim}, std::move(data));
}

TrajectorySet extrapolate(const Forecaster& model, const PositionNormalizer& norm, const ContextBatch& ctx,
                          std::span<const double> times) {
  RecordScope off(nullptr);
  const Tensor all = pack_context(ctx, norm);
  const std::size_t m = ctx.gaussians, nt = times.size();
  TrajectorySet out(m, std::vector<double>(times.begin(), times.end()));
  std::vector<std::vector<StateVec>> frames(nt, std::vector<StateVec>(m));
  for (std::size_t start = 0; start < m; start += kInferenceChunk) {
    const std::size_t b = std::min(kInferenceChunk, m - start);
    const Tensor context = slice(all, 0, start, b);
    const Tensor states = model.config().variant == ForecastVariant::kAutoregressive
                              ? model.forecast_autoregressive(context, nt)
                              : model.forecast(context, ctx.times.back(), times).states;
    std::vector<double> flat(states.data().begin(), states.data().end());
    norm.invert(flat);
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t k = 0; k < b; ++k)
        std::copy_n(flat.begin() + (j * b + k) * kStateDim, kStateDim, frames[j][start + k].begin());
  }
  for (std::size_t j = 0; j < nt; ++j) out.set_frame(j, frames[j]);
  return out;
}

void save_forecaster(const std::filesystem::path& path, const Forecaster& model, const PositionNormalizer& norm,
                     const nlohmann::json& extra) {
  const nlohmann::json meta = {
      {"kind", "forecaster"},
      {"config", to_json(model.config())},
      {"normalizer", {{"center", {norm.center[0], norm.center[1], norm.center[2]}}, {"scale", norm.scale}}},
      {"extra", extra}};
  write_checkpoint(path, model.params(), meta.dump());
}

LoadedForecaster load_forecaster(const std::filesystem::path& path) {
  const CheckpointData ckpt = read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("load_forecaster: bad metadata in " + path.string() + ": " + e.what());
  }
  if (meta.value("kind", "") != "forecaster")
    throw CheckpointError("load_forecaster: " + path.string() + " is not a forecaster checkpoint");
  LoadedForecaster out{Forecaster(forecaster_config_from_json(meta.at("config"))), {}, meta.value("extra", nlohmann::json::object())};
  load_into(ckpt, out.model.params());
  const auto& n = meta.at("normalizer");
  out.normalizer.center = Vec3(n.at("center")[0], n.at("center")[1], n.at("center")[2]);
  out.normalizer.scale = n.at("scale");
  return out;
}

}  // namespace odegs
