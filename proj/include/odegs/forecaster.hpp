#pragma once

// Context encoder (Transformer) -> latent initial state -> autonomous latent
// ODE -> decoder back to Gaussian parameters. Also the variational encoder
// head and the discrete autoregressive ablation.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "odegs/gaussian.hpp"
#include "odegs/nn.hpp"
#include "odegs/ode.hpp"
#include "odegs/sampling.hpp"

namespace odegs {

enum class ForecastVariant { kDeterministic, kVariational, kAutoregressive };

ForecastVariant forecast_variant_from_string(const std::string& s);
std::string to_string(ForecastVariant v);

struct ForecasterConfig {
  std::size_t context_steps = 30;
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t layers = 5;
  std::size_t ff_mult = 4;
  std::size_t d_latent = 64;
  std::size_t field_hidden = 64;
  std::size_t field_layers = 4;  // linear maps in the vector field
  std::size_t decoder_hidden = 128;
  std::size_t decoder_layers = 5;  // linear maps in the decoder
  ForecastVariant variant = ForecastVariant::kDeterministic;
  SolverConfig solver;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ForecasterConfig& c);
ForecasterConfig forecaster_config_from_json(const nlohmann::json& j);

struct LatentGaussian {
  Tensor mean;    // [B, d_latent]
  Tensor logvar;  // [B, d_latent]
};

struct ForecastResult {
  Tensor z0;                    // [B, d_latent]
  std::vector<double> times;    // output times
  std::vector<Tensor> latents;  // one [B, d_latent] per output time
  Tensor states;                // [N_out, B, 10]
};

class Forecaster {
 public:
  explicit Forecaster(const ForecasterConfig& cfg);
  // Layers hold handles into the parameter store, so copies would alias it.
  Forecaster(const Forecaster&) = delete;
  Forecaster& operator=(const Forecaster&) = delete;
  Forecaster(Forecaster&&) = default;
  Forecaster& operator=(Forecaster&&) = default;

  const ForecasterConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // context: [B, N_c, 10] -> pooled encoder features [B, d_model].
  Tensor encode_features(const Tensor& context) const;
  // Deterministic initial latent (the posterior mean for the variational head).
  Tensor encode(const Tensor& context) const;
  LatentGaussian encode_variational(const Tensor& context) const;
  // z0 = mean + exp(logvar / 2) * eps with eps ~ N(0, I).
  static Tensor sample_latent(const LatentGaussian& q, Rng& rng);

  Tensor field(const Tensor& z) const;
  Tensor decode(const Tensor& z) const;

  // Evolves z0 from t_end through `times` (strictly increasing, >= t_end; t_end itself decodes z0).
  ForecastResult forecast_from_latent(const Tensor& z0, double t_end, std::span<const double> times) const;
  ForecastResult forecast(const Tensor& context, double t_end, std::span<const double> times) const;

  // Discrete rollout: each step predicts last_row + decoder(encode(window)) and
  // slides it into the window. Returns [n_steps, B, 10].
  Tensor forecast_autoregressive(const Tensor& context, std::size_t n_steps) const;

 private:
  struct EncoderLayer {
    LayerNorm norm_attn, norm_ff;
    Linear qkv, attn_out, ff_in, ff_out;
  };

  Tensor attention(const EncoderLayer& l, const Tensor& x) const;
  void check_context(const Tensor& context) const;

  ForecasterConfig cfg_;
  ParamStore store_;
  Linear embed_;
  Tensor position_table_;  // [N_c, d_model], constant
  std::vector<EncoderLayer> encoder_;
  LayerNorm final_norm_;
  Linear latent_;
  Linear logvar_;  // variational variant only
  Mlp field_;
  Mlp decoder_;
};

// Sinusoidal table: even columns sin(p / 10000^(2i/d)), odd columns cos.
std::vector<double> sinusoidal_table(std::size_t steps, std::size_t dim);

// Packs per-Gaussian context windows into a normalized [M, N_c, 10] tensor.
Tensor pack_context(const ContextBatch& ctx, const PositionNormalizer& norm);

// Predicted states for every Gaussian at `times` (>= the context end), in
// scene units. The autoregressive variant rolls out one step per time.
TrajectorySet extrapolate(const Forecaster& model, const PositionNormalizer& norm, const ContextBatch& ctx,
                          std::span<const double> times);

void save_forecaster(const std::filesystem::path& path, const Forecaster& model, const PositionNormalizer& norm,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedForecaster {
  Forecaster model;
  PositionNormalizer normalizer;
  nlohmann::json metadata;
};
LoadedForecaster load_forecaster(const std::filesystem::path& path);

}  // namespace odegs
