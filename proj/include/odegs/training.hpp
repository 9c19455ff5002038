#pragma once

// Forecaster objective and training loop. Tensors follow the forecaster's
// [N_steps, B, channels] layout.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "odegs/forecaster.hpp"
#include "odegs/nn.hpp"
#include "odegs/sampling.hpp"

namespace odegs {

struct LossConfig {
  double lambda_latent = 1e-5;
  double lambda_traj = 1e-1;
  double temperature = 0.5;  // tau in the regularizer weight exp(-r / tau)
  double loss_init = 0.02;
  double loss_end = 0.0;
  double ema_decay = 0.9;
  double likelihood_sigma = 0.05;  // variational decoder noise

  void validate() const;
};

// mean over batch of (1/N) sum_j ||pred_j - target_j||_1.
Tensor loss_extrapolation(const Tensor& pred, const Tensor& target);

// field_values[j] = f(z(t_j)), shape [N, B, d]. Mean over batch of
// (1/(N-1)) sum_j ||(f_{j+1} - f_j) / dt_j||^2; zero when N < 2.
Tensor reg_latent(const Tensor& field_values, std::span<const double> times);

// positions [N, M, 3]. Velocities v_j = (mu_{j+1} - mu_j) / dt_j, then
// (1/(M N)) sum_k sum_j ||(v_{j+1} - v_j) / dt_j||^2 over the N-2 velocity
// differences; zero when N < 3.
Tensor reg_traj(const Tensor& positions, std::span<const double> times);

double adaptive_scale(double loss_ema, const LossConfig& cfg);
double update_ema(double prev, double current, double decay);

// Diagonal Gaussian KL to N(0, I), summed over latent dims, mean over batch.
Tensor kl_to_standard_normal(const Tensor& mean, const Tensor& logvar);
// sum_j [||target_j - pred_j||^2 / (2 sigma^2) + (C/2) log(2 pi sigma^2)],
// mean over batch; C is the channel count.
Tensor gaussian_nll(const Tensor& pred, const Tensor& target, double sigma);

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 512;
  double lr_max = 1e-3;
  double lr_min = 1e-6;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;   // written after every epoch when set
  std::filesystem::path metrics_csv;  // per-step log when set

  void validate() const;
};

struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss_e = 0.0;
  double reg_latent = 0.0;
  double reg_traj = 0.0;
  double kl = 0.0;
  double scale = 1.0;  // s_t
  double lr = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<StepMetrics> steps;
  std::vector<double> epoch_loss_e;  // sample-weighted mean L_e per epoch
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss terms of one mini-batch; the batch shares the sample group's
// timestamps. `data` is L_e, or NLL + KL for the variational variant.
struct BatchTerms {
  Tensor data;
  Tensor reg_latent;
  Tensor reg_traj;
  StepMetrics parts;  // values of the terms; scale and total unset
};

BatchTerms batch_terms(const Forecaster& model, const Tensor& context, const Tensor& target, double t_end,
                       std::span<const double> target_times, const LossConfig& cfg, Rng& rng);

// data + scale * (lambda_latent R_latent + lambda_traj R_traj); scale is a constant.
Tensor total_loss(BatchTerms& terms, const LossConfig& cfg, double scale);

// Packs a subset of one group's samples: context [B, N_c, 10] and
// target [N_e, B, 10], both normalized.
std::pair<Tensor, Tensor> pack_batch(const SampleDataset& ds, std::size_t group, std::span<const std::size_t> gaussians,
                                     const PositionNormalizer& norm);

TrainResult train_forecaster(Forecaster& model, const SampleDataset& ds, const PositionNormalizer& norm,
                             const TrainConfig& train, const LossConfig& loss);

void write_metrics_csv(const std::filesystem::path& path, std::span<const StepMetrics> steps);

}  // namespace odegs
