#include "odegs/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace odegs {

namespace {

void check_steps(const Tensor& x, std::span<const double> times, const char* who) {
  if (x.rank() != 3 || x.dim(0) != times.size())
    throw ShapeError(std::string(who) + ": expected [N, B, C] with N = " + std::to_string(times.size()) + ", got " +
                     shape_str(x.shape()));
}

// Per-step inverse spacings broadcast over [n, B, C].
Tensor inverse_spacing(std::span<const double> times, std::size_t n, std::size_t b, std::size_t c) {
  std::vector<double> w(n * b * c);
  for (std::size_t j = 0; j < n; ++j)
    std::fill_n(w.begin() + j * b * c, b * c, 1.0 / (times[j + 1] - times[j]));
  return Tensor({n, b, c}, std::move(w));
}

// Forward differences along axis 0 divided by the matching time spacing.
Tensor finite_difference(const Tensor& x, std::span<const double> times) {
  const std::size_t n = x.dim(0) - 1;
  const Tensor d = slice(x, 0, 1, n) - slice(x, 0, 0, n);
  return d * inverse_spacing(times, n, x.dim(1), x.dim(2));
}

bool all_finite(const StepMetrics& m) {
  return std::isfinite(m.total) && std::isfinite(m.loss_e) && std::isfinite(m.reg_latent) &&
         std::isfinite(m.reg_traj) && std::isfinite(m.kl);
}

struct Chunk {
  std::size_t group;
  std::vector<std::size_t> gaussians;
};

}  // namespace

void LossConfig::validate() const {
  if (lambda_latent < 0.0 || lambda_traj < 0.0) throw std::invalid_argument("LossConfig: lambdas must be >= 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("LossConfig: temperature must be > 0");
  if (!(loss_init > loss_end)) throw std::invalid_argument("LossConfig: loss_init must exceed loss_end");
  if (ema_decay < 0.0 || ema_decay >= 1.0) throw std::invalid_argument("LossConfig: ema_decay must be in [0, 1)");
  if (!(likelihood_sigma > 0.0)) throw std::invalid_argument("LossConfig: likelihood_sigma must be > 0");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max)
    throw std::invalid_argument("TrainConfig: need 0 <= lr_min <= lr_max, lr_max > 0");
}

Tensor loss_extrapolation(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("loss_extrapolation: shapes differ: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  if (pred.rank() != 3) throw ShapeError("loss_extrapolation: expected [N, B, C], got " + shape_str(pred.shape()));
  return sum(abs(pred - target)) * (1.0 / static_cast<double>(pred.dim(0) * pred.dim(1)));
}

Tensor reg_latent(const Tensor& field_values, std::span<const double> times) {
  check_steps(field_values, times, "reg_latent");
  const std::size_t n = times.size();
  if (n < 2) return Tensor({1}, 0.0);
  const Tensor rate = finite_difference(field_values, times);
  return sum(square(rate)) * (1.0 / static_cast<double>((n - 1) * field_values.dim(1)));
}

Tensor reg_traj(const Tensor& positions, std::span<const double> times) {
  check_steps(positions, times, "reg_traj");
  const std::size_t n = times.size();
  if (n < 3) return Tensor({1}, 0.0);
  const Tensor velocity = finite_difference(positions, times);
  // Acceleration j uses the spacing that follows t_j, i.e. the first n-2 spacings.
  const Tensor accel = finite_difference(velocity, times.first(n - 1));
  return sum(square(accel)) * (1.0 / static_cast<double>(positions.dim(1) * n));
}

double adaptive_scale(double loss_ema, const LossConfig& cfg) {
  const double r = std::clamp((loss_ema - cfg.loss_end) / (cfg.loss_init - cfg.loss_end), 0.0, 1.0);
  return std::exp(-r / cfg.temperature);
}

double update_ema(double prev, double current, double decay) { return decay * prev + (1.0 - decay) * current; }

Tensor kl_to_standard_normal(const Tensor& mean, const Tensor& logvar) {
  if (mean.shape() != logvar.shape() || mean.rank() != 2)
    throw ShapeError("kl_to_standard_normal: expected matching [B, d] tensors");
  const Tensor terms = square(mean) + exp(logvar) - logvar - 1.0;
  return sum(terms) * (0.5 / static_cast<double>(mean.dim(0)));
}

Tensor gaussian_nll(const Tensor& pred, const Tensor& target, double sigma) {
  if (pred.shape() != target.shape() || pred.rank() != 3)
    throw ShapeError("gaussian_nll: expected matching [N, B, C] tensors");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_nll: sigma must be > 0");
  const double n = static_cast<double>(pred.dim(0)), b = static_cast<double>(pred.dim(1));
  const double c = static_cast<double>(pred.dim(2));
  const double constant = n * 0.5 * c * std::log(2.0 * std::numbers::pi * sigma * sigma);
  return sum(square(pred - target)) * (1.0 / (2.0 * sigma * sigma * b)) + constant;
}

std::pair<Tensor, Tensor> pack_batch(const SampleDataset& ds, std::size_t group, std::span<const std::size_t> gaussians,
                                     const PositionNormalizer& norm) {
  if (group >= ds.groups.size()) throw std::out_of_range("pack_batch: group index out of range");
  const SampleGroup& g = ds.groups[group];
  const std::size_t nc = ds.config.context_steps, ne = ds.config.target_steps, b = gaussians.size();
  std::vector<double> context(b * nc * kStateDim), target(ne * b * kStateDim);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t k = gaussians[i];
    if (k >= ds.gaussians) throw std::out_of_range("pack_batch: Gaussian index out of range");
    std::copy_n(g.context.begin() + k * nc * kStateDim, nc * kStateDim, context.begin() + i * nc * kStateDim);
    for (std::size_t j = 0; j < ne; ++j)
      std::copy_n(g.target.begin() + (k * ne + j) * kStateDim, kStateDim, target.begin() + (j * b + i) * kStateDim);
  }
  norm.apply(context);
  norm.apply(target);
  return {Tensor({b, nc, kStateDim}, std::move(context)), Tensor({ne, b, kStateDim}, std::move(target))};
}

BatchTerms batch_terms(const Forecaster& model, const Tensor& context, const Tensor& target, double t_end,
                       std::span<const double> target_times, const LossConfig& cfg, Rng& rng) {
  const ForecastVariant variant = model.config().variant;
  BatchTerms out;
  StepMetrics& m = out.parts;

  Tensor states;
  Tensor data_term;
  Tensor reg_lat({1}, 0.0);
  if (variant == ForecastVariant::kAutoregressive) {
    states = model.forecast_autoregressive(context, target_times.size());
    data_term = loss_extrapolation(states, target);
  } else {
    ForecastResult r;
    if (variant == ForecastVariant::kVariational) {
      const LatentGaussian q = model.encode_variational(context);
      r = model.forecast_from_latent(Forecaster::sample_latent(q, rng), t_end, target_times);
      const Tensor kl = kl_to_standard_normal(q.mean, q.logvar);
      data_term = gaussian_nll(r.states, target, cfg.likelihood_sigma) + kl;
      m.kl = kl.item();
    } else {
      r = model.forecast_from_latent(model.encode(context), t_end, target_times);
      data_term = loss_extrapolation(r.states, target);
    }
    states = r.states;
    if (cfg.lambda_latent > 0.0) {
      const std::size_t b = context.dim(0);
      const Tensor fv = model.field(concat(r.latents, 0));
      reg_lat = reg_latent(reshape(fv, {target_times.size(), b, model.config().d_latent}), target_times);
    }
  }
  Tensor reg_tr({1}, 0.0);
  if (cfg.lambda_traj > 0.0) reg_tr = reg_traj(slice(states, 2, 0, 3), target_times);

  if (variant == ForecastVariant::kVariational) {
    RecordScope off(nullptr);
    m.loss_e = loss_extrapolation(states, target).item();
  } else {
    m.loss_e = data_term.item();
  }
  m.reg_latent = reg_lat.item();
  m.reg_traj = reg_tr.item();
  out.data = data_term;
  out.reg_latent = reg_lat;
  out.reg_traj = reg_tr;
  return out;
}

Tensor total_loss(BatchTerms& terms, const LossConfig& cfg, double scale) {
  Tensor total = terms.data + (terms.reg_latent * (scale * cfg.lambda_latent) + terms.reg_traj * (scale * cfg.lambda_traj));
  terms.parts.scale = scale;
  terms.parts.total = total.item();
  return total;
}

TrainResult train_forecaster(Forecaster& model, const SampleDataset& ds, const PositionNormalizer& norm,
                             const TrainConfig& train, const LossConfig& loss) {
  train.validate();
  loss.validate();
  if (ds.size() == 0) throw std::invalid_argument("train_forecaster: empty dataset");
  if (ds.config.context_steps != model.config().context_steps)
    throw std::invalid_argument("train_forecaster: dataset context_steps " + std::to_string(ds.config.context_steps) +
                                " does not match the model's " + std::to_string(model.config().context_steps));

  if (!train.checkpoint.empty() && train.checkpoint.has_parent_path())
    std::filesystem::create_directories(train.checkpoint.parent_path());

  Rng rng(train.seed);
  Adam opt(model.params(), train.adam);
  const std::size_t chunks_per_group = (ds.gaussians + train.batch_size - 1) / train.batch_size;
  const std::size_t per_epoch = chunks_per_group * ds.groups.size();
  const auto total_steps = static_cast<std::int64_t>(per_epoch * train.epochs);

  std::vector<std::size_t> order(ds.gaussians);
  TrainResult result;
  std::vector<double> last_good = model.params().snapshot();
  double ema = 0.0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    // Batches never mix start times, so a batch shares one set of timestamps.
    std::vector<Chunk> chunks;
    chunks.reserve(per_epoch);
    for (std::size_t g = 0; g < ds.groups.size(); ++g) {
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < order.size(); s += train.batch_size) {
        const std::size_t n = std::min(train.batch_size, order.size() - s);
        chunks.push_back({g, std::vector<std::size_t>(order.begin() + s, order.begin() + s + n)});
      }
    }
    std::shuffle(chunks.begin(), chunks.end(), rng);

    double epoch_sum = 0.0;
    for (const Chunk& c : chunks) {
      const SampleGroup& g = ds.groups[c.group];
      const auto [context, target] = pack_batch(ds, c.group, c.gaussians, norm);
      GradRecord rec;
      RecordScope scope(&rec);

      BatchTerms bt = batch_terms(model, context, target, g.times.context.back(), g.times.target, loss, rng);
      ema = step == 0 ? bt.parts.loss_e : update_ema(ema, bt.parts.loss_e, loss.ema_decay);
      const Tensor total = total_loss(bt, loss, adaptive_scale(ema, loss));
      StepMetrics& m = bt.parts;
      m.step = step;
      m.epoch = epoch;
      m.lr = cosine_lr(static_cast<std::int64_t>(step), total_steps, train.lr_max, train.lr_min);

      if (!all_finite(m)) {
        model.params().restore(last_good);
        if (!train.checkpoint.empty()) save_forecaster(train.checkpoint, model, norm, {{"epoch", epoch}, {"aborted", true}});
        if (!train.metrics_csv.empty()) write_metrics_csv(train.metrics_csv, result.steps);
        std::ostringstream os;
        os << "train_forecaster: non-finite loss at epoch " << epoch << ", step " << step << " (L_e " << m.loss_e
           << ", R_latent " << m.reg_latent << ", R_traj " << m.reg_traj << ", KL " << m.kl << ", total " << m.total
           << "); parameters restored to the end of epoch " << (epoch == 0 ? std::string("-1 (initial)") : std::to_string(epoch - 1));
        throw TrainingError(os.str());
      }

      model.params().zero_grad();
      rec.backward(total);
      opt.step(m.lr);
      epoch_sum += m.loss_e * static_cast<double>(c.gaussians.size());
      result.steps.push_back(m);
      ++step;
    }
    result.epoch_loss_e.push_back(epoch_sum / static_cast<double>(ds.size()));
    last_good = model.params().snapshot();
    if (!train.checkpoint.empty())
      save_forecaster(train.checkpoint, model, norm, {{"epoch", epoch}, {"loss_e", result.epoch_loss_e.back()}});
    if (!train.metrics_csv.empty()) write_metrics_csv(train.metrics_csv, result.steps);
  }
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const StepMetrics> steps) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_metrics_csv: cannot write " + path.string());
  os << "step,epoch,loss_e,reg_latent,reg_traj,kl,s_t,lr,total\n";
  char line[512];
  for (const auto& m : steps) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.step, m.epoch, m.loss_e,
                  m.reg_latent, m.reg_traj, m.kl, m.scale, m.lr, m.total);
    os << line;
  }
}

}  // namespace odegs
