#include "odegs/interp.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "odegs/checkpoint.hpp"

namespace odegs {

namespace {

constexpr std::size_t kQueryChunk = 32;

Tensor tile_rows(const Tensor& x, std::size_t copies) {
  if (copies == 1) return x;
  const std::vector<Tensor> parts(copies, x);
  return concat(parts, 0);
}

}  // namespace

void InterpConfig::validate() const {
  if (hidden == 0 || hidden_layers == 0) throw std::invalid_argument("InterpConfig: hidden width and depth must be > 0");
  if (batch_frames == 0) throw std::invalid_argument("InterpConfig: batch_frames must be > 0");
  if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max)
    throw std::invalid_argument("InterpConfig: need 0 <= lr_min <= lr_max, lr_max > 0");
}

Tensor frequency_encode(const Tensor& x, std::size_t octaves) {
  std::vector<Tensor> parts{x};
  for (std::size_t i = 0; i < octaves; ++i) {
    const Tensor scaled = x * std::ldexp(1.0, static_cast<int>(i));
    parts.push_back(sin(scaled));
    parts.push_back(cos(scaled));
  }
  return concat(parts, static_cast<int>(x.rank()) - 1);
}

InterpModel::InterpModel(const InterpConfig& cfg, std::span<const StateVec> canonical, double t_min, double t_max)
    : cfg_(cfg), m_(canonical.size()), t_min_(t_min), t_max_(t_max) {
  cfg_.validate();
  if (m_ == 0) throw std::invalid_argument("InterpModel: need at least one Gaussian");
  if (!(t_max > t_min)) throw std::invalid_argument("InterpModel: degenerate time window");
  std::vector<double> init;
  init.reserve(m_ * kStateDim);
  for (const auto& s : canonical) init.insert(init.end(), s.begin(), s.end());
  canonical_ = store_.add("canonical", {m_, kStateDim}, std::move(init));

  Rng rng(cfg_.seed);
  std::vector<std::size_t> widths{cfg_.input_width()};
  for (std::size_t i = 0; i < cfg_.hidden_layers; ++i) widths.push_back(cfg_.hidden);
  widths.push_back(kStateDim);
  deform_ = Mlp(store_, "deform", widths, Activation::kRelu, rng);
  // Zero offsets at initialization: the model starts as the canonical set.
  auto& out = deform_.layers.back().weight;
  std::fill(out.mutable_data().begin(), out.mutable_data().end(), 0.0);
}

Tensor InterpModel::forward(std::span<const double> times) const {
  const double span = t_max_ - t_min_;
  std::vector<double> tn(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) tn[j] = (times[j] - t_min_) / span;

  // Time features are constants; build them without recording.
  Tensor time_feat;
  {
    RecordScope off(nullptr);
    const Tensor enc = frequency_encode(Tensor({times.size(), 1}, tn), cfg_.time_octaves);
    const std::size_t w = enc.dim(1);
    std::vector<double> rows(times.size() * m_ * w);
    for (std::size_t j = 0; j < times.size(); ++j)
      for (std::size_t k = 0; k < m_; ++k)
        std::copy_n(enc.data().begin() + j * w, w, rows.begin() + (j * m_ + k) * w);
    time_feat = Tensor({times.size() * m_, w}, std::move(rows));
  }
  const Tensor mu = slice(canonical_, 1, 0, 3);
  const Tensor space_feat = tile_rows(frequency_encode(mu, cfg_.space_octaves), times.size());
  const std::array<Tensor, 2> feats{time_feat, space_feat};
  const Tensor offsets = deform_(concat(feats, 1));
  return offsets + tile_rows(canonical_, times.size());
}

void InterpModel::check_time(double t, bool allow) const {
  if (!std::isfinite(t)) throw std::invalid_argument("InterpModel::query: non-finite time");
  if (!frozen_) throw std::logic_error("InterpModel::query: model is not frozen");
  const double slack = 1e-12 * std::max(1.0, std::abs(t_max_ - t_min_));
  if (!allow && (t < t_min_ - slack || t > t_max_ + slack)) {
    std::ostringstream os;
    os << "InterpModel::query: t = " << t << " is outside the observed window [" << t_min_ << ", " << t_max_
       << "]; pass allow_out_of_window to evaluate the timestamp baseline";
    throw std::out_of_range(os.str());
  }
}

std::vector<StateVec> InterpModel::query(double t, bool allow_out_of_window) const {
  const double ts[] = {t};
  const TrajectorySet set = query(std::span<const double>(ts), allow_out_of_window);
  return set.frame(0);
}

TrajectorySet InterpModel::query(std::span<const double> times, bool allow_out_of_window) const {
  for (double t : times) check_time(t, allow_out_of_window);
  TrajectorySet out(m_, std::vector<double>(times.begin(), times.end()));
  RecordScope off(nullptr);
  for (std::size_t start = 0; start < times.size(); start += kQueryChunk) {
    const std::size_t n = std::min(kQueryChunk, times.size() - start);
    const Tensor states = forward(times.subspan(start, n));
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<StateVec> frame(m_);
      for (std::size_t k = 0; k < m_; ++k)
        std::copy_n(states.data().begin() + (j * m_ + k) * kStateDim, kStateDim, frame[k].begin());
      out.set_frame(start + j, frame);
    }
  }
  return out;
}

InterpModel train_interp(const TrajectorySet& truth, const InterpConfig& cfg, InterpTrainLog* log) {
  if (truth.steps() < 2) throw std::invalid_argument("train_interp: need at least two observed timestamps");
  const auto& times = truth.times();
  InterpModel model(cfg, truth.frame(0), times.front(), times.back());
  if (cfg.epochs == 0) return model;

  const std::size_t m = truth.gaussians();
  const std::size_t n_frames = truth.steps();
  const std::size_t per_epoch = (n_frames + cfg.batch_frames - 1) / cfg.batch_frames;
  const auto total = static_cast<std::int64_t>(per_epoch * cfg.epochs);
  Adam opt(model.params());
  Rng rng(cfg.seed ^ 0x5eed1e7aULL);
  std::vector<std::size_t> order(n_frames);
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t start = b * cfg.batch_frames;
      const std::size_t n = std::min(cfg.batch_frames, n_frames - start);
      std::vector<double> ts(n);
      std::vector<double> target(n * m * kStateDim);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t f = order[start + j];
        ts[j] = times[f];
        for (std::size_t k = 0; k < m; ++k) {
          const auto s = truth.state(k, f);
          std::copy(s.begin(), s.end(), target.begin() + (j * m + k) * kStateDim);
        }
      }
      GradRecord rec;
      RecordScope scope(&rec);
      const Tensor pred = model.forward(ts);
      const Tensor loss = mean(abs(pred - Tensor({n * m, kStateDim}, std::move(target))));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "train_interp: non-finite loss at epoch " << epoch << ", step " << step;
        throw std::runtime_error(os.str());
      }
      model.params().zero_grad();
      rec.backward(loss);
      opt.step(cosine_lr(step, total, cfg.lr_max, cfg.lr_min));
      ++step;
      epoch_sum += value * static_cast<double>(n);
    }
    const double epoch_l1 = epoch_sum / static_cast<double>(n_frames);
    if (log) log->epoch_l1.push_back(epoch_l1);
    if (epoch_l1 < cfg.target_l1) break;
  }
  model.freeze();
  return model;
}

void save_interp(const std::filesystem::path& path, const InterpModel& model) {
  const auto& c = model.config();
  const nlohmann::json meta = {{"kind", "interp"},
                               {"gaussians", model.gaussians()},
                               {"t_min", model.t_min()},
                               {"t_max", model.t_max()},
                               {"frozen", model.frozen()},
                               {"time_octaves", c.time_octaves},
                               {"space_octaves", c.space_octaves},
                               {"hidden", c.hidden},
                               {"hidden_layers", c.hidden_layers},
                               {"seed", c.seed}};
  write_checkpoint(path, model.params(), meta.dump());
}

InterpModel load_interp(const std::filesystem::path& path) {
  const CheckpointData ckpt = read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("load_interp: bad metadata in " + path.string() + ": " + e.what());
  }
  if (meta.value("kind", "") != "interp") throw CheckpointError("load_interp: " + path.string() + " is not an interpolation checkpoint");
  InterpConfig c;
  c.time_octaves = meta.at("time_octaves");
  c.space_octaves = meta.at("space_octaves");
  c.hidden = meta.at("hidden");
  c.hidden_layers = meta.at("hidden_layers");
  c.seed = meta.at("seed");
  const std::vector<StateVec> placeholder(meta.at("gaussians").get<std::size_t>());
  InterpModel model(c, placeholder, meta.at("t_min"), meta.at("t_max"));
  load_into(ckpt, model.params());
  if (meta.at("frozen").get<bool>()) model.freeze();
  return model;
}

}  // namespace odegs
