#pragma once

// Canonical Gaussians plus a time-conditioned deformation MLP, fitted to
// observed trajectories and then frozen as the in-window trajectory source.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "odegs/gaussian.hpp"
#include "odegs/nn.hpp"
#include "odegs/trajectory.hpp"

namespace odegs {

struct InterpConfig {
  std::size_t time_octaves = 6;
  std::size_t space_octaves = 4;
  std::size_t hidden = 128;
  std::size_t hidden_layers = 3;
  std::size_t epochs = 300;
  std::size_t batch_frames = 1;
  double lr_max = 3e-3;
  double lr_min = 1e-5;
  double target_l1 = 0.0;  // stop early once an epoch's mean L1 falls below this
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_width() const { return 1 + 2 * time_octaves + 3 * (1 + 2 * space_octaves); }
};

struct InterpTrainLog {
  std::vector<double> epoch_l1;  // mean absolute error per parameter entry
};

// x -> [x, sin(2^i x), cos(2^i x) for i < octaves] along the last axis.
// Time is mapped to [0, 1] over the observed window before encoding.
Tensor frequency_encode(const Tensor& x, std::size_t octaves);

class InterpModel {
 public:
  InterpModel(const InterpConfig& cfg, std::span<const StateVec> canonical, double t_min, double t_max);

  std::size_t gaussians() const { return m_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  const InterpConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  // Recorded forward pass; row j*M + k holds Gaussian k at times[j].
  Tensor forward(std::span<const double> times) const;

  // States at t. Times outside [t_min, t_max] throw std::out_of_range unless
  // allow_out_of_window is set (used only to reproduce the timestamp baseline).
  std::vector<StateVec> query(double t, bool allow_out_of_window = false) const;
  TrajectorySet query(std::span<const double> times, bool allow_out_of_window = false) const;

 private:
  void check_time(double t, bool allow) const;

  InterpConfig cfg_;
  std::size_t m_;
  double t_min_, t_max_;
  ParamStore store_;
  Tensor canonical_;
  Mlp deform_;
  bool frozen_ = false;
};

// Fits the model to `truth` by L1 regression; the result is frozen unless
// cfg.epochs == 0.
InterpModel train_interp(const TrajectorySet& truth, const InterpConfig& cfg, InterpTrainLog* log = nullptr);

void save_interp(const std::filesystem::path& path, const InterpModel& model);
InterpModel load_interp(const std::filesystem::path& path);

}  // namespace odegs
