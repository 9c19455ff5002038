#pragma once

// Context-prefix / target-suffix pairs cut from observed trajectories, plus
// the final observed context used at inference.

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "odegs/gaussian.hpp"
#include "odegs/trajectory.hpp"

namespace odegs {

class InterpModel;

struct SamplerConfig {
  std::size_t context_steps = 30;  // N_c
  std::size_t target_steps = 10;   // N_e
  double context_span = 0.6;       // T_c in scene time
  double t0_stride = 0.0;          // 0 means the context step
  double min_target_span = 0.0;    // 0 means the context step

  double context_step() const { return context_span / static_cast<double>(context_steps - 1); }
  double stride() const { return t0_stride > 0.0 ? t0_stride : context_step(); }
  double min_target() const { return min_target_span > 0.0 ? min_target_span : context_step(); }
  void validate(double t_min, double t_max) const;
};

struct SampleTimes {
  double t0 = 0.0;
  std::vector<double> context;  // t0 + i * dc, i = 0..N_c-1; last entry is exactly t0 + T_c
  std::vector<double> target;   // t_end + j * de, j = 1..N_e; last entry is exactly t_max
};

SampleTimes sample_times(double t0, double t_max, const SamplerConfig& cfg);

// Valid starting times: the stride grid from t_min up to
// t_max - T_c - min_target, with that largest value always included.
std::vector<double> start_times(double t_min, double t_max, const SamplerConfig& cfg);

// States at arbitrary strictly increasing times.
using TrajectorySource = std::function<TrajectorySet(std::span<const double>)>;

TrajectorySource source_from(const InterpModel& model);
TrajectorySource source_from(const SceneSpec& scene);  // analytic states (bypass mode)
TrajectorySource source_from(const TrajectorySet& set);  // piecewise-linear resampling

// All Gaussians share the times of a group; arrays are [M, steps, 10].
struct SampleGroup {
  SampleTimes times;
  std::vector<double> context;
  std::vector<double> target;
};

struct SamplePair {
  std::size_t gaussian = 0;
  double t0 = 0.0;
  std::span<const double> context_times;
  std::span<const double> target_times;
  std::span<const double> context;  // [N_c, 10]
  std::span<const double> target;   // [N_e, 10]
};

struct SampleDataset {
  std::size_t gaussians = 0;
  SamplerConfig config;
  std::vector<SampleGroup> groups;

  std::size_t size() const { return gaussians * groups.size(); }
  // Sample i belongs to group i / M and Gaussian i % M.
  SamplePair pair(std::size_t i) const;
};

SampleDataset build_dataset(const TrajectorySource& source, std::size_t gaussians, double t_min, double t_max,
                            const SamplerConfig& cfg);

struct ContextBatch {
  std::size_t gaussians = 0;
  std::vector<double> times;   // ends exactly at t_max
  std::vector<double> states;  // [M, N_c, 10]
};

ContextBatch final_context(const TrajectorySource& source, std::size_t gaussians, double t_min, double t_max,
                           const SamplerConfig& cfg);

// Writes samples.ogtj (one row per sample, N_c + N_e steps indexed 0..) and
// samples.json mapping each row to its Gaussian, t0 and real timestamps.
void write_dataset(const std::filesystem::path& dir, const SampleDataset& ds);

// Centers positions on a centroid and scales them to unit RMS radius;
// quaternion and log-scale channels pass through.
struct PositionNormalizer {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  static PositionNormalizer fit(std::span<const double> states);  // rows of 10
  void apply(std::span<double> states) const;
  void invert(std::span<double> states) const;
};

}  // namespace odegs
