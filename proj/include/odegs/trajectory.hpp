#pragma once

// Per-Gaussian, time-indexed sequences of 10-dim Gaussian states.
//
// Binary layout (little-endian): "OGTJ" | version u32 | M u32 | T u32 |
// timestamps f64 x T | params f32 x (M x T x 10), row-major.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "odegs/gaussian.hpp"

namespace odegs {

inline constexpr std::uint32_t kTrajectoryVersion = 1;

class TrajectorySet {
 public:
  TrajectorySet() = default;
  TrajectorySet(std::size_t gaussians, std::vector<double> times);

  std::size_t gaussians() const { return m_; }
  std::size_t steps() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }

  std::span<double> state(std::size_t k, std::size_t j);
  std::span<const double> state(std::size_t k, std::size_t j) const;
  StateVec state_vec(std::size_t k, std::size_t j) const;
  std::vector<StateVec> frame(std::size_t j) const;
  void set_frame(std::size_t j, const std::vector<StateVec>& states);

  // Piecewise-linear interpolation in time, clamped to the stored range.
  StateVec sample(std::size_t k, double t) const;

  const std::vector<double>& raw() const { return params_; }

 private:
  std::size_t m_ = 0;
  std::vector<double> times_;
  std::vector<double> params_;
};

TrajectorySet analytic_trajectories(const SceneSpec& spec, const std::vector<double>& times);

void write_trajectories(const std::filesystem::path& path, const TrajectorySet& set);
TrajectorySet read_trajectories(const std::filesystem::path& path);

}  // namespace odegs
