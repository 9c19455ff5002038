#pragma once

// Synthetic dynamic scenes with closed-form trajectories and the frame
// datasets rendered from them.

#include <cstdint>
#include <string>
#include <vector>

#include "odegs/gaussian.hpp"
#include "odegs/raster.hpp"
#include "odegs/trajectory.hpp"

namespace odegs {

struct PresetOptions {
  std::size_t gaussians = 128;
  std::uint64_t seed = 0;
  double period = 1.25;  // orbit / oscillation period in scene time
  double t_min = 0.0;
  double t_max = 1.0;
  int resolution = 64;
  int cameras = 4;
};

// Presets: "circular", "linear", "harmonic", "mixed".
SceneSpec make_preset(const std::string& name, const PresetOptions& opts);
const std::vector<std::string>& preset_names();

struct Frame {
  std::size_t index = 0;
  double t = 0.0;
  bool train = true;
  std::size_t camera = 0;
  Image image;
};

struct GeneratedDataset {
  std::vector<Frame> frames;  // train frames first, timestamps increasing
  TrajectorySet truth;        // analytic states at every frame timestamp
  std::size_t n_train = 0;
  double t_split = 0.0;  // end of the observed window
};

struct FrameSchedule {
  std::vector<double> train;
  std::vector<double> eval;
  double t_split = 0.0;
};

// Train timestamps are uniform on [t_min, t_split] with
// t_split = split * t_max + (1 - split) * t_min; eval timestamps are uniform
// on (t_split, t_max].
FrameSchedule frame_schedule(double t_min, double t_max, std::size_t n_frames, double split);

GeneratedDataset generate_dataset(const SceneSpec& spec, std::size_t n_frames, double split);

}  // namespace odegs
