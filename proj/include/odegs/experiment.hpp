#pragma once

// End-to-end pipeline pieces shared by the command-line tool and the
// acceptance harness: run configuration, frame evaluation, error summaries,
// result files and the multi-variant experiment runner.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "odegs/forecaster.hpp"
#include "odegs/interp.hpp"
#include "odegs/sampling.hpp"
#include "odegs/scene_gen.hpp"
#include "odegs/training.hpp"

namespace odegs {

// Thrown when an input file the caller depends on does not exist.
class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const std::filesystem::path& path, const std::string& what = "required file");
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void require_file(const std::filesystem::path& path, const std::string& what = "required file");

inline constexpr const char* kTimestampBaseline = "timestamp-baseline";
inline constexpr const char* kFreezeBaseline = "freeze-last-frame";

struct RunConfig {
  std::string preset = "circular";
  PresetOptions scene;
  std::size_t frames = 50;
  double split = 0.8;
  InterpConfig interp;
  bool analytic_source = false;  // sample training pairs from closed-form states
  SamplerConfig sampler;
  ForecasterConfig model;
  TrainConfig train;
  LossConfig loss;
  std::uint64_t seed = 0;  // propagated to every stage by apply_seed()

  void apply_seed();
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
// Overlays the keys present in `j` onto `base`; unknown keys are errors.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

struct EvalRow {
  std::size_t frame_index = 0;
  double t = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::string variant;
};

// Renders `predicted` at every frame's timestamp with that frame's camera and
// scores it against the frame image; both sides are compared at 8-bit precision.
std::vector<EvalRow> evaluate_frames(const SceneSpec& spec, const TrajectorySet& predicted,
                                     std::span<const Frame> frames, const std::string& variant);

void write_eval_csv(const std::filesystem::path& path, std::span<const EvalRow> rows);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);

// PSNR and SSIM against time, one polyline per variant.
void write_metric_plot(const std::filesystem::path& path, std::span<const EvalRow> rows);

struct HorizonError {
  std::vector<double> step_l1;  // mean over Gaussians of |dx| + |dy| + |dz| per step
  double mean_l1 = 0.0;
  double end_l1 = 0.0;
};

HorizonError position_error(const TrajectorySet& predicted, const TrajectorySet& truth);

// Distance of each circularly moving Gaussian's center from its rotation
// axis; nullopt for other motions.
std::optional<double> orbit_radius(const SceneSpec& spec, std::size_t k);

// `states` repeated at every time.
TrajectorySet hold_states(std::span<const StateVec> states, std::span<const double> times);

struct VariantReport {
  std::string variant;
  HorizonError error;
  std::vector<EvalRow> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  TrainResult training;  // empty for the baselines
};

struct ExperimentReport {
  SceneSpec scene;
  std::vector<double> eval_times;
  double t_split = 0.0;
  double mean_orbit_radius = 0.0;  // 0 when no Gaussian moves on a circle
  std::vector<VariantReport> variants;

  const VariantReport& find(const std::string& variant) const;
};

// Variants: deterministic, variational, autoregressive, timestamp-baseline,
// freeze-last-frame. Artifacts go to `out_dir` when it is non-empty.
ExperimentReport run_experiment(const RunConfig& cfg, std::span<const std::string> variants,
                                const std::filesystem::path& out_dir);

void write_comparison_csv(const std::filesystem::path& path, const ExperimentReport& report);

// Frame index file written next to generated frames.
nlohmann::json frames_index(const GeneratedDataset& data);
void write_generated(const std::filesystem::path& dir, const SceneSpec& spec, const GeneratedDataset& data);

// Reads back what write_generated produced; frame images are loaded from disk.
struct StoredScene {
  SceneSpec spec;
  std::vector<Frame> frames;
  TrajectorySet truth;
  double t_split = 0.0;
};
StoredScene read_generated(const std::filesystem::path& dir);

}  // namespace odegs
