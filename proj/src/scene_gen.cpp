#include "odegs/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace odegs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec4 random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec4 q(n(rng), n(rng), n(rng), n(rng));
  q = quat_normalize(q);
  if (q[0] < 0) q = -q;
  return q;
}

CanonicalGaussian random_appearance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CanonicalGaussian g;
  g.q = random_quat(rng);
  for (int i = 0; i < 3; ++i) g.log_scale[i] = std::log(0.04 + 0.04 * u(rng));
  const double opacity = 0.6 + 0.35 * u(rng);
  g.opacity_logit = std::log(opacity / (1.0 - opacity));
  // Bright, saturated colors so motion shows up in the metrics.
  const double hue = u(rng);
  for (int c = 0; c < 3; ++c) g.color[c] = 0.25 + 0.75 * std::abs(std::sin(std::numbers::pi * (hue + c / 3.0)));
  return g;
}

std::vector<Camera> ring_cameras(int count, int resolution) {
  std::vector<Camera> cams;
  const double elevation = 35.0 * std::numbers::pi / 180.0;
  const double dist = 3.2;
  for (int i = 0; i < count; ++i) {
    const double az = kTwoPi * i / count + 0.3;
    const Vec3 eye(dist * std::cos(elevation) * std::cos(az), dist * std::cos(elevation) * std::sin(az),
                   dist * std::sin(elevation));
    cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3::UnitZ(), 45.0 * std::numbers::pi / 180.0, resolution,
                                   resolution));
  }
  return cams;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"circular", "linear", "harmonic", "mixed"};
  return names;
}

SceneSpec make_preset(const std::string& name, const PresetOptions& opts) {
  if (opts.gaussians == 0) throw std::invalid_argument("scene preset needs at least one Gaussian");
  bool known = false;
  for (const auto& n : preset_names()) known = known || n == name;
  if (!known) throw std::invalid_argument("unknown scene preset '" + name + "'");

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double omega = kTwoPi / opts.period;

  SceneSpec spec;
  spec.t_min = opts.t_min;
  spec.t_max = opts.t_max;
  spec.cameras = ring_cameras(opts.cameras, opts.resolution);
  for (std::size_t k = 0; k < opts.gaussians; ++k) {
    CanonicalGaussian g = random_appearance(rng);
    const double angle = kTwoPi * u(rng);
    const double radius = 0.5 + 0.5 * u(rng);
    const double height = -0.3 + 0.6 * u(rng);
    g.mu = Vec3(radius * std::cos(angle), radius * std::sin(angle), height);

    std::string kind = name;
    if (name == "mixed") {
      static const char* kinds[] = {"static", "linear", "circular", "harmonic", "spin"};
      kind = kinds[k % 5];
    }
    Motion m = StaticMotion{};
    if (kind == "circular") {
      m = CircularMotion{Vec3::Zero(), Vec3::UnitZ(), omega, 0.0};
    } else if (kind == "linear") {
      const double dir = kTwoPi * u(rng);
      const double speed = 0.2 + 0.3 * u(rng);
      m = LinearMotion{Vec3(speed * std::cos(dir), speed * std::sin(dir), 0.1 * (u(rng) - 0.5))};
      g.mu *= 0.6;
    } else if (kind == "harmonic") {
      const Vec3 amp(0.15 + 0.15 * u(rng), 0.15 + 0.15 * u(rng), 0.1 * u(rng));
      m = HarmonicMotion{g.mu, amp, omega, kTwoPi * u(rng)};
    } else if (kind == "spin") {
      m = SpinMotion{Vec3(u(rng) - 0.5, u(rng) - 0.5, 1.0), omega};
      g.log_scale[0] += 0.7;  // elongated so the spin is visible
    }
    spec.gaussians.push_back(g);
    spec.motion.push_back(m);
  }
  spec.validate();
  return spec;
}

FrameSchedule frame_schedule(double t_min, double t_max, std::size_t n_frames, double split) {
  if (n_frames < 2) throw std::invalid_argument("generate_dataset: need at least 2 frames");
  if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("generate_dataset: split must lie in (0, 1)");
  if (!(t_max > t_min)) throw std::invalid_argument("generate_dataset: degenerate time window");
  FrameSchedule s;
  s.t_split = split * t_max + (1.0 - split) * t_min;
  const auto n_train = static_cast<std::size_t>(
      std::clamp<long>(std::lround(static_cast<double>(n_frames) * split), 1, static_cast<long>(n_frames) - 1));
  const std::size_t n_eval = n_frames - n_train;
  for (std::size_t i = 0; i < n_train; ++i)
    s.train.push_back(n_train == 1 ? t_min
                                   : t_min + (s.t_split - t_min) * static_cast<double>(i) /
                                                 static_cast<double>(n_train - 1));
  for (std::size_t j = 1; j <= n_eval; ++j)
    s.eval.push_back(s.t_split + (t_max - s.t_split) * static_cast<double>(j) / static_cast<double>(n_eval));
  s.eval.back() = t_max;
  return s;
}

GeneratedDataset generate_dataset(const SceneSpec& spec, std::size_t n_frames, double split) {
  spec.validate();
  if (spec.cameras.empty()) throw std::invalid_argument("generate_dataset: scene has no cameras");
  const FrameSchedule sched = frame_schedule(spec.t_min, spec.t_max, n_frames, split);
  std::vector<double> times = sched.train;
  times.insert(times.end(), sched.eval.begin(), sched.eval.end());

  GeneratedDataset out;
  out.truth = analytic_trajectories(spec, times);
  out.n_train = sched.train.size();
  out.t_split = sched.t_split;
  for (std::size_t i = 0; i < times.size(); ++i) {
    Frame f;
    f.index = i;
    f.t = times[i];
    f.train = i < out.n_train;
    f.camera = i % spec.cameras.size();
    const auto states = out.truth.frame(i);
    f.image = render(states, spec.gaussians, spec.cameras[f.camera]);
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace odegs
