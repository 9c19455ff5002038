#pragma once

// Gaussian parameterization, camera model and analytic scene motions.

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace odegs {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;  // quaternions are stored (w, x, y, z)
using Mat3 = Eigen::Matrix3d;

// Time-varying Gaussian parameters: mu (3), q (4), log-scale (3).
inline constexpr std::size_t kStateDim = 10;
using StateVec = std::array<double, kStateDim>;

struct CanonicalGaussian {
  Vec3 mu = Vec3::Zero();
  Vec4 q = Vec4(1, 0, 0, 0);
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  // 3 * d_sh coefficients; the first three are the degree-0 RGB color.
  std::vector<double> color = {1.0, 1.0, 1.0};

  double opacity() const;
  Vec3 rgb() const;
  StateVec state() const;
};

struct GaussianState {
  StateVec params{};
  double t = 0.0;
};

inline Vec3 state_mu(const StateVec& s) { return {s[0], s[1], s[2]}; }
inline Vec4 state_q(const StateVec& s) { return {s[3], s[4], s[5], s[6]}; }
inline Vec3 state_log_scale(const StateVec& s) { return {s[7], s[8], s[9]}; }
StateVec make_state(const Vec3& mu, const Vec4& q, const Vec3& log_scale);

Vec4 quat_normalize(const Vec4& q);  // throws on a zero quaternion
Vec4 quat_mul(const Vec4& a, const Vec4& b);
Vec4 quat_from_axis_angle(const Vec3& axis, double angle);
Mat3 rotation_matrix(const Vec4& q);  // normalizes q first

// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance(const Vec4& q, const Vec3& log_scale);

struct Camera {
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();
  double fx = 100, fy = 100, cx = 50, cy = 50;
  int width = 100;
  int height = 100;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  // Throws if rotation is not a proper orthonormal matrix.
  void validate() const;

  // Camera at `eye` looking at `target`, +z forward, +y down in the image.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_rad, int width,
                        int height);
};

struct StaticMotion {};
struct LinearMotion {
  Vec3 velocity = Vec3::Zero();
};
struct CircularMotion {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double omega = 0.0;
  double phase = 0.0;
};
struct HarmonicMotion {
  Vec3 center = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();
  double omega = 0.0;
  double phase = 0.0;
};
// Rotation about the Gaussian's own (body-frame) axis.
struct SpinMotion {
  Vec3 axis = Vec3::UnitZ();
  double omega = 0.0;
};

using Motion = std::variant<StaticMotion, LinearMotion, CircularMotion, HarmonicMotion, SpinMotion>;

std::string motion_kind(const Motion& m);

struct SceneSpec {
  std::vector<CanonicalGaussian> gaussians;
  std::vector<Motion> motion;  // one per Gaussian
  std::vector<Camera> cameras;
  double t_min = 0.0;
  double t_max = 1.0;
  // End of the observed (training) window when the scene was split.
  std::optional<double> observed_t_max;

  double observed_end() const { return observed_t_max.value_or(t_max); }
  void validate() const;
};

// Closed-form state of Gaussian k at time t (t >= t_min; t beyond t_max is
// allowed and is how extrapolation ground truth is produced).
GaussianState analytic_state(const SceneSpec& spec, std::size_t k, double t);
std::vector<StateVec> analytic_states(const SceneSpec& spec, double t);

// JSON (de)serialization of scene specs.
std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);
SceneSpec load_scene(const std::string& path);
void save_scene(const std::string& path, const SceneSpec& spec);

}  // namespace odegs
