#include "odegs/gaussian.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace odegs {

using json = nlohmann::json;

double CanonicalGaussian::opacity() const { return 1.0 / (1.0 + std::exp(-opacity_logit)); }

Vec3 CanonicalGaussian::rgb() const {
  Vec3 c;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(i < static_cast<int>(color.size()) ? color[i] : 0.0, 0.0, 1.0);
  return c;
}

StateVec CanonicalGaussian::state() const { return make_state(mu, q, log_scale); }

StateVec make_state(const Vec3& mu, const Vec4& q, const Vec3& log_scale) {
  return {mu[0], mu[1], mu[2], q[0], q[1], q[2], q[3], log_scale[0], log_scale[1], log_scale[2]};
}

Vec4 quat_normalize(const Vec4& q) {
  const double n = q.norm();
  if (!(n > 0.0)) throw std::invalid_argument("quaternion has zero norm");
  return q / n;
}

Vec4 quat_mul(const Vec4& a, const Vec4& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Vec4 quat_from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw std::invalid_argument("rotation axis has zero norm");
  const Vec3 u = axis / n;
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), u[0] * s, u[1] * s, u[2] * s};
}

Mat3 rotation_matrix(const Vec4& q_in) {
  const Vec4 q = quat_normalize(q_in);
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 covariance(const Vec4& q, const Vec3& log_scale) {
  const Mat3 r = rotation_matrix(q);
  const Mat3 m = r * log_scale.array().exp().matrix().asDiagonal();
  return m * m.transpose();
}

void Camera::validate() const {
  const double orth = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (orth > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("camera rotation is not a proper rotation");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera has empty image extents");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_rad, int width, int height) {
  const Vec3 fwd = (target - eye).normalized();
  const Vec3 right = fwd.cross(up).normalized();
  const Vec3 down = fwd.cross(right);
  Camera c;
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = fwd.transpose();
  c.translation = -c.rotation * eye;
  c.width = width;
  c.height = height;
  c.fy = 0.5 * height / std::tan(0.5 * fov_y_rad);
  c.fx = c.fy;
  c.cx = 0.5 * (width - 1);
  c.cy = 0.5 * (height - 1);
  return c;
}

std::string motion_kind(const Motion& m) {
  struct V {
    std::string operator()(const StaticMotion&) const { return "static"; }
    std::string operator()(const LinearMotion&) const { return "linear"; }
    std::string operator()(const CircularMotion&) const { return "circular"; }
    std::string operator()(const HarmonicMotion&) const { return "harmonic"; }
    std::string operator()(const SpinMotion&) const { return "spin"; }
  };
  return std::visit(V{}, m);
}

void SceneSpec::validate() const {
  if (!(t_min < t_max)) throw std::invalid_argument("scene: t_min must be < t_max");
  if (motion.size() != gaussians.size()) throw std::invalid_argument("scene: one motion per Gaussian required");
  if (observed_t_max && (*observed_t_max <= t_min || *observed_t_max > t_max))
    throw std::invalid_argument("scene: observed_t_max outside (t_min, t_max]");
  for (const auto& c : cameras) c.validate();
}

GaussianState analytic_state(const SceneSpec& spec, std::size_t k, double t) {
  if (k >= spec.gaussians.size()) throw std::out_of_range("analytic_state: Gaussian index out of range");
  if (t < spec.t_min) throw std::invalid_argument("analytic_state: t precedes t_min");
  const CanonicalGaussian& g = spec.gaussians[k];
  Vec3 mu = g.mu;
  Vec4 q = g.q;
  struct V {
    double t;
    Vec3& mu;
    Vec4& q;
    void operator()(const StaticMotion&) const {}
    void operator()(const LinearMotion& m) const { mu += m.velocity * t; }
    void operator()(const CircularMotion& m) const {
      const double angle = m.omega * t + m.phase;
      mu = m.center + rotation_matrix(quat_from_axis_angle(m.axis, angle)) * (mu - m.center);
      q = quat_mul(quat_from_axis_angle(m.axis, angle), q);
    }
    void operator()(const HarmonicMotion& m) const {
      const double s = std::sin(m.omega * t + m.phase);
      mu = m.center + m.amplitude * s;
    }
    void operator()(const SpinMotion& m) const { q = quat_mul(q, quat_from_axis_angle(m.axis, m.omega * t)); }
  };
  std::visit(V{t, mu, q}, spec.motion[k]);
  return {make_state(mu, q, g.log_scale), t};
}

std::vector<StateVec> analytic_states(const SceneSpec& spec, double t) {
  std::vector<StateVec> out;
  out.reserve(spec.gaussians.size());
  for (std::size_t k = 0; k < spec.gaussians.size(); ++k) out.push_back(analytic_state(spec, k, t).params);
  return out;
}

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

template <int N>
Eigen::Matrix<double, N, 1> to_vec(const json& j, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw std::invalid_argument(std::string("scene json: ") + what + " has wrong length");
  return Eigen::Map<Eigen::Matrix<double, N, 1>>(v.data());
}

json motion_json(const Motion& m) {
  json j;
  j["kind"] = motion_kind(m);
  if (auto* l = std::get_if<LinearMotion>(&m)) j["velocity"] = vec(l->velocity);
  if (auto* c = std::get_if<CircularMotion>(&m)) {
    j["center"] = vec(c->center);
    j["axis"] = vec(c->axis);
    j["omega"] = c->omega;
    j["phase"] = c->phase;
  }
  if (auto* h = std::get_if<HarmonicMotion>(&m)) {
    j["center"] = vec(h->center);
    j["amplitude"] = vec(h->amplitude);
    j["omega"] = h->omega;
    j["phase"] = h->phase;
  }
  if (auto* s = std::get_if<SpinMotion>(&m)) {
    j["axis"] = vec(s->axis);
    j["omega"] = s->omega;
  }
  return j;
}

Motion motion_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "static") return StaticMotion{};
  if (kind == "linear") return LinearMotion{to_vec<3>(j.at("velocity"), "velocity")};
  if (kind == "circular")
    return CircularMotion{to_vec<3>(j.at("center"), "center"), to_vec<3>(j.at("axis"), "axis"),
                          j.at("omega").get<double>(), j.value("phase", 0.0)};
  if (kind == "harmonic")
    return HarmonicMotion{to_vec<3>(j.at("center"), "center"), to_vec<3>(j.at("amplitude"), "amplitude"),
                          j.at("omega").get<double>(), j.value("phase", 0.0)};
  if (kind == "spin") return SpinMotion{to_vec<3>(j.at("axis"), "axis"), j.at("omega").get<double>()};
  throw std::invalid_argument("scene json: unknown motion kind '" + kind + "'");
}

}  // namespace

std::string scene_to_json(const SceneSpec& spec) {
  json j;
  j["t_min"] = spec.t_min;
  j["t_max"] = spec.t_max;
  if (spec.observed_t_max) j["observed_t_max"] = *spec.observed_t_max;
  j["gaussians"] = json::array();
  for (std::size_t k = 0; k < spec.gaussians.size(); ++k) {
    const auto& g = spec.gaussians[k];
    json jg;
    jg["mu"] = vec(g.mu);
    jg["q"] = vec(g.q);
    jg["log_scale"] = vec(g.log_scale);
    jg["opacity_logit"] = g.opacity_logit;
    jg["color"] = g.color;
    jg["motion"] = motion_json(spec.motion[k]);
    j["gaussians"].push_back(jg);
  }
  j["cameras"] = json::array();
  for (const auto& c : spec.cameras) {
    json jc;
    jc["rotation"] = {vec(c.rotation.row(0).transpose()), vec(c.rotation.row(1).transpose()),
                      vec(c.rotation.row(2).transpose())};
    jc["translation"] = vec(c.translation);
    jc["fx"] = c.fx;
    jc["fy"] = c.fy;
    jc["cx"] = c.cx;
    jc["cy"] = c.cy;
    jc["width"] = c.width;
    jc["height"] = c.height;
    j["cameras"].push_back(jc);
  }
  return j.dump(2);
}

SceneSpec scene_from_json(const std::string& text) {
  const json j = json::parse(text);
  SceneSpec s;
  s.t_min = j.at("t_min").get<double>();
  s.t_max = j.at("t_max").get<double>();
  if (j.contains("observed_t_max")) s.observed_t_max = j.at("observed_t_max").get<double>();
  for (const auto& jg : j.at("gaussians")) {
    CanonicalGaussian g;
    g.mu = to_vec<3>(jg.at("mu"), "mu");
    g.q = to_vec<4>(jg.at("q"), "q");
    g.log_scale = to_vec<3>(jg.at("log_scale"), "log_scale");
    g.opacity_logit = jg.at("opacity_logit").get<double>();
    g.color = jg.at("color").get<std::vector<double>>();
    if (g.color.empty() || g.color.size() % 3 != 0)
      throw std::invalid_argument("scene json: color block must hold 3*d_sh values");
    s.gaussians.push_back(g);
    s.motion.push_back(jg.contains("motion") ? motion_from_json(jg.at("motion")) : Motion{StaticMotion{}});
  }
  for (const auto& jc : j.value("cameras", json::array())) {
    Camera c;
    const auto rows = jc.at("rotation");
    for (int r = 0; r < 3; ++r) c.rotation.row(r) = to_vec<3>(rows.at(r), "rotation row").transpose();
    c.translation = to_vec<3>(jc.at("translation"), "translation");
    c.fx = jc.at("fx").get<double>();
    c.fy = jc.at("fy").get<double>();
    c.cx = jc.at("cx").get<double>();
    c.cy = jc.at("cy").get<double>();
    c.width = jc.at("width").get<int>();
    c.height = jc.at("height").get<int>();
    s.cameras.push_back(c);
  }
  s.validate();
  return s;
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing scene file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return scene_from_json(ss.str());
}

void save_scene(const std::string& path, const SceneSpec& spec) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write scene file: " + path);
  os << scene_to_json(spec) << '\n';
}

}  // namespace odegs
