#include "odegs/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "odegs/interp.hpp"

namespace odegs {

namespace {

std::vector<double> context_times(double t0, const SamplerConfig& cfg) {
  std::vector<double> ts(cfg.context_steps);
  const double dc = cfg.context_step();
  for (std::size_t i = 0; i + 1 < cfg.context_steps; ++i) ts[i] = t0 + static_cast<double>(i) * dc;
  ts.back() = t0 + cfg.context_span;
  return ts;
}

void copy_rows(const TrajectorySet& set, std::size_t first_step, std::size_t steps, std::vector<double>& out) {
  out.assign(set.gaussians() * steps * kStateDim, 0.0);
  for (std::size_t k = 0; k < set.gaussians(); ++k)
    for (std::size_t j = 0; j < steps; ++j) {
      const auto s = set.state(k, first_step + j);
      std::copy(s.begin(), s.end(), out.begin() + (k * steps + j) * kStateDim);
    }
}

}  // namespace

void SamplerConfig::validate(double t_min, double t_max) const {
  if (context_steps < 2) throw std::invalid_argument("SamplerConfig: context_steps must be >= 2");
  if (target_steps < 1) throw std::invalid_argument("SamplerConfig: target_steps must be >= 1");
  if (!(t_max > t_min)) throw std::invalid_argument("SamplerConfig: degenerate time window");
  if (!(context_span > 0.0)) throw std::invalid_argument("SamplerConfig: context_span must be positive");
  if (!(context_span < t_max - t_min)) {
    std::ostringstream os;
    os << "SamplerConfig: context_span " << context_span << " must be shorter than the window [" << t_min << ", "
       << t_max << "]";
    throw std::invalid_argument(os.str());
  }
  if (t0_stride < 0.0 || min_target_span < 0.0)
    throw std::invalid_argument("SamplerConfig: t0_stride and min_target_span must be >= 0");
}

SampleTimes sample_times(double t0, double t_max, const SamplerConfig& cfg) {
  SampleTimes s;
  s.t0 = t0;
  s.context = context_times(t0, cfg);
  const double t_end = s.context.back();
  const double span = t_max - t_end;
  if (!(span > 0.0)) throw std::invalid_argument("sample_times: no room for a target after the context");
  const double de = span / static_cast<double>(cfg.target_steps);
  s.target.resize(cfg.target_steps);
  for (std::size_t j = 1; j < cfg.target_steps; ++j) s.target[j - 1] = t_end + static_cast<double>(j) * de;
  s.target.back() = t_max;
  return s;
}

std::vector<double> start_times(double t_min, double t_max, const SamplerConfig& cfg) {
  cfg.validate(t_min, t_max);
  const double last = t_max - cfg.context_span - cfg.min_target();
  const double stride = cfg.stride();
  const double eps = 1e-9 * stride;
  if (last < t_min - eps) {
    std::ostringstream os;
    os << "start_times: no valid t0 (window [" << t_min << ", " << t_max << "], context " << cfg.context_span
       << ", minimum target span " << cfg.min_target() << ")";
    throw std::invalid_argument(os.str());
  }
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double t0 = t_min + static_cast<double>(i) * stride;
    if (t0 >= last - eps) break;
    out.push_back(t0);
  }
  out.push_back(std::max(last, t_min));
  return out;
}

TrajectorySource source_from(const InterpModel& model) {
  return [&model](std::span<const double> ts) { return model.query(ts); };
}

TrajectorySource source_from(const SceneSpec& scene) {
  return [scene](std::span<const double> ts) {
    return analytic_trajectories(scene, std::vector<double>(ts.begin(), ts.end()));
  };
}

TrajectorySource source_from(const TrajectorySet& set) {
  return [set](std::span<const double> ts) {
    TrajectorySet out(set.gaussians(), std::vector<double>(ts.begin(), ts.end()));
    for (std::size_t j = 0; j < ts.size(); ++j) {
      std::vector<StateVec> frame(set.gaussians());
      for (std::size_t k = 0; k < set.gaussians(); ++k) frame[k] = set.sample(k, ts[j]);
      out.set_frame(j, frame);
    }
    return out;
  };
}

SamplePair SampleDataset::pair(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("SampleDataset::pair: index out of range");
  const SampleGroup& g = groups[i / gaussians];
  const std::size_t k = i % gaussians;
  const std::size_t nc = config.context_steps, ne = config.target_steps;
  SamplePair p;
  p.gaussian = k;
  p.t0 = g.times.t0;
  p.context_times = g.times.context;
  p.target_times = g.times.target;
  p.context = std::span<const double>(g.context).subspan(k * nc * kStateDim, nc * kStateDim);
  p.target = std::span<const double>(g.target).subspan(k * ne * kStateDim, ne * kStateDim);
  return p;
}

SampleDataset build_dataset(const TrajectorySource& source, std::size_t gaussians, double t_min, double t_max,
                            const SamplerConfig& cfg) {
  if (gaussians == 0) throw std::invalid_argument("build_dataset: no Gaussians");
  SampleDataset ds;
  ds.gaussians = gaussians;
  ds.config = cfg;
  for (double t0 : start_times(t_min, t_max, cfg)) {
    SampleGroup g;
    g.times = sample_times(t0, t_max, cfg);
    std::vector<double> all = g.times.context;
    all.insert(all.end(), g.times.target.begin(), g.times.target.end());
    const TrajectorySet states = source(all);
    if (states.gaussians() != gaussians) throw std::invalid_argument("build_dataset: source returned wrong M");
    copy_rows(states, 0, cfg.context_steps, g.context);
    copy_rows(states, cfg.context_steps, cfg.target_steps, g.target);
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

ContextBatch final_context(const TrajectorySource& source, std::size_t gaussians, double t_min, double t_max,
                           const SamplerConfig& cfg) {
  cfg.validate(t_min, t_max);
  ContextBatch c;
  c.gaussians = gaussians;
  c.times = context_times(t_max - cfg.context_span, cfg);
  c.times.back() = t_max;
  const TrajectorySet states = source(c.times);
  if (states.gaussians() != gaussians) throw std::invalid_argument("final_context: source returned wrong M");
  copy_rows(states, 0, cfg.context_steps, c.states);
  return c;
}

void write_dataset(const std::filesystem::path& dir, const SampleDataset& ds) {
  std::filesystem::create_directories(dir);
  const std::size_t nc = ds.config.context_steps, ne = ds.config.target_steps;
  std::vector<double> steps(nc + ne);
  for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = static_cast<double>(i);
  TrajectorySet rows(ds.size(), steps);
  nlohmann::json samples = nlohmann::json::array();
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : ds.groups)
    groups.push_back({{"t0", g.times.t0}, {"context_times", g.times.context}, {"target_times", g.times.target}});
  for (std::size_t j = 0; j < steps.size(); ++j) {
    std::vector<StateVec> frame(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const SamplePair p = ds.pair(i);
      const auto src = j < nc ? p.context.subspan(j * kStateDim, kStateDim)
                              : p.target.subspan((j - nc) * kStateDim, kStateDim);
      std::copy(src.begin(), src.end(), frame[i].begin());
    }
    rows.set_frame(j, frame);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const SamplePair p = ds.pair(i);
    samples.push_back({{"row", i}, {"gaussian", p.gaussian}, {"t0", p.t0}, {"group", i / ds.gaussians}});
  }
  write_trajectories(dir / "samples.ogtj", rows);
  const nlohmann::json index = {{"context_steps", nc}, {"target_steps", ne}, {"context_span", ds.config.context_span},
                                {"gaussians", ds.gaussians}, {"groups", groups}, {"samples", samples}};
  std::ofstream os(dir / "samples.json");
  if (!os) throw std::runtime_error("write_dataset: cannot write " + (dir / "samples.json").string());
  os << index.dump(1) << '\n';
}

PositionNormalizer PositionNormalizer::fit(std::span<const double> states) {
  PositionNormalizer n;
  const std::size_t rows = states.size() / kStateDim;
  if (rows == 0) return n;
  for (std::size_t r = 0; r < rows; ++r) n.center += Vec3(states[r * kStateDim], states[r * kStateDim + 1], states[r * kStateDim + 2]);
  n.center /= static_cast<double>(rows);
  double ss = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    ss += (Vec3(states[r * kStateDim], states[r * kStateDim + 1], states[r * kStateDim + 2]) - n.center).squaredNorm();
  const double rms = std::sqrt(ss / static_cast<double>(rows));
  n.scale = rms > 1e-12 ? rms : 1.0;
  return n;
}

void PositionNormalizer::apply(std::span<double> states) const {
  for (std::size_t r = 0; r + kStateDim <= states.size(); r += kStateDim)
    for (int i = 0; i < 3; ++i) states[r + i] = (states[r + i] - center[i]) / scale;
}

void PositionNormalizer::invert(std::span<double> states) const {
  for (std::size_t r = 0; r + kStateDim <= states.size(); r += kStateDim)
    for (int i = 0; i < 3; ++i) states[r + i] = states[r + i] * scale + center[i];
}

}  // namespace odegs
