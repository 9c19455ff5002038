#include "odegs/trajectory.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace odegs {

TrajectorySet::TrajectorySet(std::size_t gaussians, std::vector<double> times)
    : m_(gaussians), times_(std::move(times)), params_(m_ * times_.size() * kStateDim, 0.0) {
  for (std::size_t j = 1; j < times_.size(); ++j)
    if (!(times_[j] > times_[j - 1])) throw std::invalid_argument("TrajectorySet: timestamps must increase");
}

std::span<double> TrajectorySet::state(std::size_t k, std::size_t j) {
  return {params_.data() + (k * times_.size() + j) * kStateDim, kStateDim};
}

std::span<const double> TrajectorySet::state(std::size_t k, std::size_t j) const {
  return {params_.data() + (k * times_.size() + j) * kStateDim, kStateDim};
}

StateVec TrajectorySet::state_vec(std::size_t k, std::size_t j) const {
  StateVec s;
  const auto src = state(k, j);
  std::copy(src.begin(), src.end(), s.begin());
  return s;
}

std::vector<StateVec> TrajectorySet::frame(std::size_t j) const {
  std::vector<StateVec> out(m_);
  for (std::size_t k = 0; k < m_; ++k) out[k] = state_vec(k, j);
  return out;
}

void TrajectorySet::set_frame(std::size_t j, const std::vector<StateVec>& states) {
  if (states.size() != m_) throw std::invalid_argument("TrajectorySet::set_frame: wrong Gaussian count");
  for (std::size_t k = 0; k < m_; ++k) std::copy(states[k].begin(), states[k].end(), state(k, j).begin());
}

StateVec TrajectorySet::sample(std::size_t k, double t) const {
  if (times_.empty()) throw std::logic_error("TrajectorySet::sample on empty set");
  if (t <= times_.front()) return state_vec(k, 0);
  if (t >= times_.back()) return state_vec(k, times_.size() - 1);
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t j1 = static_cast<std::size_t>(it - times_.begin());
  const std::size_t j0 = j1 - 1;
  const double w = (t - times_[j0]) / (times_[j1] - times_[j0]);
  StateVec s;
  const auto a = state(k, j0);
  const auto b = state(k, j1);
  for (std::size_t i = 0; i < kStateDim; ++i) s[i] = (1.0 - w) * a[i] + w * b[i];
  return s;
}

TrajectorySet analytic_trajectories(const SceneSpec& spec, const std::vector<double>& times) {
  TrajectorySet set(spec.gaussians.size(), times);
  for (std::size_t j = 0; j < times.size(); ++j) set.set_frame(j, analytic_states(spec, times[j]));
  return set;
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("trajectory file truncated");
  return v;
}

}  // namespace

void write_trajectories(const std::filesystem::path& path, const TrajectorySet& set) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write trajectory file: " + path.string());
  os.write("OGTJ", 4);
  put<std::uint32_t>(os, kTrajectoryVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(set.gaussians()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(set.steps()));
  for (double t : set.times()) put<double>(os, t);
  for (double v : set.raw()) put<float>(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("failed writing trajectory file: " + path.string());
}

TrajectorySet read_trajectories(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing trajectory file: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "OGTJ", 4) != 0)
    throw std::runtime_error("bad trajectory magic: " + path.string());
  const auto version = get<std::uint32_t>(is);
  if (version != kTrajectoryVersion) throw std::runtime_error("unsupported trajectory version");
  const auto m = get<std::uint32_t>(is);
  const auto steps = get<std::uint32_t>(is);
  std::vector<double> times(steps);
  for (auto& t : times) t = get<double>(is);
  TrajectorySet set(m, std::move(times));
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < steps; ++j)
      for (auto& v : set.state(k, j)) v = static_cast<double>(get<float>(is));
  return set;
}

}  // namespace odegs
