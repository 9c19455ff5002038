#pragma once

// Explicit Runge-Kutta integrators over Tensor states. Every accepted step is
// recorded on the active GradRecord, so gradients flow through the unrolled
// solve; step-size decisions are plain control flow.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "odegs/tensor.hpp"

namespace odegs {

enum class SolverMethod { kRk4, kDopri5 };

SolverMethod solver_method_from_string(const std::string& s);
std::string to_string(SolverMethod m);

struct SolverConfig {
  SolverMethod method = SolverMethod::kDopri5;
  double rtol = 1e-3;
  double atol = 1e-4;
  double initial_step = 0.0;  // 0 picks a step from the local derivative scale
  std::size_t max_steps = 10000;
  double safety = 0.9;
  double min_factor = 0.1;
  double max_factor = 5.0;
  double rk4_step = 0.01;  // upper bound on the fixed RK4 step

  void validate() const;
};

// Right-hand side dz/dt = f(t, z). The state may have any shape; a leading
// batch axis shares a single adaptive step (error norm over all entries).
using VectorField = std::function<Tensor(double, const Tensor&)>;

struct SolverStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double time, std::vector<double> state)
      : std::runtime_error(what), time_(time), state_(std::move(state)) {}
  double time() const { return time_; }
  const std::vector<double>& state() const { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

// Returns the state at each entry of `times` (strictly increasing, first
// entry >= t0). Outputs between DOPRI5 steps come from the 4th-order dense
// interpolant; RK4 lands on every requested time.
std::vector<Tensor> integrate(const VectorField& f, const Tensor& z0, double t0, std::span<const double> times,
                              const SolverConfig& cfg, SolverStats* stats = nullptr);

}  // namespace odegs
