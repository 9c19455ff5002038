#include "odegs/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace odegs {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr std::array<double, 6> b5 = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84};
// Difference between the 5th- and embedded 4th-order weights.
constexpr std::array<double, 7> e5 = {71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
                                      -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
// Dense-output weights (Hairer's contd5).
constexpr std::array<double, 7> d5 = {-12715105075.0 / 11282082432.0, 0.0,
                                      87487479700.0 / 32700410799.0,  -10690763975.0 / 1880347072.0,
                                      701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0,
                                      69997945.0 / 29380423.0};

std::vector<double> copy_state(const Tensor& z) { return {z.data().begin(), z.data().end()}; }

void check_finite(const Tensor& v, double t, const Tensor& z, const char* what) {
  for (double x : v.data())
    if (!std::isfinite(x)) {
      std::ostringstream os;
      os << "integrate: non-finite " << what << " at t = " << t;
      throw SolverError(os.str(), t, copy_state(z));
    }
}

double rms_norm(std::span<const double> v, std::span<const double> scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] / scale[i];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(std::max<std::size_t>(v.size(), 1)));
}

class Evaluator {
 public:
  Evaluator(const VectorField& f, SolverStats& stats) : f_(f), stats_(stats) {}
  Tensor operator()(double t, const Tensor& z) {
    ++stats_.evaluations;
    Tensor k = f_(t, z);
    if (k.shape() != z.shape())
      throw ShapeError("integrate: vector field returned shape " + shape_str(k.shape()) + " for state " +
                       shape_str(z.shape()));
    check_finite(k, t, z, "vector field value");
    return k;
  }

 private:
  const VectorField& f_;
  SolverStats& stats_;
};

double initial_step(Evaluator& eval, double t0, const Tensor& z0, const Tensor& f0, double span,
                    const SolverConfig& cfg) {
  RecordScope off(nullptr);
  const auto y = z0.data();
  const auto fy = f0.data();
  std::vector<double> scale(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) scale[i] = cfg.atol + cfg.rtol * std::abs(y[i]);
  const double d0 = rms_norm(y, scale);
  const double d1 = rms_norm(fy, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  const Tensor z1 = z0.detach() + f0.detach() * h0;
  const Tensor f1 = eval(t0 + h0, z1);
  std::vector<double> df(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) df[i] = f1.data()[i] - fy[i];
  const double d2 = rms_norm(df, scale) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span});
}

std::vector<Tensor> solve_rk4(Evaluator& eval, const Tensor& z0, double t0, std::span<const double> times,
                              const SolverConfig& cfg, SolverStats& stats) {
  std::vector<Tensor> out;
  out.reserve(times.size());
  Tensor z = z0;
  double t = t0;
  for (double target : times) {
    const double span = target - t;
    if (span > 0.0) {
      const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / cfg.rk4_step - 1e-9)));
      const double h = span / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (stats.accepted >= cfg.max_steps) {
          throw SolverError("integrate: exceeded max_steps = " + std::to_string(cfg.max_steps), t, copy_state(z));
        }
        const double ts = (i + 1 == n) ? target : t + h;
        const Tensor k1 = eval(t, z);
        const Tensor k2 = eval(t + 0.5 * h, z + k1 * (0.5 * h));
        const Tensor k3 = eval(t + 0.5 * h, z + k2 * (0.5 * h));
        const Tensor k4 = eval(t + h, z + k3 * h);
        const std::array<double, 5> c = {1.0, h / 6, h / 3, h / 3, h / 6};
        const std::array<Tensor, 5> terms = {z, k1, k2, k3, k4};
        z = lincomb(c, terms);
        check_finite(z, ts, z, "state");
        t = ts;
        ++stats.accepted;
      }
    }
    out.push_back(z);
  }
  return out;
}

std::vector<Tensor> solve_dopri5(Evaluator& eval, const Tensor& z0, double t0, std::span<const double> times,
                                 const SolverConfig& cfg, SolverStats& stats) {
  std::vector<Tensor> out;
  out.reserve(times.size());
  std::size_t next = 0;
  while (next < times.size() && times[next] == t0) out.push_back(z0), ++next;
  if (next == times.size()) return out;

  const double t_end = times.back();
  Tensor z = z0;
  double t = t0;
  Tensor k1 = eval(t, z);
  double h = cfg.initial_step > 0.0 ? std::min(cfg.initial_step, t_end - t0)
                                    : initial_step(eval, t0, z0, k1, t_end - t0, cfg);
  GradRecord* rec = GradRecord::active();
  const std::size_t n = z.numel();
  std::vector<double> err(n), scale(n);
  bool last_rejected = false;

  while (next < times.size()) {
    if (stats.accepted + stats.rejected >= cfg.max_steps)
      throw SolverError("integrate: exceeded max_steps = " + std::to_string(cfg.max_steps) + " at t = " +
                            std::to_string(t),
                        t, copy_state(z));
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw SolverError("integrate: step size underflow at t = " + std::to_string(t), t, copy_state(z));
    const bool final_step = t + h >= t_end;
    if (final_step) h = t_end - t;
    const std::size_t mark = rec ? rec->size() : 0;

    const Tensor k2 = eval(t + c2 * h, z + k1 * (h * a21));
    const Tensor k3 = eval(t + c3 * h, lincomb(std::array{1.0, h * a31, h * a32}, std::array{z, k1, k2}));
    const Tensor k4 =
        eval(t + c4 * h, lincomb(std::array{1.0, h * a41, h * a42, h * a43}, std::array{z, k1, k2, k3}));
    const Tensor k5 = eval(t + c5 * h, lincomb(std::array{1.0, h * a51, h * a52, h * a53, h * a54},
                                               std::array{z, k1, k2, k3, k4}));
    const Tensor k6 = eval(t + h, lincomb(std::array{1.0, h * a61, h * a62, h * a63, h * a64, h * a65},
                                          std::array{z, k1, k2, k3, k4, k5}));
    const Tensor z_new =
        lincomb(std::array{1.0, h * b5[0], h * b5[2], h * b5[3], h * b5[4], h * b5[5]},
                std::array{z, k1, k3, k4, k5, k6});
    const double t_new = final_step ? t_end : t + h;
    const Tensor k7 = eval(t_new, z_new);

    const std::array<const Tensor*, 7> ks = {&k1, &k2, &k3, &k4, &k5, &k6, &k7};
    const auto zv = z.data();
    const auto zn = z_new.data();
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t s = 0; s < 7; ++s) e += e5[s] * ks[s]->data()[i];
      err[i] = h * e;
      scale[i] = cfg.atol + cfg.rtol * std::max(std::abs(zv[i]), std::abs(zn[i]));
    }
    const double err_norm = rms_norm(err, scale);
    if (!std::isfinite(err_norm)) throw SolverError("integrate: non-finite error estimate", t, copy_state(z));

    if (err_norm > 1.0) {
      if (rec) rec->truncate(mark);
      ++stats.rejected;
      last_rejected = true;
      h *= std::clamp(cfg.safety * std::pow(err_norm, -0.2), cfg.min_factor, 1.0);
      continue;
    }

    ++stats.accepted;
    // Dense output for requested times inside (t, t_new].
    while (next < times.size() && times[next] <= t_new) {
      const double tq = times[next];
      if (tq == t_new) {
        out.push_back(z_new);
      } else {
        const double th = (tq - t) / h;
        const double a = th, b = th * (1.0 - th), c = th * th * (1.0 - th), e = c * (1.0 - th);
        // Written around z + (z_new - z) so a stationary state is reproduced exactly.
        const std::array<double, 8> coef = {1.0,           a - b + 2.0 * c, h * (b - c + e * d5[0]), h * e * d5[2],
                                            h * e * d5[3], h * e * d5[4],   h * e * d5[5],           h * (e * d5[6] - c)};
        out.push_back(lincomb(coef, std::array{z, z_new - z, k1, k3, k4, k5, k6, k7}));
      }
      ++next;
    }
    const double fac = err_norm == 0.0 ? cfg.max_factor
                                       : std::clamp(cfg.safety * std::pow(err_norm, -0.2), cfg.min_factor,
                                                    last_rejected ? 1.0 : cfg.max_factor);
    last_rejected = false;
    z = z_new;
    k1 = k7;
    t = t_new;
    h *= fac;
  }
  return out;
}

}  // namespace

SolverMethod solver_method_from_string(const std::string& s) {
  if (s == "rk4") return SolverMethod::kRk4;
  if (s == "dopri5") return SolverMethod::kDopri5;
  throw std::invalid_argument("unknown solver method '" + s + "' (expected rk4 or dopri5)");
}

std::string to_string(SolverMethod m) { return m == SolverMethod::kRk4 ? "rk4" : "dopri5"; }

void SolverConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("SolverConfig: rtol and atol must be positive");
  if (max_steps < 1) throw std::invalid_argument("SolverConfig: max_steps must be >= 1");
  if (!(safety > 0.0 && safety <= 1.0)) throw std::invalid_argument("SolverConfig: safety must lie in (0, 1]");
  if (!(min_factor > 0.0 && min_factor <= 1.0 && max_factor >= 1.0))
    throw std::invalid_argument("SolverConfig: step factor bounds must bracket 1");
  if (!(rk4_step > 0.0)) throw std::invalid_argument("SolverConfig: rk4_step must be positive");
  if (initial_step < 0.0) throw std::invalid_argument("SolverConfig: initial_step must be >= 0");
}

std::vector<Tensor> integrate(const VectorField& f, const Tensor& z0, double t0, std::span<const double> times,
                              const SolverConfig& cfg, SolverStats* stats) {
  cfg.validate();
  if (times.empty()) return {};
  if (times.front() < t0) throw std::invalid_argument("integrate: output times must not precede t0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("integrate: output times must be strictly increasing");
  check_finite(z0, t0, z0, "initial state");
  SolverStats local;
  SolverStats& st = stats ? *stats : local;
  st = {};
  Evaluator eval(f, st);
  return cfg.method == SolverMethod::kRk4 ? solve_rk4(eval, z0, t0, times, cfg, st)
                                          : solve_dopri5(eval, z0, t0, times, cfg, st);
}

}  // namespace odegs
