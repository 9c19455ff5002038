#pragma once

// Loop-based reference implementations of the training losses. Arrays are
// flat row-major [N][B][C] vectors; nothing here touches the tensor library.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace odegs::reference {

inline double at(const std::vector<double>& x, std::size_t b, std::size_t c, std::size_t j, std::size_t k,
                 std::size_t i) {
  return x[(j * b + k) * c + i];
}

inline double l1_loss(const std::vector<double>& pred, const std::vector<double>& target, std::size_t n,
                      std::size_t b, std::size_t c) {
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    double per = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double norm1 = 0.0;
      for (std::size_t i = 0; i < c; ++i) norm1 += std::abs(at(pred, b, c, j, k, i) - at(target, b, c, j, k, i));
      per += norm1;
    }
    total += per / static_cast<double>(n);
  }
  return total / static_cast<double>(b);
}

inline double latent_smoothness(const std::vector<double>& f, const std::vector<double>& t, std::size_t n,
                                std::size_t b, std::size_t c) {
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    double per = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double dt = t[j + 1] - t[j];
      double sq = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        const double d = (at(f, b, c, j + 1, k, i) - at(f, b, c, j, k, i)) / dt;
        sq += d * d;
      }
      per += sq;
    }
    total += per / static_cast<double>(n - 1);
  }
  return total / static_cast<double>(b);
}

inline double acceleration_penalty(const std::vector<double>& mu, const std::vector<double>& t, std::size_t n,
                                   std::size_t m) {
  if (n < 3) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j + 2 < n; ++j) {
      double sq = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const double v0 = (at(mu, m, 3, j + 1, k, i) - at(mu, m, 3, j, k, i)) / (t[j + 1] - t[j]);
        const double v1 = (at(mu, m, 3, j + 2, k, i) - at(mu, m, 3, j + 1, k, i)) / (t[j + 2] - t[j + 1]);
        const double a = (v1 - v0) / (t[j + 1] - t[j]);
        sq += a * a;
      }
      total += sq;
    }
  }
  return total / static_cast<double>(m * n);
}

inline double scale_factor(double ema, double l_init, double l_end, double tau) {
  double r = (ema - l_end) / (l_init - l_end);
  if (r < 0.0) r = 0.0;
  if (r > 1.0) r = 1.0;
  return std::exp(-r / tau);
}

inline double ema_step(double prev, double cur, double alpha) { return alpha * prev + (1.0 - alpha) * cur; }

inline double kl_standard(const std::vector<double>& mean, const std::vector<double>& logvar, std::size_t b,
                          std::size_t d) {
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t i = 0; i < d; ++i) {
      const double m = mean[k * d + i], lv = logvar[k * d + i];
      total += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
  return total / static_cast<double>(b);
}

inline double gaussian_nll(const std::vector<double>& pred, const std::vector<double>& target, std::size_t n,
                           std::size_t b, std::size_t c, double sigma) {
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        const double d = at(pred, b, c, j, k, i) - at(target, b, c, j, k, i);
        sq += d * d;
      }
      total += sq / (2.0 * sigma * sigma) + 0.5 * static_cast<double>(c) * std::log(2.0 * std::numbers::pi * sigma * sigma);
    }
  return total / static_cast<double>(b);
}

// Strictly increasing times with random, non-uniform spacing.
inline std::vector<double> random_times(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.3);
  std::vector<double> t(n);
  double acc = u(rng);
  for (auto& v : t) {
    v = acc;
    acc += u(rng);
  }
  return t;
}

inline std::vector<double> random_values(std::size_t count, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(count);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace odegs::reference
