#pragma once

// CPU splatting renderer (front-to-back alpha compositing of projected
// Gaussians) and image-quality metrics.

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "odegs/gaussian.hpp"

namespace odegs {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;  // row-major, 3 channels

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}
  float& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

struct Splat2D {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;  // includes the anti-aliasing floor
  double depth = 0.0;
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  std::size_t index = 0;
};

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCovFloor = 0.3;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kCutoffSigma = 3.0;

// EWA projection of one Gaussian; std::nullopt when culled by the near plane.
std::optional<Splat2D> project(const StateVec& state, double opacity, const Vec3& color, const Camera& cam);

struct RenderOutput {
  Image image;
  std::vector<double> weight_sum;  // per pixel, sum_k alpha_k prod_{j<k}(1 - alpha_j)
};

// `states` and `attrs` are parallel arrays (time-varying parameters and the
// static opacity/color carried by the canonical Gaussians).
RenderOutput render_detailed(std::span<const StateVec> states, std::span<const CanonicalGaussian> attrs,
                             const Camera& cam);
Image render(std::span<const StateVec> states, std::span<const CanonicalGaussian> attrs, const Camera& cam);

double mse(const Image& a, const Image& b);
double l1(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b);  // capped at 99 dB
double ssim(const Image& a, const Image& b);  // 11x11 Gaussian window, sigma 1.5
// (1 - lambda) * L1 + lambda * (1 - SSIM)
double combined_loss(const Image& a, const Image& b, double lambda = 0.2);

// Rounds every channel to the 8-bit grid used by PPM files.
Image quantize_8bit(const Image& img);

void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

}  // namespace odegs
