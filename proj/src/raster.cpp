#include "odegs/raster.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "odegs/parallel.hpp"

namespace odegs {

std::optional<Splat2D> project(const StateVec& state, double opacity, const Vec3& color, const Camera& cam) {
  const Vec3 pc = cam.to_camera(state_mu(state));
  if (pc.z() <= kNearPlane) return std::nullopt;
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx * iz, 0.0, -cam.fx * pc.x() * iz * iz,  //
      0.0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
  const Mat3 sigma = covariance(state_q(state), state_log_scale(state));
  const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;
  Splat2D s;
  s.cov = t * sigma * t.transpose();
  s.cov(0, 1) = s.cov(1, 0) = 0.5 * (s.cov(0, 1) + s.cov(1, 0));
  s.cov += kCovFloor * Eigen::Matrix2d::Identity();
  s.mean = {cam.fx * pc.x() * iz + cam.cx, cam.fy * pc.y() * iz + cam.cy};
  s.depth = pc.z();
  s.color = color;
  s.opacity = opacity;
  return s;
}

RenderOutput render_detailed(std::span<const StateVec> states, std::span<const CanonicalGaussian> attrs,
                             const Camera& cam) {
  if (states.size() != attrs.size()) throw std::invalid_argument("render: states/attributes size mismatch");
  std::vector<Splat2D> splats;
  splats.reserve(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    auto s = project(states[k], attrs[k].opacity(), attrs[k].rgb(), cam);
    if (!s) continue;
    s->index = k;
    splats.push_back(*s);
  }
  std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
  });

  struct Footprint {
    Eigen::Matrix2d conic;
    int x0, x1, y0, y1;
  };
  std::vector<Footprint> fp(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const auto& s = splats[i];
    const double det = s.cov.determinant();
    fp[i].conic = Eigen::Matrix2d{{s.cov(1, 1) / det, -s.cov(0, 1) / det}, {-s.cov(1, 0) / det, s.cov(0, 0) / det}};
    const double mid = 0.5 * (s.cov(0, 0) + s.cov(1, 1));
    const double lmax = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double r = kCutoffSigma * std::sqrt(lmax);
    fp[i].x0 = std::max(0, static_cast<int>(std::floor(s.mean.x() - r)));
    fp[i].x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(s.mean.x() + r)));
    fp[i].y0 = std::max(0, static_cast<int>(std::floor(s.mean.y() - r)));
    fp[i].y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(s.mean.y() + r)));
  }

  RenderOutput out{Image(cam.width, cam.height), std::vector<double>(static_cast<std::size_t>(cam.width) * cam.height)};
  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> trans(cam.width, 1.0);
    std::vector<double> accum(static_cast<std::size_t>(cam.width) * 3, 0.0);
    std::vector<double> weight(cam.width, 0.0);
    for (std::size_t i = 0; i < splats.size(); ++i) {
      const auto& f = fp[i];
      if (y < f.y0 || y > f.y1) continue;
      const auto& s = splats[i];
      const double dy = y - s.mean.y();
      for (int x = f.x0; x <= f.x1; ++x) {
        double& t = trans[x];
        if (t < kMinTransmittance) continue;
        const double dx = x - s.mean.x();
        const double d = f.conic(0, 0) * dx * dx + 2.0 * f.conic(0, 1) * dx * dy + f.conic(1, 1) * dy * dy;
        if (d > kCutoffSigma * kCutoffSigma) continue;
        const double alpha = s.opacity * std::exp(-0.5 * d);
        const double w = alpha * t;
        for (int c = 0; c < 3; ++c) accum[x * 3 + c] += w * s.color[c];
        weight[x] += w;
        t *= 1.0 - alpha;
      }
    }
    for (int x = 0; x < cam.width; ++x) {
      for (int c = 0; c < 3; ++c)
        out.image.at(x, y, c) = static_cast<float>(std::clamp(accum[x * 3 + c], 0.0, 1.0));
      out.weight_sum[static_cast<std::size_t>(y) * cam.width + x] = weight[x];
    }
  });
  return out;
}

Image render(std::span<const StateVec> states, std::span<const CanonicalGaussian> attrs, const Camera& cam) {
  return render_detailed(states, attrs, cam).image;
}

namespace {

void check_same(const Image& a, const Image& b, const char* what) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
}

// Separable zero-padded Gaussian blur of one channel.
std::vector<double> blur(const std::vector<double>& src, int w, int h, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size(), 0.0), dst(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) acc += kernel[i + r] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) acc += kernel[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      dst[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return dst;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_same(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    s += d * d;
  }
  return s / static_cast<double>(a.rgb.size());
}

double l1(const Image& a, const Image& b) {
  check_same(a, b, "l1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) s += std::abs(static_cast<double>(a.rgb[i]) - b.rgb[i]);
  return s / static_cast<double>(a.rgb.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b) {
  check_same(a, b, "ssim");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  std::vector<double> kernel(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    kernel[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  const double ksum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= ksum;

  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.rgb[i * 3 + c];
      y[i] = b.rgb[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h, kernel), my = blur(y, w, h, kernel);
    const auto sxx = blur(xx, w, h, kernel), syy = blur(yy, w, h, kernel), sxy = blur(xy, w, h, kernel);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(n);
  }
  return total / 3.0;
}

double combined_loss(const Image& a, const Image& b, double lambda) {
  return (1.0 - lambda) * l1(a, b) + lambda * (1.0 - ssim(a, b));
}

namespace {

unsigned char to_byte(float v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (auto& v : out.rgb) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write image: " + path.string());
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.rgb.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = to_byte(img.rgb[i]);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing image: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0) throw std::runtime_error("unsupported PPM: " + path.string());
  is.get();
  Image img(w, h);
  std::vector<unsigned char> bytes(img.rgb.size());
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("truncated PPM: " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = static_cast<float>(bytes[i]) / 255.0f;
  return img;
}

}  // namespace odegs
