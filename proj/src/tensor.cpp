#include "odegs/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace odegs {

namespace {

thread_local GradRecord* g_active = nullptr;

using ImplPtr = std::shared_ptr<detail::TensorImpl>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (g_active == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor make(Shape shape, std::vector<double> data) { return Tensor(std::move(shape), std::move(data)); }

// Registers `fn` as the backward step producing `out`.
void record(std::string_view kind, Tensor& out, std::function<void()> fn) {
  out.set_requires_grad(true);
  g_active->append(kind, std::move(fn));
}

std::size_t norm_axis(const Shape& s, int axis, std::string_view op) {
  const int r = static_cast<int>(s.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return static_cast<std::size_t>(a);
}

struct Broadcast {
  Shape out;
  std::size_t na;
  std::size_t nb;
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast broadcast(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() == b.shape() || is_suffix(b.shape(), a.shape())) return {a.shape(), a.numel(), b.numel()};
  if (is_suffix(a.shape(), b.shape())) return {b.shape(), a.numel(), b.numel()};
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class Fwd, class DA, class DB>
Tensor binary(std::string_view kind, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  const Broadcast bc = broadcast(a, b, kind);
  const std::size_t n = shape_numel(bc.out);
  std::vector<double> out(n);
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x[i % bc.na], y[i % bc.nb]);
  Tensor res = make(bc.out, std::move(out));
  if (tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = res.impl();
    record(kind, res, [pa, pb, po, bc, n, da, db] {
      if (po->grad.empty()) return;
      const auto& g = po->grad;
      const auto& x = pa->data;
      const auto& y = pb->data;
      if (pa->requires_grad) {
        auto& ga = pa->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) ga[i % bc.na] += g[i] * da(x[i % bc.na], y[i % bc.nb]);
      }
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) gb[i % bc.nb] += g[i] * db(x[i % bc.na], y[i % bc.nb]);
      }
    });
  }
  return res;
}

// Elementwise unary op; `deriv(x, y)` returns dy/dx given input and output.
template <class Fwd, class Deriv>
Tensor unary(std::string_view kind, const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  Tensor res = make(a.shape(), std::move(out));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record(kind, res, [pa, po, deriv] {
      if (po->grad.empty()) return;
      auto& ga = pa->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(pa->data[i], po->data[i]);
    });
  }
  return res;
}

// Layout of an axis inside a row-major shape: outer x extent x inner.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape r;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) r.push_back(s[i]);
  if (r.empty()) r.push_back(1);
  return r;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor() : Tensor(Shape{1}, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape.empty()) throw ShapeError("tensor: empty shape");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor: zero extent in " + shape_str(shape));
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape.empty()) throw ShapeError("tensor: empty shape");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor: zero extent in " + shape_str(shape));
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                     " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, v); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("from_rows: empty input");
  const std::size_t cols = rows.front().size();
  std::vector<double> d;
  d.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("from_rows: ragged rows");
    d.insert(d.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(d));
}

std::size_t Tensor::dim(int axis) const { return shape()[norm_axis(shape(), axis, "dim")]; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return impl_->data[0];
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data); }

void GradRecord::append(std::string_view kind, std::function<void()> fn) {
  nodes_.push_back({kind, std::move(fn)});
}

void GradRecord::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) {
    nodes_.clear();
    return;
  }
  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
  nodes_.clear();
}

GradRecord* GradRecord::active() { return g_active; }

RecordScope::RecordScope(GradRecord* rec) : prev_(g_active) { g_active = rec; }
RecordScope::~RecordScope() { g_active = prev_; }

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data())
    if (v == 0.0) throw std::domain_error("div: division by zero");
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor lincomb(std::span<const double> coeffs, std::span<const Tensor> terms) {
  if (coeffs.size() != terms.size() || terms.empty()) throw ShapeError("lincomb: coefficient/term count mismatch");
  const Shape& shape = terms.front().shape();
  for (const auto& t : terms)
    if (t.shape() != shape) throw ShapeError("lincomb: shape mismatch " + shape_str(shape) + " vs " + shape_str(t.shape()));
  std::vector<double> out(shape_numel(shape), 0.0);
  bool tracked = false;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (coeffs[k] == 0.0) continue;
    const auto d = terms[k].data();
    const double c = coeffs[k];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * d[i];
    tracked = tracked || terms[k].requires_grad();
  }
  Tensor res = make(shape, std::move(out));
  if (g_active != nullptr && tracked) {
    std::vector<std::pair<double, ImplPtr>> saved;
    for (std::size_t k = 0; k < terms.size(); ++k)
      if (coeffs[k] != 0.0 && terms[k].requires_grad()) saved.emplace_back(coeffs[k], terms[k].impl());
    ImplPtr po = res.impl();
    record("lincomb", res, [saved = std::move(saved), po] {
      if (po->grad.empty()) return;
      for (const auto& [c, p] : saved) {
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * po->grad[i];
      }
    });
  }
  return res;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto mismatch = [&] { return ShapeError("matmul: shape mismatch " + shape_str(sa) + " vs " + shape_str(sb)); };
  if (sa.size() < 2 || sb.size() < 2) throw mismatch();
  const std::size_t n = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t m = sb.back();
  if (k != kb) throw mismatch();

  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(m);
  std::vector<double> out(shape_numel(out_shape));

  if (sb.size() == 2) {
    const std::size_t rows = a.numel() / k;
    MapMat(out.data(), rows, m).noalias() = CMapMat(a.data().data(), rows, k) * CMapMat(b.data().data(), k, m);
    Tensor res = make(out_shape, std::move(out));
    if (tracking({&a, &b})) {
      ImplPtr pa = a.impl(), pb = b.impl(), po = res.impl();
      record("matmul", res, [pa, pb, po, rows, k, m] {
        if (po->grad.empty()) return;
        CMapMat g(po->grad.data(), rows, m);
        if (pa->requires_grad)
          MapMat(pa->grad_buffer().data(), rows, k).noalias() += g * CMapMat(pb->data.data(), k, m).transpose();
        if (pb->requires_grad)
          MapMat(pb->grad_buffer().data(), k, m).noalias() += CMapMat(pa->data.data(), rows, k).transpose() * g;
      });
    }
    return res;
  }

  if (sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin())) throw mismatch();
  const std::size_t batch = a.numel() / (n * k);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    MapMat(out.data() + bi * n * m, n, m).noalias() =
        CMapMat(a.data().data() + bi * n * k, n, k) * CMapMat(b.data().data() + bi * k * m, k, m);
  }
  Tensor res = make(out_shape, std::move(out));
  if (tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = res.impl();
    record("matmul_batched", res, [pa, pb, po, batch, n, k, m] {
      if (po->grad.empty()) return;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        CMapMat g(po->grad.data() + bi * n * m, n, m);
        if (pa->requires_grad)
          MapMat(pa->grad_buffer().data() + bi * n * k, n, k).noalias() +=
              g * CMapMat(pb->data.data() + bi * k * m, k, m).transpose();
        if (pb->requires_grad)
          MapMat(pb->grad_buffer().data() + bi * k * m, k, m).noalias() +=
              CMapMat(pa->data.data() + bi * n * k, n, k).transpose() * g;
      }
    });
  }
  return res;
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data())
    if (!(v >= 0.0)) throw std::domain_error("sqrt: negative input");
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sin(const Tensor& a) {
  return unary(
      "sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary(
      "cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor res = Tensor::scalar(s);
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("sum", res, [pa, po] {
      if (po->grad.empty()) return;
      auto& g = pa->grad_buffer();
      for (auto& v : g) v += po->grad[0];
    });
  }
  return res;
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_axis(const Tensor& a, int axis) {
  const std::size_t ax = norm_axis(a.shape(), axis, "sum_axis");
  const AxisSplit sp = split_at(a.shape(), ax);
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  const auto x = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.extent; ++j) {
      const double* src = x.data() + (o * sp.extent + j) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  Tensor res = make(drop_axis(a.shape(), ax), std::move(out));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("sum_axis", res, [pa, po, sp] {
      if (po->grad.empty()) return;
      auto& g = pa->grad_buffer();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.extent; ++j) {
          double* dst = g.data() + (o * sp.extent + j) * sp.inner;
          const double* src = po->grad.data() + o * sp.inner;
          for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
    });
  }
  return res;
}

Tensor mean_axis(const Tensor& a, int axis) {
  const std::size_t ax = norm_axis(a.shape(), axis, "mean_axis");
  return mul_scalar(sum_axis(a, axis), 1.0 / static_cast<double>(a.shape()[ax]));
}

Tensor softmax(const Tensor& a) {
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.numel() / d;
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) z += (yr[i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < d; ++i) yr[i] /= z;
  }
  Tensor res = make(a.shape(), std::move(out));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("softmax", res, [pa, po, rows, d] {
      if (po->grad.empty()) return;
      auto& ga = pa->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = po->data.data() + r * d;
        const double* g = po->grad.data() + r * d;
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < d; ++i) ga[r * d + i] += y[i] * (g[i] - dot);
      }
    });
  }
  return res;
}

Tensor layer_norm(const Tensor& a, double eps) {
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.numel() / d;
  std::vector<double> out(a.numel());
  std::vector<double> inv_std(rows);
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = (xr[i] - mu) * inv_std[r];
  }
  Tensor res = make(a.shape(), std::move(out));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("layer_norm", res, [pa, po, rows, d, inv_std = std::move(inv_std)] {
      if (po->grad.empty()) return;
      auto& ga = pa->grad_buffer();
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xh = po->data.data() + r * d;
        const double* g = po->grad.data() + r * d;
        double gm = 0.0, gx = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          gm += g[i];
          gx += g[i] * xh[i];
        }
        gm *= inv_d;
        gx *= inv_d;
        for (std::size_t i = 0; i < d; ++i) ga[r * d + i] += inv_std[r] * (g[i] - gm - xh[i] * gx);
      }
    });
  }
  return res;
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts.front().shape();
  const std::size_t ax = norm_axis(s0, axis, "concat");
  Shape out_shape = s0;
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == ax) || s[i] == s0[i];
    if (!ok) throw ShapeError("concat: shape mismatch " + shape_str(s0) + " vs " + shape_str(s));
    out_shape[ax] += s[ax];
  }
  const AxisSplit sp = split_at(out_shape, ax);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[ax] * sp.inner;
    const auto src = p.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(src.data() + o * w, w, out.data() + o * sp.extent * sp.inner + off);
    offsets.push_back(off);
    off += w;
    tracked = tracked || p.requires_grad();
  }
  Tensor res = make(out_shape, std::move(out));
  if (g_active != nullptr && tracked) {
    std::vector<ImplPtr> saved;
    for (const auto& p : parts) saved.push_back(p.impl());
    ImplPtr po = res.impl();
    record("concat", res, [saved = std::move(saved), offsets = std::move(offsets), po, sp, ax] {
      if (po->grad.empty()) return;
      const std::size_t row = sp.extent * sp.inner;
      for (std::size_t k = 0; k < saved.size(); ++k) {
        if (!saved[k]->requires_grad) continue;
        const std::size_t w = saved[k]->shape[ax] * sp.inner;
        auto& g = saved[k]->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < w; ++i) g[o * w + i] += po->grad[o * row + offsets[k] + i];
      }
    });
  }
  return res;
}

Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t len) {
  const std::size_t ax = norm_axis(a.shape(), axis, "slice");
  if (len == 0 || start + len > a.shape()[ax]) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of bounds for shape " + shape_str(a.shape()));
  }
  const AxisSplit sp = split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape[ax] = len;
  const std::size_t w = len * sp.inner;
  const std::size_t row = sp.extent * sp.inner;
  const std::size_t off = start * sp.inner;
  std::vector<double> out(sp.outer * w);
  const auto x = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o) std::copy_n(x.data() + o * row + off, w, out.data() + o * w);
  Tensor res = make(out_shape, std::move(out));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("slice", res, [pa, po, sp, w, row, off] {
      if (po->grad.empty()) return;
      auto& g = pa->grad_buffer();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < w; ++i) g[o * row + off + i] += po->grad[o * w + i];
    });
  }
  return res;
}

Tensor transpose(const Tensor& a) {
  const Shape& s = a.shape();
  if (s.size() < 2) throw ShapeError("transpose: needs rank >= 2, got " + shape_str(s));
  const std::size_t r = s[s.size() - 2];
  const std::size_t c = s.back();
  const std::size_t batch = a.numel() / (r * c);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  std::vector<double> out(a.numel());
  for (std::size_t b = 0; b < batch; ++b)
    MapMat(out.data() + b * r * c, c, r) = CMapMat(a.data().data() + b * r * c, r, c).transpose();
  Tensor res = make(out_shape, std::move(out));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("transpose", res, [pa, po, batch, r, c] {
      if (po->grad.empty()) return;
      auto& g = pa->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        MapMat(g.data() + b * r * c, r, c) += CMapMat(po->grad.data() + b * r * c, c, r).transpose();
    });
  }
  return res;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor res(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  if (tracking({&a})) {
    ImplPtr pa = a.impl(), po = res.impl();
    record("reshape", res, [pa, po] {
      if (po->grad.empty()) return;
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += po->grad[i];
    });
  }
  return res;
}

}  // namespace odegs
