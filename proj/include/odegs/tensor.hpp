#pragma once

// Dense row-major tensors of doubles with a reverse-mode differentiation
// record. Operations append a backward closure to the active GradRecord
// whenever one of their inputs is tracked; GradRecord::backward replays the
// closures in reverse append order.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace odegs {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};
}  // namespace detail

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(int axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  // Gradient buffer; zeros when nothing has flowed into this tensor.
  std::span<const double> grad() const { return impl_->grad_buffer(); }
  std::span<double> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  // Copy without any differentiation history.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Append-only list of backward closures. Exactly one record is active per
// thread; ops executed while no record is active are not recorded.
class GradRecord {
 public:
  struct Node {
    std::string_view kind;
    std::function<void()> backward;
  };

  void append(std::string_view kind, std::function<void()> fn);
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Seeds d(loss)/d(loss) = 1, visits nodes in reverse append order, then
  // clears the record. Gradients accumulate into leaf buffers.
  void backward(const Tensor& loss);
  void clear() { nodes_.clear(); }
  // Drops nodes appended after the first `n`; used to discard rejected work.
  void truncate(std::size_t n) {
    if (n < nodes_.size()) nodes_.resize(n);
  }

  static GradRecord* active();

 private:
  friend class RecordScope;
  std::vector<Node> nodes_;
};

// Makes `rec` the active record for the current thread for the scope's
// lifetime. Passing nullptr suspends recording.
class RecordScope {
 public:
  explicit RecordScope(GradRecord* rec);
  ~RecordScope();
  RecordScope(const RecordScope&) = delete;
  RecordScope& operator=(const RecordScope&) = delete;

 private:
  GradRecord* prev_;
};

// Elementwise binary ops. Shapes must be equal, or one shape must be a suffix
// of the other (broadcast over leading batch extents).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

// Fused sum_i coeffs[i] * terms[i]; all terms share one shape.
Tensor lincomb(std::span<const double> coeffs, std::span<const Tensor> terms);

// [..., N, K] x [K, M] (shared right operand) or [B.., N, K] x [B.., K, M].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);

Tensor sum(const Tensor& a);   // -> shape {1}
Tensor mean(const Tensor& a);  // -> shape {1}
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);

Tensor softmax(const Tensor& a);  // last axis
Tensor layer_norm(const Tensor& a, double eps = 1e-5);  // last axis, no affine

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t len);
Tensor transpose(const Tensor& a);  // swaps the last two axes
Tensor reshape(const Tensor& a, Shape shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace odegs
