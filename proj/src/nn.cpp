#include "odegs/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace odegs {

Tensor ParamStore::add(std::string name, Shape shape, std::vector<double> init) {
  if (find(name) != nullptr) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  Tensor t = Tensor::parameter(std::move(shape), std::move(init));
  entries_.emplace_back(std::move(name), t);
  return t;
}

Tensor ParamStore::add_zeros(std::string name, Shape shape) {
  const std::size_t n = shape_numel(shape);
  return add(std::move(name), std::move(shape), std::vector<double>(n, 0.0));
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

Tensor* ParamStore::find(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t c = 0;
  for (const auto& [n, t] : entries_) c += t.numel();
  return c;
}

std::vector<double> ParamStore::snapshot() const {
  std::vector<double> flat;
  flat.reserve(scalar_count());
  for (const auto& [n, t] : entries_) flat.insert(flat.end(), t.data().begin(), t.data().end());
  return flat;
}

void ParamStore::restore(const std::vector<double>& flat) {
  if (flat.size() != scalar_count()) throw std::invalid_argument("ParamStore::restore: size mismatch");
  std::size_t off = 0;
  for (auto& [n, t] : entries_) {
    auto d = t.mutable_data();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), d.size(), d.begin());
    off += d.size();
  }
}

std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = u(rng);
  return w;
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(store.add(name + ".weight", {in, out}, xavier_uniform(in, out, rng))),
      bias(store.add_zeros(name + ".bias", {out})) {}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, std::size_t dim)
    : gain(store.add(name + ".gain", {dim}, std::vector<double>(dim, 1.0))), bias(store.add_zeros(name + ".bias", {dim})) {}

Mlp::Mlp(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths, Activation a, Rng& rng)
    : act(a) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers.emplace_back(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = act == Activation::kTanh ? tanh(h) : relu(h);
  }
  return h;
}

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(&store), cfg_(cfg) {
  for (const auto& [n, t] : store.entries()) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

double Adam::step(double lr) {
  auto& entries = store_->entries();
  double sq = 0.0;
  for (auto& [n, t] : entries)
    for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.max_grad_norm > 0.0 && norm > cfg_.max_grad_norm) ? cfg_.max_grad_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& t = entries[p].second;
    auto w = t.mutable_data();
    const auto g = t.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
  }
  return norm;
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
  if (total_steps <= 1) return lr_max;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace odegs
