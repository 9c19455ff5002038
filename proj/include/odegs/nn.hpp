#pragma once

// Parameter containers and the small set of layers shared by the
// interpolation model and the forecaster.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "odegs/tensor.hpp"

namespace odegs {

using Rng = std::mt19937_64;

// Ordered, named collection of trainable leaves.
class ParamStore {
 public:
  Tensor add(std::string name, Shape shape, std::vector<double> init);
  Tensor add_zeros(std::string name, Shape shape);

  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  const Tensor* find(const std::string& name) const;
  Tensor* find(const std::string& name);

  void zero_grad();
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Flattened copy of every parameter value, in registration order.
  std::vector<double> snapshot() const;
  void restore(const std::vector<double>& flat);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }
  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const { return add(mul(layer_norm(x), gain), bias); }
};

enum class Activation { kTanh, kRelu };

// Stack of linear maps with an activation between them and a linear output.
struct Mlp {
  std::vector<Linear> layers;
  Activation act = Activation::kRelu;

  Mlp() = default;
  // widths = {in, hidden..., out}; widths.size() - 1 linear maps.
  Mlp(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths, Activation act, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg = {});
  // Applies one update using the gradients currently held by the store.
  // Returns the global gradient norm before clipping.
  double step(double lr);
  std::int64_t steps() const { return t_; }

 private:
  ParamStore* store_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

// Cosine annealing that hits lr_max at step 0 and lr_min at total_steps-1.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min);

}  // namespace odegs
