#pragma once

// Every differentiable tensor op with input shapes and a sampling range that
// keeps it smooth, for finite-difference checks.

#include <functional>
#include <vector>

#include "odegs/tensor.hpp"

namespace odegs::testing {

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  std::function<Tensor(const std::vector<Tensor>&)> op;
  double lo = -2.0;
  double hi = 2.0;
};

inline std::vector<OpCase> op_cases() {
  return {
      {"add", {{3, 4}, {3, 4}}, [](const auto& x) { return add(x[0], x[1]); }},
      {"add_broadcast", {{2, 3, 4}, {4}}, [](const auto& x) { return add(x[0], x[1]); }},
      {"sub", {{3, 4}, {4}}, [](const auto& x) { return sub(x[0], x[1]); }},
      {"mul", {{2, 5}, {2, 5}}, [](const auto& x) { return mul(x[0], x[1]); }},
      {"mul_self", {{6}}, [](const auto& x) { return mul(x[0], x[0]); }},
      {"div", {{3, 3}, {3, 3}}, [](const auto& x) { return div(x[0], add_scalar(square(x[1]), 0.5)); }},
      {"add_scalar", {{4}}, [](const auto& x) { return add_scalar(x[0], 1.5); }},
      {"mul_scalar", {{4}}, [](const auto& x) { return mul_scalar(x[0], -0.7); }},
      {"square", {{5}}, [](const auto& x) { return square(x[0]); }},
      {"lincomb",
       {{2, 3}, {2, 3}, {2, 3}},
       [](const auto& x) {
         const double c[] = {0.5, -1.25, 2.0};
         return lincomb(c, x);
       }},
      {"matmul", {{3, 4}, {4, 2}}, [](const auto& x) { return matmul(x[0], x[1]); }},
      {"matmul_shared_rhs", {{2, 3, 4}, {4, 5}}, [](const auto& x) { return matmul(x[0], x[1]); }},
      {"matmul_batched", {{2, 3, 4}, {2, 4, 3}}, [](const auto& x) { return matmul(x[0], x[1]); }},
      {"tanh", {{7}}, [](const auto& x) { return tanh(x[0]); }},
      {"relu", {{7}}, [](const auto& x) { return relu(x[0]); }},
      {"exp", {{7}}, [](const auto& x) { return exp(x[0]); }},
      {"log", {{7}}, [](const auto& x) { return log(x[0]); }, 0.1, 2.0},
      {"sqrt", {{7}}, [](const auto& x) { return sqrt(x[0]); }, 0.1, 2.0},
      {"abs", {{7}}, [](const auto& x) { return abs(x[0]); }},
      {"sin", {{7}}, [](const auto& x) { return sin(x[0]); }},
      {"cos", {{7}}, [](const auto& x) { return cos(x[0]); }},
      {"sum", {{3, 2}}, [](const auto& x) { return mul(sum(x[0]), sum(x[0])); }},
      {"mean", {{3, 2}}, [](const auto& x) { return mul(mean(x[0]), mean(x[0])); }},
      {"sum_axis", {{2, 3, 4}}, [](const auto& x) { return sum_axis(x[0], 1); }},
      {"mean_axis", {{2, 3, 4}}, [](const auto& x) { return mean_axis(x[0], -1); }},
      {"softmax", {{3, 5}}, [](const auto& x) { return softmax(x[0]); }},
      {"layer_norm", {{4, 6}}, [](const auto& x) { return layer_norm(x[0]); }},
      {"concat",
       {{2, 3}, {2, 2}},
       [](const auto& x) { return concat(std::vector<Tensor>{x[0], x[1]}, 1); }},
      {"slice", {{3, 6}}, [](const auto& x) { return slice(x[0], 1, 2, 3); }},
      {"transpose", {{2, 3, 4}}, [](const auto& x) { return transpose(x[0]); }},
      {"reshape", {{2, 6}}, [](const auto& x) { return reshape(x[0], {3, 4}); }},
  };
}

}  // namespace odegs::testing
