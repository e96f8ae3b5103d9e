#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "acmf/tensor.hpp"

namespace acmf {

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.995;
  double epsilon = 1e-8;
};

// Moment accumulators mirror the parameter list (same names, same order,
// same shapes). step counts completed updates.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  NamedTensors<T> first_moment;
  NamedTensors<T> second_moment;

  static AdamState zeros_like(const NamedTensors<T>& params, AdamConfig config);
};

// Bias-corrected Adam:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Gradients are matched to parameters by name; a parameter without a
// gradient entry is left untouched (its moments still decay).
template <typename T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state);

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps), one coordinate at a time.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T eps);

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
template <typename T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace acmf
