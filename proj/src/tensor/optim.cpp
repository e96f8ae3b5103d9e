#include "acmf/optim.hpp"

#include <cmath>

namespace acmf {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const NamedTensors<T>& params, AdamConfig config) {
  AdamState<T> state;
  state.config = config;
  for (const auto& [name, p] : params) {
    state.first_moment.emplace_back(name, Tensor<T>(p.shape()));
    state.second_moment.emplace_back(name, Tensor<T>(p.shape()));
  }
  return state;
}

template <typename T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " tensors, parameters have " + std::to_string(params.size()));
  }
  const auto& cfg = state.config;
  const std::uint64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    auto& m = state.first_moment[i].second;
    auto& v = state.second_moment[i].second;
    if (state.first_moment[i].first != name || m.shape() != p.shape() || v.shape() != p.shape()) {
      throw ShapeError("adam_step: state for '" + name + "' does not mirror parameter shape " + to_string(p.shape()));
    }
    const Tensor<T>* g = nullptr;
    for (const auto& [gname, gt] : grads) {
      if (gname == name) {
        g = &gt;
        break;
      }
    }
    if (g && g->shape() != p.shape()) {
      throw ShapeError("adam_step: gradient " + to_string(g->shape()) + " vs parameter " + to_string(p.shape()) +
                       " for '" + name + "'");
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g ? static_cast<double>((*g)[j]) : 0.0;
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      if (!g) continue;
      const double update = cfg.lr * (mj / c1) / (std::sqrt(vj / c2) + cfg.epsilon);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
    }
  }
  state.step = t;
}

template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T eps) {
  if (!(eps > T(0))) throw Error("finite_diff_grad: eps must be positive");
  Tensor<T> grad(x.shape());
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + eps;
    const T up = f(probe);
    probe[i] = orig - eps;
    const T down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (T(2) * eps);
  }
  return grad;
}

template <typename T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("relative_error: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    diff += d * d;
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(NamedTensors<float>&, const NamedTensors<float>&, AdamState<float>&);
template void adam_step(NamedTensors<double>&, const NamedTensors<double>&, AdamState<double>&);
template Tensor<float> finite_diff_grad(const std::function<float(const Tensor<float>&)>&, const Tensor<float>&, float);
template Tensor<double> finite_diff_grad(const std::function<double(const Tensor<double>&)>&, const Tensor<double>&,
                                         double);
template double relative_error(const Tensor<float>&, const Tensor<float>&);
template double relative_error(const Tensor<double>&, const Tensor<double>&);

}  // namespace acmf
