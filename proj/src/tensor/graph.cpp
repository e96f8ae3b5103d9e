#include "acmf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acmf/kernels.hpp"

namespace acmf {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kAdd: return "add";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kDepthwiseConv2d: return "depthwise_conv2d";
    case OpKind::kDense: return "dense";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kSpatialMean: return "spatial_mean";
    case OpKind::kBatchMean: return "batch_mean";
    case OpKind::kBilinearUpsample: return "bilinear_upsample";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSumOfSquares: return "sum_of_squares";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kDotConstant: return "dot_constant";
    case OpKind::kChannelCombine: return "channel_combine";
    case OpKind::kNormalizeMax: return "normalize_max";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_mismatch(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

[[noreturn]] void bad_shape(OpKind kind, const Shape& a, const std::string& expected) {
  throw ShapeError(std::string(op_name(kind)) + ": shape " + to_string(a) + " does not match " + expected);
}

template <typename T>
void accumulate(std::vector<Tensor<T>>& grads, std::size_t id, Tensor<T> g) {
  // Unset slots hold a [0]-shaped tensor; a real scalar gradient has one value.
  Tensor<T>& slot = grads[id];
  if (slot.values().empty()) {
    slot = std::move(g);
    return;
  }
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

kernels::ConvGeometry conv_geometry(const Shape& x, const Shape& w, ConvAttrs attrs, bool depthwise) {
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.in_height = x[2];
  g.in_width = x[3];
  g.out_channels = depthwise ? x[1] : w[0];
  g.kernel_height = w[2];
  g.kernel_width = w[3];
  g.stride = attrs.stride;
  g.pad = attrs.pad;
  return g;
}

}  // namespace

template <typename T>
NodeId Graph<T>::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericalError(std::string(op_name(node.kind)) + ": produced a non-finite value");
  }
  nodes_.push_back(std::move(node));
  return NodeId{nodes_.size() - 1};
}

template <typename T>
bool Graph<T>::any_needs_grad(std::initializer_list<std::size_t> ids) const {
  return std::any_of(ids.begin(), ids.end(), [&](std::size_t i) { return nodes_[i].needs_grad; });
}

template <typename T>
NodeId Graph<T>::input(Tensor<T> value) {
  Node n;
  n.kind = OpKind::kInput;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::parameter(std::string name, Tensor<T> value) {
  Node n;
  n.kind = OpKind::kParameter;
  n.value = std::move(value);
  n.needs_grad = true;
  n.name = std::move(name);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.shape() != vb.shape()) shape_mismatch(OpKind::kAdd, va.shape(), vb.shape());
  Node n;
  n.kind = OpKind::kAdd;
  n.parents = {a.index, b.index};
  n.value = Tensor<T>(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + vb[i];
  n.needs_grad = any_needs_grad({a.index, b.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::subtract(NodeId a, NodeId b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.shape() != vb.shape()) shape_mismatch(OpKind::kSubtract, va.shape(), vb.shape());
  Node n;
  n.kind = OpKind::kSubtract;
  n.parents = {a.index, b.index};
  n.value = Tensor<T>(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] - vb[i];
  n.needs_grad = any_needs_grad({a.index, b.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::multiply(NodeId a, NodeId b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.shape() != vb.shape()) shape_mismatch(OpKind::kMultiply, va.shape(), vb.shape());
  Node n;
  n.kind = OpKind::kMultiply;
  n.parents = {a.index, b.index};
  n.value = Tensor<T>(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] * vb[i];
  n.needs_grad = any_needs_grad({a.index, b.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::scale(NodeId x, T factor) {
  const auto& vx = value(x);
  Node n;
  n.kind = OpKind::kScale;
  n.parents = {x.index};
  n.scalar = factor;
  n.value = Tensor<T>(vx.shape());
  for (std::size_t i = 0; i < vx.size(); ++i) n.value[i] = vx[i] * factor;
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::relu(NodeId x) {
  const auto& vx = value(x);
  Node n;
  n.kind = OpKind::kRelu;
  n.parents = {x.index};
  n.value = Tensor<T>(vx.shape());
  for (std::size_t i = 0; i < vx.size(); ++i) n.value[i] = vx[i] > T(0) ? vx[i] : T(0);
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId x, NodeId w, std::optional<NodeId> bias, ConvAttrs attrs) {
  const auto& vx = value(x);
  const auto& vw = value(w);
  if (vx.rank() != 4 || vw.rank() != 4 || vx.dim(1) != vw.dim(1)) shape_mismatch(OpKind::kConv2d, vx.shape(), vw.shape());
  if (attrs.stride == 0 || vx.dim(2) + 2 * attrs.pad < vw.dim(2) || vx.dim(3) + 2 * attrs.pad < vw.dim(3)) {
    shape_mismatch(OpKind::kConv2d, vx.shape(), vw.shape());
  }
  if (bias && value(*bias).shape() != Shape{vw.dim(0)}) bad_shape(OpKind::kConv2d, value(*bias).shape(), "bias [K]");
  const auto g = conv_geometry(vx.shape(), vw.shape(), attrs, false);
  Node n;
  n.kind = OpKind::kConv2d;
  n.parents = {x.index, w.index};
  if (bias) n.parents.push_back(bias->index);
  n.conv = attrs;
  n.value = Tensor<T>(Shape{g.batch, g.out_channels, g.out_height(), g.out_width()});
  std::span<const T> b = bias ? value(*bias).data() : std::span<const T>{};
  kernels::conv2d_forward<T>(g, vx.data(), vw.data(), b, n.value.data());
  n.needs_grad = any_needs_grad({x.index, w.index}) || (bias && nodes_[bias->index].needs_grad);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::depthwise_conv2d(NodeId x, NodeId w, std::optional<NodeId> bias, ConvAttrs attrs) {
  const auto& vx = value(x);
  const auto& vw = value(w);
  if (vx.rank() != 4 || vw.rank() != 4 || vw.dim(0) != vx.dim(1) || vw.dim(1) != 1) {
    shape_mismatch(OpKind::kDepthwiseConv2d, vx.shape(), vw.shape());
  }
  if (attrs.stride == 0 || vx.dim(2) + 2 * attrs.pad < vw.dim(2) || vx.dim(3) + 2 * attrs.pad < vw.dim(3)) {
    shape_mismatch(OpKind::kDepthwiseConv2d, vx.shape(), vw.shape());
  }
  if (bias && value(*bias).shape() != Shape{vx.dim(1)}) {
    bad_shape(OpKind::kDepthwiseConv2d, value(*bias).shape(), "bias [C]");
  }
  const auto g = conv_geometry(vx.shape(), vw.shape(), attrs, true);
  Node n;
  n.kind = OpKind::kDepthwiseConv2d;
  n.parents = {x.index, w.index};
  if (bias) n.parents.push_back(bias->index);
  n.conv = attrs;
  n.value = Tensor<T>(Shape{g.batch, g.out_channels, g.out_height(), g.out_width()});
  std::span<const T> b = bias ? value(*bias).data() : std::span<const T>{};
  kernels::depthwise_forward<T>(g, vx.data(), vw.data(), b, n.value.data());
  n.needs_grad = any_needs_grad({x.index, w.index}) || (bias && nodes_[bias->index].needs_grad);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::dense(NodeId x, NodeId w, std::optional<NodeId> bias) {
  const auto& vx = value(x);
  const auto& vw = value(w);
  if (vx.rank() != 2 || vw.rank() != 2 || vx.dim(1) != vw.dim(1)) shape_mismatch(OpKind::kDense, vx.shape(), vw.shape());
  if (bias && value(*bias).shape() != Shape{vw.dim(0)}) bad_shape(OpKind::kDense, value(*bias).shape(), "bias [O]");
  const std::size_t N = vx.dim(0), I = vx.dim(1), O = vw.dim(0);
  Node n;
  n.kind = OpKind::kDense;
  n.parents = {x.index, w.index};
  if (bias) n.parents.push_back(bias->index);
  n.value = Tensor<T>(Shape{N, O});
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t o = 0; o < O; ++o) {
      T acc = bias ? value(*bias)[o] : T(0);
      for (std::size_t i = 0; i < I; ++i) acc += vw[o * I + i] * vx[s * I + i];
      n.value[s * O + o] = acc;
    }
  }
  n.needs_grad = any_needs_grad({x.index, w.index}) || (bias && nodes_[bias->index].needs_grad);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::global_avg_pool(NodeId x) {
  const auto& vx = value(x);
  if (vx.rank() != 4) bad_shape(OpKind::kGlobalAvgPool, vx.shape(), "[N,C,H,W]");
  const std::size_t N = vx.dim(0), C = vx.dim(1), L = vx.dim(2) * vx.dim(3);
  Node n;
  n.kind = OpKind::kGlobalAvgPool;
  n.parents = {x.index};
  n.value = Tensor<T>(Shape{N, C});
  for (std::size_t i = 0; i < N * C; ++i) {
    T acc = 0;
    for (std::size_t p = 0; p < L; ++p) acc += vx[i * L + p];
    n.value[i] = acc / static_cast<T>(L);
  }
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::spatial_mean(NodeId x) {
  const auto& vx = value(x);
  if (vx.rank() != 4) bad_shape(OpKind::kSpatialMean, vx.shape(), "[N,C,H,W]");
  const std::size_t N = vx.dim(0), C = vx.dim(1), L = vx.dim(2) * vx.dim(3);
  Node n;
  n.kind = OpKind::kSpatialMean;
  n.parents = {x.index};
  n.value = Tensor<T>(Shape{N, C, 1, 1});
  for (std::size_t i = 0; i < N * C; ++i) {
    T acc = 0;
    for (std::size_t p = 0; p < L; ++p) acc += vx[i * L + p];
    n.value[i] = acc / static_cast<T>(L);
  }
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::batch_mean(NodeId x) {
  const auto& vx = value(x);
  if (vx.rank() != 4 || vx.dim(0) == 0) bad_shape(OpKind::kBatchMean, vx.shape(), "[N>=1,C,H,W]");
  const std::size_t N = vx.dim(0), L = vx.size() / N;
  Node n;
  n.kind = OpKind::kBatchMean;
  n.parents = {x.index};
  n.value = Tensor<T>(Shape{1, vx.dim(1), vx.dim(2), vx.dim(3)});
  for (std::size_t p = 0; p < L; ++p) {
    T acc = 0;
    for (std::size_t s = 0; s < N; ++s) acc += vx[s * L + p];
    n.value[p] = acc / static_cast<T>(N);
  }
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::bilinear_upsample(NodeId x, std::size_t out_height, std::size_t out_width) {
  const auto& vx = value(x);
  if (vx.rank() != 4 || out_height == 0 || out_width == 0) {
    bad_shape(OpKind::kBilinearUpsample, vx.shape(), "[N,C,h,w] with a nonempty target");
  }
  kernels::ResizeGeometry g{vx.dim(0) * vx.dim(1), vx.dim(2), vx.dim(3), out_height, out_width};
  Node n;
  n.kind = OpKind::kBilinearUpsample;
  n.parents = {x.index};
  n.value = Tensor<T>(Shape{vx.dim(0), vx.dim(1), out_height, out_width});
  kernels::bilinear_forward<T>(g, vx.data(), n.value.data());
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::softmax(NodeId x) {
  const auto& vx = value(x);
  if (vx.rank() != 2) bad_shape(OpKind::kSoftmax, vx.shape(), "[N,K]");
  const std::size_t N = vx.dim(0), K = vx.dim(1);
  Node n;
  n.kind = OpKind::kSoftmax;
  n.parents = {x.index};
  n.value = Tensor<T>(vx.shape());
  for (std::size_t s = 0; s < N; ++s) {
    T m = vx[s * K];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, vx[s * K + k]);
    T z = 0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(vx[s * K + k] - m);
    for (std::size_t k = 0; k < K; ++k) n.value[s * K + k] = std::exp(vx[s * K + k] - m) / z;
  }
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::sum_of_squares(NodeId x) {
  const auto& vx = value(x);
  Node n;
  n.kind = OpKind::kSumOfSquares;
  n.parents = {x.index};
  T acc = 0;
  for (std::size_t i = 0; i < vx.size(); ++i) acc += vx[i] * vx[i];
  n.value = Tensor<T>::scalar(acc);
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  const auto& vx = value(logits);
  if (vx.rank() != 2 || vx.dim(0) != labels.size() || vx.dim(0) == 0) {
    bad_shape(OpKind::kSoftmaxCrossEntropy, vx.shape(), "[N,K] with N labels, N >= 1");
  }
  const std::size_t N = vx.dim(0), K = vx.dim(1);
  Node n;
  n.kind = OpKind::kSoftmaxCrossEntropy;
  n.parents = {logits.index};
  n.aux = Tensor<T>(vx.shape());
  T total = 0;
  for (std::size_t s = 0; s < N; ++s) {
    if (labels[s] < 0 || static_cast<std::size_t>(labels[s]) >= K) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(labels[s]) + " outside [0," +
                       std::to_string(K) + ")");
    }
    T m = vx[s * K];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, vx[s * K + k]);
    T z = 0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(vx[s * K + k] - m);
    const T lse = m + std::log(z);
    for (std::size_t k = 0; k < K; ++k) n.aux[s * K + k] = std::exp(vx[s * K + k] - lse);
    total += lse - vx[s * K + static_cast<std::size_t>(labels[s])];
  }
  n.value = Tensor<T>::scalar(total / static_cast<T>(N));
  n.labels = std::move(labels);
  n.needs_grad = any_needs_grad({logits.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::dot_constant(NodeId x, Tensor<T> constant) {
  const auto& vx = value(x);
  if (vx.shape() != constant.shape()) shape_mismatch(OpKind::kDotConstant, vx.shape(), constant.shape());
  Node n;
  n.kind = OpKind::kDotConstant;
  n.parents = {x.index};
  T acc = 0;
  for (std::size_t i = 0; i < vx.size(); ++i) acc += vx[i] * constant[i];
  n.value = Tensor<T>::scalar(acc);
  n.aux = std::move(constant);
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::channel_combine(NodeId activations, Tensor<T> weights) {
  const auto& va = value(activations);
  if (va.rank() != 4 || weights.shape() != Shape{va.dim(0), va.dim(1)}) {
    shape_mismatch(OpKind::kChannelCombine, va.shape(), weights.shape());
  }
  const std::size_t N = va.dim(0), K = va.dim(1), L = va.dim(2) * va.dim(3);
  Node n;
  n.kind = OpKind::kChannelCombine;
  n.parents = {activations.index};
  n.value = Tensor<T>(Shape{N, 1, va.dim(2), va.dim(3)});
  for (std::size_t s = 0; s < N; ++s) {
    T* out = n.value.data().data() + s * L;
    for (std::size_t k = 0; k < K; ++k) {
      const T wk = weights[s * K + k];
      const T* a = va.data().data() + (s * K + k) * L;
      for (std::size_t p = 0; p < L; ++p) out[p] += wk * a[p];
    }
  }
  n.aux = std::move(weights);
  n.needs_grad = any_needs_grad({activations.index});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::normalize_max(NodeId x) {
  const auto& vx = value(x);
  if (vx.rank() != 4 || vx.dim(0) == 0) bad_shape(OpKind::kNormalizeMax, vx.shape(), "[N>=1,C,H,W]");
  const std::size_t N = vx.dim(0), L = vx.size() / N;
  Node n;
  n.kind = OpKind::kNormalizeMax;
  n.parents = {x.index};
  n.value = Tensor<T>(vx.shape());
  n.aux = Tensor<T>(Shape{N});
  n.index_aux.assign(N, std::numeric_limits<std::size_t>::max());
  for (std::size_t s = 0; s < N; ++s) {
    const T* in = vx.data().data() + s * L;
    const std::size_t arg = static_cast<std::size_t>(std::max_element(in, in + L) - in);
    const T m = in[arg];
    if (!(m > T(0))) continue;  // zero map stays zero
    n.aux[s] = m;
    n.index_aux[s] = arg;
    T* out = n.value.data().data() + s * L;
    for (std::size_t p = 0; p < L; ++p) out[p] = in[p] / m;
  }
  n.needs_grad = any_needs_grad({x.index});
  return push(std::move(n));
}

template <typename T>
Gradients<T> Graph<T>::backward(NodeId loss) const {
  if (loss.index >= nodes_.size()) throw ShapeError("backward: unknown loss node");
  const auto& lv = value(loss);
  if (lv.size() != 1) throw ShapeError("backward: loss must be scalar-shaped, got " + to_string(lv.shape()));

  std::vector<Tensor<T>> grads(nodes_.size(), Tensor<T>(Shape{0}));
  grads[loss.index] = Tensor<T>(lv.shape(), T(1));
  for (std::size_t id = loss.index + 1; id-- > 0;) {
    if (grads[id].values().empty()) continue;
    const Node& node = nodes_[id];
    if (node.kind == OpKind::kInput || node.kind == OpKind::kParameter) continue;
    backward_node(id, grads[id], grads);
  }

  std::vector<std::pair<std::string, std::size_t>> params;
  std::vector<Shape> shapes;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind == OpKind::kParameter) {
      params.emplace_back(nodes_[id].name, id);
      shapes.push_back(nodes_[id].value.shape());
    }
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind == OpKind::kInput) grads[id] = Tensor<T>(Shape{0});
  }
  return Gradients<T>(std::move(grads), std::move(params), std::move(shapes));
}

template <typename T>
void Graph<T>::backward_node(std::size_t id, const Tensor<T>& grad, std::vector<Tensor<T>>& grads) const {
  const Node& node = nodes_[id];
  auto wants = [&](std::size_t k) { return k < node.parents.size() && nodes_[node.parents[k]].needs_grad; };
  auto parent_value = [&](std::size_t k) -> const Tensor<T>& { return nodes_[node.parents[k]].value; };
  const auto dy = grad.data();

  switch (node.kind) {
    case OpKind::kInput:
    case OpKind::kParameter:
      return;
    case OpKind::kAdd:
    case OpKind::kSubtract: {
      if (wants(0)) accumulate(grads, node.parents[0], grad);
      if (wants(1)) {
        Tensor<T> g = grad;
        if (node.kind == OpKind::kSubtract) {
          for (auto& v : g.data()) v = -v;
        }
        accumulate(grads, node.parents[1], std::move(g));
      }
      return;
    }
    case OpKind::kMultiply: {
      const auto& a = parent_value(0);
      const auto& b = parent_value(1);
      if (wants(0)) {
        Tensor<T> g(a.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = dy[i] * b[i];
        accumulate(grads, node.parents[0], std::move(g));
      }
      if (wants(1)) {
        Tensor<T> g(b.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = dy[i] * a[i];
        accumulate(grads, node.parents[1], std::move(g));
      }
      return;
    }
    case OpKind::kScale: {
      if (!wants(0)) return;
      Tensor<T> g(grad.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = dy[i] * node.scalar;
      accumulate(grads, node.parents[0], std::move(g));
      return;
    }
    case OpKind::kRelu: {
      if (!wants(0)) return;
      const auto& x = parent_value(0);
      Tensor<T> g(x.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = x[i] > T(0) ? dy[i] : T(0);
      accumulate(grads, node.parents[0], std::move(g));
      return;
    }
    case OpKind::kConv2d:
    case OpKind::kDepthwiseConv2d: {
      const bool depthwise = node.kind == OpKind::kDepthwiseConv2d;
      const auto& x = parent_value(0);
      const auto& w = parent_value(1);
      const auto g = conv_geometry(x.shape(), w.shape(), node.conv, depthwise);
      if (wants(0)) {
        Tensor<T> dx(x.shape());
        if (depthwise) {
          kernels::depthwise_backward_input<T>(g, dy, w.data(), dx.data());
        } else {
          kernels::conv2d_backward_input<T>(g, dy, w.data(), dx.data());
        }
        accumulate(grads, node.parents[0], std::move(dx));
      }
      if (wants(1)) {
        Tensor<T> dw(w.shape());
        if (depthwise) {
          kernels::depthwise_backward_weight<T>(g, x.data(), dy, dw.data());
        } else {
          kernels::conv2d_backward_weight<T>(g, x.data(), dy, dw.data());
        }
        accumulate(grads, node.parents[1], std::move(dw));
      }
      if (wants(2)) {
        Tensor<T> db(Shape{g.out_channels});
        kernels::bias_backward<T>(g.batch, g.out_channels, g.out_height() * g.out_width(), dy, db.data());
        accumulate(grads, node.parents[2], std::move(db));
      }
      return;
    }
    case OpKind::kDense: {
      const auto& x = parent_value(0);
      const auto& w = parent_value(1);
      const std::size_t N = x.dim(0), I = x.dim(1), O = w.dim(0);
      if (wants(0)) {
        Tensor<T> dx(x.shape());
        for (std::size_t s = 0; s < N; ++s)
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t i = 0; i < I; ++i) dx[s * I + i] += dy[s * O + o] * w[o * I + i];
        accumulate(grads, node.parents[0], std::move(dx));
      }
      if (wants(1)) {
        Tensor<T> dw(w.shape());
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t i = 0; i < I; ++i) {
            T acc = 0;
            for (std::size_t s = 0; s < N; ++s) acc += dy[s * O + o] * x[s * I + i];
            dw[o * I + i] = acc;
          }
        accumulate(grads, node.parents[1], std::move(dw));
      }
      if (wants(2)) {
        Tensor<T> db(Shape{O});
        for (std::size_t o = 0; o < O; ++o) {
          T acc = 0;
          for (std::size_t s = 0; s < N; ++s) acc += dy[s * O + o];
          db[o] = acc;
        }
        accumulate(grads, node.parents[2], std::move(db));
      }
      return;
    }
    case OpKind::kGlobalAvgPool:
    case OpKind::kSpatialMean: {
      if (!wants(0)) return;
      const auto& x = parent_value(0);
      const std::size_t NC = x.dim(0) * x.dim(1), L = x.dim(2) * x.dim(3);
      Tensor<T> dx(x.shape());
      for (std::size_t i = 0; i < NC; ++i) {
        const T v = dy[i] / static_cast<T>(L);
        for (std::size_t p = 0; p < L; ++p) dx[i * L + p] = v;
      }
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kBatchMean: {
      if (!wants(0)) return;
      const auto& x = parent_value(0);
      const std::size_t N = x.dim(0), L = x.size() / N;
      Tensor<T> dx(x.shape());
      for (std::size_t s = 0; s < N; ++s)
        for (std::size_t p = 0; p < L; ++p) dx[s * L + p] = dy[p] / static_cast<T>(N);
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kBilinearUpsample: {
      if (!wants(0)) return;
      const auto& x = parent_value(0);
      kernels::ResizeGeometry g{x.dim(0) * x.dim(1), x.dim(2), x.dim(3), node.value.dim(2), node.value.dim(3)};
      Tensor<T> dx(x.shape());
      kernels::bilinear_backward<T>(g, dy, dx.data());
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kSoftmax: {
      if (!wants(0)) return;
      const auto& y = node.value;
      const std::size_t N = y.dim(0), K = y.dim(1);
      Tensor<T> dx(y.shape());
      for (std::size_t s = 0; s < N; ++s) {
        T dot = 0;
        for (std::size_t k = 0; k < K; ++k) dot += dy[s * K + k] * y[s * K + k];
        for (std::size_t k = 0; k < K; ++k) dx[s * K + k] = y[s * K + k] * (dy[s * K + k] - dot);
      }
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kSumOfSquares: {
      if (!wants(0)) return;
      const auto& x = parent_value(0);
      Tensor<T> dx(x.shape());
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = T(2) * x[i] * dy[0];
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      if (!wants(0)) return;
      const auto& p = node.aux;
      const std::size_t N = p.dim(0), K = p.dim(1);
      Tensor<T> dx(p.shape());
      const T scale = dy[0] / static_cast<T>(N);
      for (std::size_t s = 0; s < N; ++s)
        for (std::size_t k = 0; k < K; ++k) {
          const T onehot = static_cast<std::size_t>(node.labels[s]) == k ? T(1) : T(0);
          dx[s * K + k] = (p[s * K + k] - onehot) * scale;
        }
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kDotConstant: {
      if (!wants(0)) return;
      Tensor<T> dx(node.aux.shape());
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = node.aux[i] * dy[0];
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
    case OpKind::kChannelCombine: {
      if (!wants(0)) return;
      const auto& a = parent_value(0);
      const std::size_t N = a.dim(0), K = a.dim(1), L = a.dim(2) * a.dim(3);
      Tensor<T> da(a.shape());
      for (std::size_t s = 0; s < N; ++s)
        for (std::size_t k = 0; k < K; ++k) {
          const T wk = node.aux[s * K + k];
          for (std::size_t p = 0; p < L; ++p) da[(s * K + k) * L + p] = wk * dy[s * L + p];
        }
      accumulate(grads, node.parents[0], std::move(da));
      return;
    }
    case OpKind::kNormalizeMax: {
      if (!wants(0)) return;
      const auto& x = parent_value(0);
      const std::size_t N = x.dim(0), L = x.size() / N;
      Tensor<T> dx(x.shape());
      for (std::size_t s = 0; s < N; ++s) {
        if (node.index_aux[s] == std::numeric_limits<std::size_t>::max()) continue;
        const T m = node.aux[s];
        T dot = 0;
        for (std::size_t p = 0; p < L; ++p) {
          dx[s * L + p] = dy[s * L + p] / m;
          dot += dy[s * L + p] * node.value[s * L + p];
        }
        dx[s * L + node.index_aux[s]] -= dot / m;
      }
      accumulate(grads, node.parents[0], std::move(dx));
      return;
    }
  }
}

template <typename T>
const Tensor<T>* Gradients<T>::at(NodeId id) const {
  if (id.index >= grads_.size() || grads_[id.index].values().empty()) return nullptr;
  return &grads_[id.index];
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> Gradients<T>::parameters() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = grads_[params_[i].second];
    out.emplace_back(params_[i].first, g.values().empty() ? Tensor<T>(param_shapes_[i]) : g);
  }
  return out;
}

template <typename T>
Tensor<T> Gradients<T>::parameter(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].first == name) {
      const auto& g = grads_[params_[i].second];
      return g.values().empty() ? Tensor<T>(param_shapes_[i]) : g;
    }
  }
  throw ShapeError("no parameter named '" + std::string(name) + "' on the graph");
}

template class Graph<float>;
template class Graph<double>;
template class Gradients<float>;
template class Gradients<double>;

}  // namespace acmf
