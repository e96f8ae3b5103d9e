#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "acmf/tensor.hpp"

namespace acmf {

enum class OpKind {
  kInput,
  kParameter,
  kAdd,
  kSubtract,
  kMultiply,
  kScale,
  kRelu,
  kConv2d,
  kDepthwiseConv2d,
  kDense,
  kGlobalAvgPool,
  kSpatialMean,
  kBatchMean,
  kBilinearUpsample,
  kSoftmax,
  kSumOfSquares,
  kSoftmaxCrossEntropy,
  kDotConstant,
  kChannelCombine,
  kNormalizeMax,
};

std::string_view op_name(OpKind kind);

struct NodeId {
  std::size_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

struct ConvAttrs {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

template <typename T>
class Gradients;

// Append-only computation graph. Every op evaluates eagerly and keeps its
// forward value on the node; backward() replays the tape in reverse. Parents
// always have smaller ids than their children, so the graph is acyclic by
// construction.
//
// Shape rules (no broadcasting):
//   add/subtract/multiply   a, b same shape -> same shape
//   scale, relu             x -> same shape
//   conv2d                  x[N,C,H,W], w[K,C,kh,kw], bias[K]? -> [N,K,OH,OW]
//   depthwise_conv2d        x[N,C,H,W], w[C,1,kh,kw], bias[C]? -> [N,C,OH,OW]
//   dense                   x[N,I], w[O,I], bias[O]? -> [N,O]
//   global_avg_pool         x[N,C,H,W] -> [N,C]
//   spatial_mean            x[N,C,H,W] -> [N,C,1,1]
//   batch_mean              x[N,C,H,W] -> [1,C,H,W]
//   bilinear_upsample       x[N,C,h,w] -> [N,C,H,W]
//   softmax                 x[N,K] -> [N,K] (rows)
//   sum_of_squares          any -> scalar
//   softmax_cross_entropy   logits[N,K], labels N in [0,K) -> scalar batch mean
//   dot_constant            x, constant c (same shape) -> scalar sum(x * c)
//   channel_combine         a[N,K,h,w], constant weights[N,K] -> [N,1,h,w]
//   normalize_max           x[N,C,H,W] -> per-sample x / max(x); all-nonpositive samples map to 0
template <typename T>
class Graph {
 public:
  NodeId input(Tensor<T> value);
  NodeId parameter(std::string name, Tensor<T> value);

  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId multiply(NodeId a, NodeId b);
  NodeId scale(NodeId x, T factor);
  NodeId relu(NodeId x);
  NodeId conv2d(NodeId x, NodeId w, std::optional<NodeId> bias, ConvAttrs attrs);
  NodeId depthwise_conv2d(NodeId x, NodeId w, std::optional<NodeId> bias, ConvAttrs attrs);
  NodeId dense(NodeId x, NodeId w, std::optional<NodeId> bias);
  NodeId global_avg_pool(NodeId x);
  NodeId spatial_mean(NodeId x);
  NodeId batch_mean(NodeId x);
  NodeId bilinear_upsample(NodeId x, std::size_t out_height, std::size_t out_width);
  NodeId softmax(NodeId x);
  NodeId sum_of_squares(NodeId x);
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);
  NodeId dot_constant(NodeId x, Tensor<T> constant);
  NodeId channel_combine(NodeId activations, Tensor<T> weights);
  NodeId normalize_max(NodeId x);

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id.index).value; }
  OpKind kind(NodeId id) const { return nodes_.at(id.index).kind; }
  const std::vector<std::size_t>& parents(NodeId id) const { return nodes_.at(id.index).parents; }
  const std::string& name(NodeId id) const { return nodes_.at(id.index).name; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse pass from a scalar-shaped node. Parameters receive gradients;
  // input leaves do not.
  Gradients<T> backward(NodeId loss) const;

 private:
  struct Node {
    OpKind kind = OpKind::kInput;
    std::vector<std::size_t> parents;
    Tensor<T> value;
    Tensor<T> aux;                  // constants and saved intermediates
    std::vector<std::size_t> index_aux;  // argmax positions and similar
    std::vector<int> labels;
    ConvAttrs conv;
    T scalar = T(0);
    bool needs_grad = false;
    std::string name;
  };

  NodeId push(Node node);
  bool any_needs_grad(std::initializer_list<std::size_t> ids) const;
  void backward_node(std::size_t id, const Tensor<T>& grad, std::vector<Tensor<T>>& grads) const;

  std::vector<Node> nodes_;
};

template <typename T>
class Gradients {
 public:
  Gradients(std::vector<Tensor<T>> grads, std::vector<std::pair<std::string, std::size_t>> params,
            std::vector<Shape> param_shapes)
      : grads_(std::move(grads)), params_(std::move(params)), param_shapes_(std::move(param_shapes)) {}

  // Gradient of the loss w.r.t. an intermediate node; nullptr when no
  // gradient reached it.
  const Tensor<T>* at(NodeId id) const;

  // Parameter gradients in registration order; parameters the loss does not
  // depend on get zero tensors.
  std::vector<std::pair<std::string, Tensor<T>>> parameters() const;
  Tensor<T> parameter(std::string_view name) const;

 private:
  std::vector<Tensor<T>> grads_;
  std::vector<std::pair<std::string, std::size_t>> params_;
  std::vector<Shape> param_shapes_;
};

extern template class Graph<float>;
extern template class Graph<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;

}  // namespace acmf
