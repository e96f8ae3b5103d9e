#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "acmf/graph.hpp"
#include "acmf/optim.hpp"
#include "acmf/rng.hpp"
#include "acmf/tensor.hpp"

namespace acmf {

// Desk-scale detector:
//   stem    conv3x3(C -> stem) + relu                       H x W
//   block1  depthwise3x3/s2 -> pointwise1x1 (stem -> b1),
//           shortcut conv1x1/s2, sum, relu                  H/2 x W/2
//   block2  same shape rule (b1 -> b2)                      H/4 x W/4   <- Grad-CAM tap
//   head    global average pool -> dense(b2 -> 2)
struct ModelConfig {
  std::size_t channels = 1;
  std::size_t input_size = 64;
  std::size_t stem_channels = 16;
  std::size_t block1_channels = 32;
  std::size_t block2_channels = 64;
  static constexpr std::size_t kClasses = 2;

  std::size_t tap_size() const { return input_size / 4; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in = 0;  // 0 marks a bias
};

// Names and shapes in architecture order.
std::vector<ParamSpec> param_specs(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);
bool is_head_param(std::string_view name);

template <typename T>
using ModelParams = NamedTensors<T>;

template <typename T>
const Tensor<T>& find_param(const ModelParams<T>& params, std::string_view name);
template <typename T>
Tensor<T>& find_param(ModelParams<T>& params, std::string_view name);

// Weights ~ U(-sqrt(3 / fan_in), sqrt(3 / fan_in)) (variance 1 / fan_in),
// biases zero. Each tensor draws from Rng::derive(seed, "init/" + name).
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename T>
struct ForwardPass {
  Graph<T> graph;
  NodeId input;
  NodeId tap;     // block2 output after relu, [N, b2, H/4, W/4]
  NodeId pooled;  // global_avg_pool(tap)
  NodeId logits;  // [N, 2]
};

// Batch layout N x C x H x W.
template <typename T>
ForwardPass<T> forward_with_taps(const ModelConfig& config, const ModelParams<T>& params, const Tensor<T>& batch);

// Softmax probability of class 1 ("fake") per sample.
template <typename T>
std::vector<double> fake_probabilities(const Tensor<T>& logits);

template <typename T>
std::vector<double> predict_proba(const ModelConfig& config, const ModelParams<T>& params, const Tensor<T>& batch);

template <typename T>
ModelParams<T> cast_params(const ModelParams<float>& params);

}  // namespace acmf
