#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acmf/graph.hpp"
#include "acmf/model.hpp"
#include "acmf/tensor.hpp"

namespace acmf {

// H x W nonnegative saliency map at model input resolution.
template <typename T>
struct AttentionMap {
  Tensor<T> values;  // [H, W]
  bool normalized = false;

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
};

inline constexpr int kFakeClass = 1;

// Nodes appended to a forward pass for Grad-CAM. The channel weights are
// computed from the gradient of the target logit and enter the graph as
// constants, so a loss built on `normalized` reaches the parameters only
// through the tap activations.
template <typename T>
struct GradCamNodes {
  Tensor<T> channel_weights;  // [N, K] spatial means of d logit / d A
  NodeId raw;                 // relu(sum_k alpha_k A^k), [N,1,h,w]
  NodeId upsampled;           // [N,1,H,W]
  NodeId normalized;          // per-sample max-normalized, [N,1,H,W]
};

template <typename T>
GradCamNodes<T> append_gradcam(ForwardPass<T>& pass, int target_class, std::size_t out_height, std::size_t out_width);

// Single image C x H x W.
template <typename T>
AttentionMap<T> gradcam_map(const ModelConfig& config, const ModelParams<T>& params, const Tensor<T>& image,
                            int target_class = kFakeClass);

// One map per image of an N x C x H x W batch (maps are independent per sample).
template <typename T>
std::vector<AttentionMap<T>> gradcam_maps(const ModelConfig& config, const ModelParams<T>& params,
                                          const Tensor<T>& batch, int target_class = kFakeClass);

// Pixelwise mean, not renormalized. Sums in list order, then divides.
template <typename T>
AttentionMap<T> mean_attention(const std::vector<AttentionMap<T>>& maps);

// Batch mean of -log softmax(logits)[label].
template <typename T>
NodeId cls_loss(Graph<T>& graph, NodeId logits, const std::vector<int>& labels);
template <typename T>
double cls_loss_value(const Tensor<T>& logits, const std::vector<int>& labels);

// || mean_i maps_i - reference ||_2^2 (pixel sum of squares) on the graph.
// `maps` is [N,1,H,W]; the reference is a constant.
template <typename T>
NodeId fac_loss(Graph<T>& graph, NodeId maps, const AttentionMap<T>& reference);
template <typename T>
double fac_loss_value(const std::vector<AttentionMap<T>>& video_maps, const AttentionMap<T>& reference);

// Binary PGM (P5, maxval 255). With binarize_top = q, pixels at or above the
// (1 - q) quantile become 255 and the rest 0; the quantile is the sorted
// value at index floor((1 - q) * (n - 1)).
template <typename T>
std::string to_pgm(const AttentionMap<T>& map, std::optional<double> binarize_top = std::nullopt);

}  // namespace acmf
