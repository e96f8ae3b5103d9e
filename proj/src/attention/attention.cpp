#include "acmf/attention.hpp"

#include <algorithm>
#include <cmath>

namespace acmf {

namespace {

void check_target(int target_class) {
  if (target_class != 0 && target_class != 1) {
    throw ShapeError("gradcam: target class " + std::to_string(target_class) + " is not in {0, 1}");
  }
}

template <typename T>
void check_extents(const AttentionMap<T>& a, const AttentionMap<T>& b, const char* op) {
  if (a.values.shape() != b.values.shape()) {
    throw ShapeError(std::string(op) + ": map extents " + to_string(a.values.shape()) + " vs " + to_string(b.values.shape()));
  }
}

}  // namespace

template <typename T>
GradCamNodes<T> append_gradcam(ForwardPass<T>& pass, int target_class, std::size_t out_height, std::size_t out_width) {
  check_target(target_class);
  Graph<T>& g = pass.graph;
  const Tensor<T>& logits = g.value(pass.logits);
  const std::size_t N = logits.dim(0);

  Tensor<T> selector(logits.shape());
  for (std::size_t n = 0; n < N; ++n) selector[n * ModelConfig::kClasses + static_cast<std::size_t>(target_class)] = T(1);
  const NodeId target = g.dot_constant(pass.logits, selector);
  const auto grads = g.backward(target);

  const Tensor<T>& tap = g.value(pass.tap);
  const std::size_t K = tap.dim(1), L = tap.dim(2) * tap.dim(3);
  Tensor<T> alpha(Shape{N, K});
  if (const Tensor<T>* d_tap = grads.at(pass.tap)) {
    for (std::size_t i = 0; i < N * K; ++i) {
      T acc = 0;
      for (std::size_t p = 0; p < L; ++p) acc += (*d_tap)[i * L + p];
      alpha[i] = acc / static_cast<T>(L);
    }
  }

  GradCamNodes<T> nodes{alpha, {}, {}, {}};
  nodes.raw = g.relu(g.channel_combine(pass.tap, std::move(alpha)));
  nodes.upsampled = g.bilinear_upsample(nodes.raw, out_height, out_width);
  nodes.normalized = g.normalize_max(nodes.upsampled);
  return nodes;
}

template <typename T>
std::vector<AttentionMap<T>> gradcam_maps(const ModelConfig& config, const ModelParams<T>& params,
                                          const Tensor<T>& batch, int target_class) {
  check_target(target_class);
  auto pass = forward_with_taps(config, params, batch);
  const auto nodes = append_gradcam(pass, target_class, config.input_size, config.input_size);
  const Tensor<T>& maps = pass.graph.value(nodes.normalized);
  const std::size_t N = maps.dim(0), H = maps.dim(2), W = maps.dim(3);
  std::vector<AttentionMap<T>> out;
  out.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<T> v(maps.data().begin() + static_cast<std::ptrdiff_t>(n * H * W),
                     maps.data().begin() + static_cast<std::ptrdiff_t>((n + 1) * H * W));
    out.push_back({Tensor<T>(Shape{H, W}, std::move(v)), true});
  }
  return out;
}

template <typename T>
AttentionMap<T> gradcam_map(const ModelConfig& config, const ModelParams<T>& params, const Tensor<T>& image,
                            int target_class) {
  if (image.rank() != 3) throw ShapeError("gradcam_map: expected one C x H x W image, got " + to_string(image.shape()));
  Tensor<T> batch(Shape{1, image.dim(0), image.dim(1), image.dim(2)}, image.values());
  return gradcam_maps(config, params, batch, target_class).front();
}

template <typename T>
AttentionMap<T> mean_attention(const std::vector<AttentionMap<T>>& maps) {
  if (maps.empty()) throw ShapeError("mean_attention: empty map list");
  AttentionMap<T> out{Tensor<T>(maps.front().values.shape()), false};
  for (const auto& m : maps) {
    check_extents(m, maps.front(), "mean_attention");
    for (std::size_t i = 0; i < m.values.size(); ++i) out.values[i] += m.values[i];
  }
  const T n = static_cast<T>(maps.size());
  for (auto& v : out.values.data()) v /= n;
  return out;
}

template <typename T>
NodeId cls_loss(Graph<T>& graph, NodeId logits, const std::vector<int>& labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw ShapeError("cls_loss: label " + std::to_string(y) + " is not in {0, 1}");
  }
  return graph.softmax_cross_entropy(logits, labels);
}

template <typename T>
double cls_loss_value(const Tensor<T>& logits, const std::vector<int>& labels) {
  Graph<T> g;
  const NodeId l = g.input(logits);
  return static_cast<double>(g.value(cls_loss(g, l, labels)).item());
}

template <typename T>
NodeId fac_loss(Graph<T>& graph, NodeId maps, const AttentionMap<T>& reference) {
  const Tensor<T>& v = graph.value(maps);
  if (v.rank() != 4 || v.dim(1) != 1 || v.dim(2) != reference.height() || v.dim(3) != reference.width()) {
    throw ShapeError("fac_loss: video maps " + to_string(v.shape()) + " vs reference " + to_string(reference.values.shape()));
  }
  const NodeId mean = graph.batch_mean(maps);
  const NodeId ref = graph.input(Tensor<T>(Shape{1, 1, reference.height(), reference.width()}, reference.values.values()));
  return graph.sum_of_squares(graph.subtract(mean, ref));
}

template <typename T>
double fac_loss_value(const std::vector<AttentionMap<T>>& video_maps, const AttentionMap<T>& reference) {
  const AttentionMap<T> mean = mean_attention(video_maps);
  check_extents(mean, reference, "fac_loss");
  T acc = 0;
  for (std::size_t i = 0; i < mean.values.size(); ++i) {
    const T d = mean.values[i] - reference.values[i];
    acc += d * d;
  }
  return static_cast<double>(acc);
}

template <typename T>
std::string to_pgm(const AttentionMap<T>& map, std::optional<double> binarize_top) {
  const std::size_t H = map.height(), W = map.width(), n = H * W;
  std::string out = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  out.reserve(out.size() + n);
  if (binarize_top) {
    const double q = *binarize_top;
    if (!(q >= 0.0 && q <= 1.0)) throw ShapeError("to_pgm: binarize fraction " + std::to_string(q) + " outside [0, 1]");
    std::vector<T> sorted(map.values.values());
    std::sort(sorted.begin(), sorted.end());
    const auto k = static_cast<std::size_t>(std::floor((1.0 - q) * static_cast<double>(n - 1)));
    const T threshold = sorted[k];
    for (std::size_t i = 0; i < n; ++i) out.push_back(map.values[i] >= threshold ? static_cast<char>(255) : char(0));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::clamp(static_cast<double>(map.values[i]), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  return out;
}

#define ACMF_INSTANTIATE_ATTENTION(T)                                                                              \
  template GradCamNodes<T> append_gradcam(ForwardPass<T>&, int, std::size_t, std::size_t);                         \
  template std::vector<AttentionMap<T>> gradcam_maps(const ModelConfig&, const ModelParams<T>&, const Tensor<T>&, \
                                                     int);                                                         \
  template AttentionMap<T> gradcam_map(const ModelConfig&, const ModelParams<T>&, const Tensor<T>&, int);          \
  template AttentionMap<T> mean_attention(const std::vector<AttentionMap<T>>&);                                    \
  template NodeId cls_loss(Graph<T>&, NodeId, const std::vector<int>&);                                            \
  template double cls_loss_value(const Tensor<T>&, const std::vector<int>&);                                       \
  template NodeId fac_loss(Graph<T>&, NodeId, const AttentionMap<T>&);                                             \
  template double fac_loss_value(const std::vector<AttentionMap<T>>&, const AttentionMap<T>&);                     \
  template std::string to_pgm(const AttentionMap<T>&, std::optional<double>);

ACMF_INSTANTIATE_ATTENTION(float)
ACMF_INSTANTIATE_ATTENTION(double)

#undef ACMF_INSTANTIATE_ATTENTION

}  // namespace acmf
