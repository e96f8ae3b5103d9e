#include "acmf/model.hpp"

#include <cmath>

#include "acmf/spectral.hpp"

namespace acmf {

void ModelConfig::validate() const {
  if (channels == 0 || stem_channels == 0 || block1_channels == 0 || block2_channels == 0) {
    throw ConfigError("model config: channel counts must be positive");
  }
  if (!spectral::is_power_of_two(input_size) || input_size < 4) {
    throw ConfigError("model config: input size " + std::to_string(input_size) + " must be a power of two >= 4");
  }
}

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  c.validate();
  const std::size_t s = c.stem_channels, b1 = c.block1_channels, b2 = c.block2_channels;
  return {
      {"stem.weight", {s, c.channels, 3, 3}, c.channels * 9},
      {"stem.bias", {s}, 0},
      {"block1.depthwise.weight", {s, 1, 3, 3}, 9},
      {"block1.depthwise.bias", {s}, 0},
      {"block1.pointwise.weight", {b1, s, 1, 1}, s},
      {"block1.pointwise.bias", {b1}, 0},
      {"block1.shortcut.weight", {b1, s, 1, 1}, s},
      {"block1.shortcut.bias", {b1}, 0},
      {"block2.depthwise.weight", {b1, 1, 3, 3}, 9},
      {"block2.depthwise.bias", {b1}, 0},
      {"block2.pointwise.weight", {b2, b1, 1, 1}, b1},
      {"block2.pointwise.bias", {b2}, 0},
      {"block2.shortcut.weight", {b2, b1, 1, 1}, b1},
      {"block2.shortcut.bias", {b2}, 0},
      {"head.weight", {ModelConfig::kClasses, b2}, b2},
      {"head.bias", {ModelConfig::kClasses}, 0},
  };
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& spec : param_specs(config)) n += numel(spec.shape);
  return n;
}

bool is_head_param(std::string_view name) { return name.rfind("head.", 0) == 0; }

template <typename T>
const Tensor<T>& find_param(const ModelParams<T>& params, std::string_view name) {
  for (const auto& [n, t] : params)
    if (n == name) return t;
  throw ShapeError("model parameters: missing '" + std::string(name) + "'");
}

template <typename T>
Tensor<T>& find_param(ModelParams<T>& params, std::string_view name) {
  for (auto& [n, t] : params)
    if (n == name) return t;
  throw ShapeError("model parameters: missing '" + std::string(name) + "'");
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<T> params;
  for (const auto& spec : param_specs(config)) {
    Tensor<T> t(spec.shape);
    if (spec.fan_in > 0) {
      Rng rng = Rng::derive(seed, "init/" + spec.name);
      const double bound = std::sqrt(3.0 / static_cast<double>(spec.fan_in));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    params.emplace_back(spec.name, std::move(t));
  }
  return params;
}

template <typename T>
ForwardPass<T> forward_with_taps(const ModelConfig& config, const ModelParams<T>& params, const Tensor<T>& batch) {
  if (batch.rank() != 4 || batch.dim(1) != config.channels || batch.dim(2) != config.input_size ||
      batch.dim(3) != config.input_size) {
    throw ShapeError("forward_with_taps: batch " + to_string(batch.shape()) + " does not match model input [N," +
                     std::to_string(config.channels) + "," + std::to_string(config.input_size) + "," +
                     std::to_string(config.input_size) + "]");
  }
  const auto specs = param_specs(config);
  if (params.size() != specs.size()) throw ShapeError("forward_with_taps: expected " + std::to_string(specs.size()) + " parameter tensors");

  ForwardPass<T> fp;
  Graph<T>& g = fp.graph;
  fp.input = g.input(batch);
  auto p = [&](const char* name) {
    const Tensor<T>& t = find_param(params, name);
    return g.parameter(name, t);
  };

  const NodeId stem = g.relu(g.conv2d(fp.input, p("stem.weight"), p("stem.bias"), {1, 1}));

  auto block = [&](NodeId x, const std::string& prefix) {
    const NodeId dw = g.depthwise_conv2d(x, p((prefix + ".depthwise.weight").c_str()),
                                         p((prefix + ".depthwise.bias").c_str()), {2, 1});
    const NodeId pw = g.conv2d(dw, p((prefix + ".pointwise.weight").c_str()), p((prefix + ".pointwise.bias").c_str()),
                               {1, 0});
    const NodeId sc = g.conv2d(x, p((prefix + ".shortcut.weight").c_str()), p((prefix + ".shortcut.bias").c_str()),
                               {2, 0});
    return g.relu(g.add(pw, sc));
  };

  const NodeId b1 = block(stem, "block1");
  fp.tap = block(b1, "block2");
  fp.pooled = g.global_avg_pool(fp.tap);
  fp.logits = g.dense(fp.pooled, p("head.weight"), p("head.bias"));
  return fp;
}

template <typename T>
std::vector<double> fake_probabilities(const Tensor<T>& logits) {
  if (logits.rank() != 2 || logits.dim(1) != ModelConfig::kClasses) {
    throw ShapeError("fake_probabilities: logits " + to_string(logits.shape()) + " are not [N,2]");
  }
  std::vector<double> out(logits.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) {
    // softmax component 1 of two logits = 1 / (1 + exp(l0 - l1))
    const double l0 = logits[n * 2], l1 = logits[n * 2 + 1];
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    out[n] = e1 / (e0 + e1);
  }
  return out;
}

template <typename T>
std::vector<double> predict_proba(const ModelConfig& config, const ModelParams<T>& params, const Tensor<T>& batch) {
  const auto fp = forward_with_taps(config, params, batch);
  return fake_probabilities(fp.graph.value(fp.logits));
}

template <typename T>
ModelParams<T> cast_params(const ModelParams<float>& params) {
  ModelParams<T> out;
  for (const auto& [name, t] : params) out.emplace_back(name, t.template cast<T>());
  return out;
}

template const Tensor<float>& find_param(const ModelParams<float>&, std::string_view);
template const Tensor<double>& find_param(const ModelParams<double>&, std::string_view);
template Tensor<float>& find_param(ModelParams<float>&, std::string_view);
template Tensor<double>& find_param(ModelParams<double>&, std::string_view);
template ModelParams<float> init_params(const ModelConfig&, std::uint64_t);
template ModelParams<double> init_params(const ModelConfig&, std::uint64_t);
template ForwardPass<float> forward_with_taps(const ModelConfig&, const ModelParams<float>&, const Tensor<float>&);
template ForwardPass<double> forward_with_taps(const ModelConfig&, const ModelParams<double>&, const Tensor<double>&);
template std::vector<double> fake_probabilities(const Tensor<float>&);
template std::vector<double> fake_probabilities(const Tensor<double>&);
template std::vector<double> predict_proba(const ModelConfig&, const ModelParams<float>&, const Tensor<float>&);
template std::vector<double> predict_proba(const ModelConfig&, const ModelParams<double>&, const Tensor<double>&);
template ModelParams<float> cast_params(const ModelParams<float>&);
template ModelParams<double> cast_params(const ModelParams<float>&);

}  // namespace acmf
