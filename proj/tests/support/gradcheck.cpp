#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace acmf::testing {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Shape random_shape(Rng& rng) {
  Shape s(pick(rng, 1, 4));
  for (auto& d : s) d = pick(rng, 1, 4);
  return s;
}

// Values bounded away from zero, for ops with a kink at 0.
Tensor<double> away_from_zero(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = rng.uniform(0.1, 1.0) * (rng.below(2) ? 1.0 : -1.0);
  return t;
}

OpCase conv_case(OpKind kind, Rng& rng) {
  const bool depthwise = kind == OpKind::kDepthwiseConv2d;
  const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), h = pick(rng, 3, 6), w = pick(rng, 3, 6);
  const std::size_t k = depthwise ? c : pick(rng, 1, 3);
  const std::size_t ks = rng.below(2) ? 3 : 1;
  const std::size_t stride = pick(rng, 1, 2), pad = ks == 3 ? pick(rng, 0, 1) : 0;
  const bool with_bias = rng.below(2) == 1;

  OpCase oc;
  oc.kind = kind;
  oc.inputs.emplace_back("x", random_tensor({n, c, h, w}, rng));
  oc.inputs.emplace_back("w", random_tensor({k, depthwise ? 1 : c, ks, ks}, rng));
  if (with_bias) oc.inputs.emplace_back("b", random_tensor({k}, rng));
  const ConvAttrs attrs{stride, pad};
  oc.build = [kind, attrs, with_bias](Graph<double>& g, const std::vector<NodeId>& in) {
    const std::optional<NodeId> b = with_bias ? std::optional<NodeId>(in[2]) : std::nullopt;
    return kind == OpKind::kConv2d ? g.conv2d(in[0], in[1], b, attrs) : g.depthwise_conv2d(in[0], in[1], b, attrs);
  };
  oc.description = std::string(op_name(kind)) + " x" + to_string(oc.inputs[0].second.shape()) + " w" +
                   to_string(oc.inputs[1].second.shape()) + " s" + std::to_string(stride) + " p" + std::to_string(pad);
  return oc;
}

}  // namespace

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor<float> random_tensor_f(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor<float> t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

std::vector<OpKind> checked_kinds() {
  return {OpKind::kAdd,           OpKind::kSubtract,         OpKind::kMultiply,
          OpKind::kScale,         OpKind::kRelu,             OpKind::kConv2d,
          OpKind::kDepthwiseConv2d, OpKind::kDense,          OpKind::kGlobalAvgPool,
          OpKind::kSpatialMean,   OpKind::kBatchMean,        OpKind::kBilinearUpsample,
          OpKind::kSoftmax,       OpKind::kSumOfSquares,     OpKind::kSoftmaxCrossEntropy,
          OpKind::kDotConstant,   OpKind::kChannelCombine,   OpKind::kNormalizeMax};
}

double tolerance_for(OpKind kind) { return kind == OpKind::kBilinearUpsample ? 1e-4 : 1e-6; }

OpCase random_case(OpKind kind, Rng& rng) {
  OpCase oc;
  oc.kind = kind;
  oc.description = std::string(op_name(kind));
  switch (kind) {
    case OpKind::kAdd:
    case OpKind::kSubtract:
    case OpKind::kMultiply: {
      const Shape s = random_shape(rng);
      oc.inputs.emplace_back("a", random_tensor(s, rng));
      oc.inputs.emplace_back("b", random_tensor(s, rng));
      oc.build = [kind](Graph<double>& g, const std::vector<NodeId>& in) {
        if (kind == OpKind::kAdd) return g.add(in[0], in[1]);
        if (kind == OpKind::kSubtract) return g.subtract(in[0], in[1]);
        return g.multiply(in[0], in[1]);
      };
      break;
    }
    case OpKind::kScale: {
      const double factor = rng.uniform(-2.0, 2.0);
      oc.inputs.emplace_back("x", random_tensor(random_shape(rng), rng));
      oc.build = [factor](Graph<double>& g, const std::vector<NodeId>& in) { return g.scale(in[0], factor); };
      break;
    }
    case OpKind::kRelu:
      oc.inputs.emplace_back("x", away_from_zero(random_shape(rng), rng));
      oc.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.relu(in[0]); };
      break;
    case OpKind::kConv2d:
    case OpKind::kDepthwiseConv2d:
      return conv_case(kind, rng);
    case OpKind::kDense: {
      const std::size_t n = pick(rng, 1, 4), i = pick(rng, 1, 5), o = pick(rng, 1, 4);
      const bool with_bias = rng.below(2) == 1;
      oc.inputs.emplace_back("x", random_tensor({n, i}, rng));
      oc.inputs.emplace_back("w", random_tensor({o, i}, rng));
      if (with_bias) oc.inputs.emplace_back("b", random_tensor({o}, rng));
      oc.build = [with_bias](Graph<double>& g, const std::vector<NodeId>& in) {
        return g.dense(in[0], in[1], with_bias ? std::optional<NodeId>(in[2]) : std::nullopt);
      };
      break;
    }
    case OpKind::kGlobalAvgPool:
    case OpKind::kSpatialMean:
    case OpKind::kBatchMean: {
      oc.inputs.emplace_back("x", random_tensor({pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)}, rng));
      oc.build = [kind](Graph<double>& g, const std::vector<NodeId>& in) {
        if (kind == OpKind::kGlobalAvgPool) return g.global_avg_pool(in[0]);
        if (kind == OpKind::kSpatialMean) return g.spatial_mean(in[0]);
        return g.batch_mean(in[0]);
      };
      break;
    }
    case OpKind::kBilinearUpsample: {
      const std::size_t h = pick(rng, 1, 5), w = pick(rng, 1, 5);
      const std::size_t oh = pick(rng, h, 3 * h), ow = pick(rng, w, 3 * w);
      oc.inputs.emplace_back("x", random_tensor({pick(rng, 1, 2), pick(rng, 1, 2), h, w}, rng));
      oc.build = [oh, ow](Graph<double>& g, const std::vector<NodeId>& in) { return g.bilinear_upsample(in[0], oh, ow); };
      oc.description += " to " + std::to_string(oh) + "x" + std::to_string(ow);
      break;
    }
    case OpKind::kSoftmax:
      oc.inputs.emplace_back("x", random_tensor({pick(rng, 1, 4), pick(rng, 2, 5)}, rng, -3.0, 3.0));
      oc.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.softmax(in[0]); };
      break;
    case OpKind::kSumOfSquares:
      oc.inputs.emplace_back("x", random_tensor(random_shape(rng), rng));
      oc.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.sum_of_squares(in[0]); };
      break;
    case OpKind::kSoftmaxCrossEntropy: {
      const std::size_t n = pick(rng, 1, 5), k = pick(rng, 2, 4);
      std::vector<int> labels(n);
      for (auto& l : labels) l = static_cast<int>(rng.below(k));
      oc.inputs.emplace_back("logits", random_tensor({n, k}, rng, -3.0, 3.0));
      oc.build = [labels](Graph<double>& g, const std::vector<NodeId>& in) {
        return g.softmax_cross_entropy(in[0], labels);
      };
      break;
    }
    case OpKind::kDotConstant: {
      const Shape s = random_shape(rng);
      const Tensor<double> c = random_tensor(s, rng);
      oc.inputs.emplace_back("x", random_tensor(s, rng));
      oc.build = [c](Graph<double>& g, const std::vector<NodeId>& in) { return g.dot_constant(in[0], c); };
      break;
    }
    case OpKind::kChannelCombine: {
      const std::size_t n = pick(rng, 1, 3), k = pick(rng, 1, 4);
      const Tensor<double> weights = random_tensor({n, k}, rng);
      oc.inputs.emplace_back("a", random_tensor({n, k, pick(rng, 1, 4), pick(rng, 1, 4)}, rng));
      oc.build = [weights](Graph<double>& g, const std::vector<NodeId>& in) { return g.channel_combine(in[0], weights); };
      break;
    }
    case OpKind::kNormalizeMax: {
      const std::size_t n = pick(rng, 1, 3), c = pick(rng, 1, 2), h = pick(rng, 1, 4), w = pick(rng, 2, 4);
      Tensor<double> x = random_tensor({n, c, h, w}, rng);
      // A unique positive maximum per sample, well clear of the runner-up.
      const std::size_t per = c * h * w;
      for (std::size_t s = 0; s < n; ++s) {
        auto first = x.data().begin() + static_cast<std::ptrdiff_t>(s * per);
        const double top = *std::max_element(first, first + static_cast<std::ptrdiff_t>(per));
        x[s * per + rng.below(per)] = std::abs(top) + 0.5;
      }
      oc.inputs.emplace_back("x", std::move(x));
      oc.build = [](Graph<double>& g, const std::vector<NodeId>& in) { return g.normalize_max(in[0]); };
      break;
    }
    default:
      throw ConfigError("random_case: op " + std::string(op_name(kind)) + " has no checker");
  }
  return oc;
}

CheckResult check_case(const OpCase& c, Rng& rng) {
  Tensor<double> projection;
  auto evaluate = [&](const NamedTensors<double>& inputs, Graph<double>& g) {
    std::vector<NodeId> ids;
    for (const auto& [name, t] : inputs) ids.push_back(g.parameter(name, t));
    NodeId out = c.build(g, ids);
    if (g.value(out).rank() != 0) {
      if (projection.size() == 0) projection = random_tensor(g.value(out).shape(), rng);
      out = g.dot_constant(out, projection);
    }
    return out;
  };

  Graph<double> g;
  const NodeId loss = evaluate(c.inputs, g);
  const auto grads = g.backward(loss);

  CheckResult result;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    const auto f = [&](const Tensor<double>& xi) {
      NamedTensors<double> inputs = c.inputs;
      inputs[i].second = xi;
      Graph<double> h;
      return h.value(evaluate(inputs, h)).item();
    };
    const Tensor<double> numeric = finite_diff_grad<double>(f, c.inputs[i].second, 1e-6);
    const double err = relative_error(grads.parameter(c.inputs[i].first), numeric);
    if (err > result.max_relative_error || result.worst_input.empty()) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      result.worst_input = c.inputs[i].first;
    }
  }
  return result;
}

Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* bias,
                            std::size_t stride, std::size_t pad, bool depthwise) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t K = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
  Tensor<double> y({N, K, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double acc = bias ? (*bias)[k] : 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            if (depthwise && c != k) continue;
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long ih = long(oh * stride + i) - long(pad), iw = long(ow * stride + j) - long(pad);
                if (ih < 0 || iw < 0 || ih >= long(H) || iw >= long(W)) continue;
                acc += x.at(n, c, std::size_t(ih), std::size_t(iw)) * w.at(k, depthwise ? 0 : c, i, j);
              }
          }
          y.at(n, k, oh, ow) = acc;
        }
  return y;
}

}  // namespace acmf::testing
