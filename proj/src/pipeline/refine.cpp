#include "acmf/refine.hpp"

#include <cmath>
#include <numeric>

#include "acmf/train.hpp"

namespace acmf {

std::string_view scope_name(RefineScope scope) {
  return scope == RefineScope::kAllParams ? "all-params" : "head-only";
}

RefineScope parse_scope(std::string_view name) {
  if (name == "all-params") return RefineScope::kAllParams;
  if (name == "head-only") return RefineScope::kHeadOnly;
  throw ConfigError("unknown refinement scope '" + std::string(name) + "'");
}

void RefineConfig::validate() const {
  if (reference_frames < 1) throw ConfigError("refine: reference_frames must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("refine: lr must be positive");
}

std::vector<Tensor<float>> sample_reference_frames(const std::vector<VideoClip>& train_set, std::size_t count,
                                                   std::uint64_t seed) {
  FrameSet all = flatten(train_set);
  if (all.frames.empty()) throw ConfigError("reference map: empty training set");
  if (count == 0) throw ConfigError("reference map: N_r must be >= 1");
  if (count >= all.frames.size()) return std::move(all.frames);

  std::vector<std::size_t> idx(all.frames.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, "reference");
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  std::vector<Tensor<float>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(all.frames[idx[i]]);
  return out;
}

AttentionMap<float> mean_gradcam(const ModelConfig& config, const ModelParams<float>& params,
                                 const std::vector<Tensor<float>>& frames, std::size_t batch_size) {
  std::vector<AttentionMap<float>> maps;
  maps.reserve(frames.size());
  for (std::size_t b = 0; b < frames.size(); b += batch_size) {
    auto part = gradcam_maps(config, params, stack_frames(frames, b, std::min(frames.size(), b + batch_size)));
    for (auto& m : part) maps.push_back(std::move(m));
  }
  return mean_attention(maps);
}

AttentionMap<float> compute_reference_map(const Checkpoint& checkpoint, const std::vector<VideoClip>& train_set,
                                          std::size_t count, std::uint64_t seed) {
  const auto frames = sample_reference_frames(train_set, count, seed);
  return mean_gradcam(checkpoint.config, checkpoint.params, frames);
}

namespace {

struct RoundResult {
  double fac = 0.0;
  double probability = 0.0;
  NamedTensors<float> grads;
};

RoundResult evaluate_round(const ModelConfig& config, const ModelParams<float>& params, const Tensor<float>& batch,
                           const AttentionMap<float>& reference, bool want_grads, RefineScope scope) {
  auto pass = forward_with_taps(config, params, batch);
  const auto cam = append_gradcam(pass, kFakeClass, config.input_size, config.input_size);
  const NodeId loss = fac_loss(pass.graph, cam.normalized, reference);
  RoundResult r;
  r.fac = pass.graph.value(loss).item();
  const auto probs = fake_probabilities(pass.graph.value(pass.logits));
  r.probability = std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
  if (want_grads) {
    for (auto& [name, g] : pass.graph.backward(loss).parameters()) {
      if (scope == RefineScope::kHeadOnly && !is_head_param(name)) continue;
      r.grads.emplace_back(name, std::move(g));
    }
  }
  return r;
}

}  // namespace

RefineOutcome refine_video(const ModelConfig& config, const ModelParams<float>& initial, const VideoClip& video,
                           const AttentionMap<float>& reference, const RefineConfig& refine,
                           const std::vector<Tensor<float>>* reference_frames) {
  refine.validate();
  video.validate();
  const Tensor<float> batch = stack_frames(video.frames);

  RefineOutcome out;
  out.params = initial;
  AdamConfig adam_cfg;
  adam_cfg.lr = refine.lr;
  AdamState<float> adam = AdamState<float>::zeros_like(out.params, adam_cfg);
  AttentionMap<float> target = reference;

  try {
    for (std::size_t t = 0;; ++t) {
      if (refine.recompute_reference && reference_frames && t > 0) {
        target = mean_gradcam(config, out.params, *reference_frames);
      }
      const bool last = t == refine.rounds;
      RoundResult r = evaluate_round(config, out.params, batch, target, !last, refine.scope);
      if (!std::isfinite(r.fac)) throw NumericalError("non-finite attention-consistency loss");
      out.fac_trace.push_back(r.fac);
      out.probability = r.probability;
      if (last) break;
      adam_step(out.params, r.grads, adam);
    }
  } catch (const NumericalError& e) {
    out.failed = true;
    out.failure = "video " + video.video_id + ": " + e.what();
    out.params = initial;
    const auto probs = predict_proba(config, initial, batch);
    out.probability = std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
  }
  return out;
}

}  // namespace acmf
