#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "acmf/attention.hpp"
#include "acmf/checkpoint.hpp"
#include "acmf/optim.hpp"
#include "acmf/synth.hpp"

namespace acmf {

enum class RefineScope { kAllParams, kHeadOnly };

std::string_view scope_name(RefineScope scope);
RefineScope parse_scope(std::string_view name);

struct RefineConfig {
  std::size_t rounds = 5;  // T
  double lr = 1e-4;
  std::size_t reference_frames = 256;  // N_r, capped at the training-set size
  std::uint64_t reference_seed = 1;
  RefineScope scope = RefineScope::kAllParams;
  bool recompute_reference = false;  // re-derive the reference under the current parameters every round

  void validate() const;
};

// Frames drawn for the reference: all of them (in order) when N_r covers the
// set, else N_r indices from a partial Fisher-Yates shuffle under
// Rng::derive(seed, "reference").
std::vector<Tensor<float>> sample_reference_frames(const std::vector<VideoClip>& train_set, std::size_t count,
                                                   std::uint64_t seed);

// Mean Grad-CAM map of the given frames (fake-class target).
AttentionMap<float> mean_gradcam(const ModelConfig& config, const ModelParams<float>& params,
                                 const std::vector<Tensor<float>>& frames, std::size_t batch_size = 32);

AttentionMap<float> compute_reference_map(const Checkpoint& checkpoint, const std::vector<VideoClip>& train_set,
                                          std::size_t count, std::uint64_t seed);

struct RefineOutcome {
  double probability = 0.0;          // mean frame fake-probability under the refined parameters
  ModelParams<float> params;         // g1
  std::vector<double> fac_trace;     // L_ac before the first round and after each round (T + 1 entries)
  bool failed = false;               // non-finite refinement; probability falls back to T = 0
  std::string failure;
};

// Stage 2 for one video. Always starts from `initial` with fresh Adam state;
// channel weights of the Grad-CAM maps are treated as constants.
RefineOutcome refine_video(const ModelConfig& config, const ModelParams<float>& initial, const VideoClip& video,
                           const AttentionMap<float>& reference, const RefineConfig& refine,
                           const std::vector<Tensor<float>>* reference_frames = nullptr);

}  // namespace acmf
