#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acmf/perturb.hpp"
#include "acmf/refine.hpp"

namespace acmf {

// Mann-Whitney statistic, ties counted 0.5. Computed from doubled mid-ranks
// so the numerator is an exact integer:
//   (2 R_pos - n_pos (n_pos + 1)) / (2 n_pos n_neg)
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct VideoResult {
  std::string video_id;
  std::string subset;
  Family family = Family::kNone;
  int label = 0;
  double probability = 0.0;
  std::vector<double> fac_trace;  // empty without refinement
  bool refine_failed = false;
  std::string failure;
};

struct AucSummary {
  double overall = 0.0;
  std::map<std::string, double> by_family;  // keyed by subset name
};

struct EvalOptions {
  std::optional<RefineConfig> refine;  // absent or rounds == 0: plain g0 prediction
  std::vector<PerturbKind> perturbations;
  std::uint64_t perturb_seed = 1;
};

struct EvalReport {
  std::vector<VideoResult> videos;
  AucSummary auc;
  std::map<std::string, AucSummary> perturbations;  // keyed by perturbation name
  std::optional<RefineConfig> refine;               // set only when rounds > 0
  double wall_clock_seconds = 0.0;
};

// Reference map required when refinement runs with rounds > 0.
// Videos are scored in parallel; each refinement starts from the checkpoint.
EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<VideoClip>& test_set, const EvalOptions& options,
                    const AttentionMap<float>* reference = nullptr,
                    const std::vector<Tensor<float>>* reference_frames = nullptr);

AucSummary summarize_auc(const std::vector<VideoResult>& videos);

// Frames of every video perturbed with Rng::derive(seed, "perturb/<kind>", video, frame).
std::vector<VideoClip> perturb_videos(const std::vector<VideoClip>& videos, PerturbKind kind, std::uint64_t seed);

}  // namespace acmf
