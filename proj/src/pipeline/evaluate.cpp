#include "acmf/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>

#include "acmf/train.hpp"

namespace acmf {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: score and label counts differ");
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("auc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw NumericalError("auc: NaN score");
    (labels[i] == 1 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) throw ConfigError("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; a tie group at positions [i, j] shares rank (i + j + 2) / 2.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) twice_rank_sum += i + j + 2;
    i = j + 1;
  }
  const std::uint64_t numerator = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(numerator) / static_cast<double>(2 * n_pos * n_neg);
}

AucSummary summarize_auc(const std::vector<VideoResult>& videos) {
  AucSummary s;
  std::vector<double> scores;
  std::vector<int> labels;
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
  for (const auto& v : videos) {
    scores.push_back(v.probability);
    labels.push_back(v.label);
    auto& g = groups[v.subset];
    g.first.push_back(v.probability);
    g.second.push_back(v.label);
  }
  s.overall = auc(scores, labels);
  for (const auto& [name, g] : groups) {
    const bool both = std::count(g.second.begin(), g.second.end(), 1) > 0 &&
                      std::count(g.second.begin(), g.second.end(), 0) > 0;
    if (both) s.by_family[name] = auc(g.first, g.second);
  }
  return s;
}

std::vector<VideoClip> perturb_videos(const std::vector<VideoClip>& videos, PerturbKind kind, std::uint64_t seed) {
  std::vector<VideoClip> out = videos;
  const std::string label = "perturb/" + std::string(perturb_name(kind));
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t v = 0; v < n; ++v) {
    auto& frames = out[std::size_t(v)].frames;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      Rng rng = Rng::derive(seed, label, std::uint64_t(v), f);
      frames[f] = perturb(frames[f], kind, rng);
    }
  }
  return out;
}

namespace {

std::vector<VideoResult> score_videos(const Checkpoint& ckpt, const std::vector<VideoClip>& videos,
                                      const std::optional<RefineConfig>& refine, const AttentionMap<float>* reference,
                                      const std::vector<Tensor<float>>* reference_frames) {
  std::vector<VideoResult> results(videos.size());
  std::vector<std::exception_ptr> errors(videos.size());
  const auto n = static_cast<std::ptrdiff_t>(videos.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) try {
    const VideoClip& clip = videos[std::size_t(i)];
    VideoResult& r = results[std::size_t(i)];
    r.video_id = clip.video_id;
    r.subset = clip.subset;
    r.family = clip.family;
    r.label = clip.label;
    if (refine) {
      RefineOutcome o = refine_video(ckpt.config, ckpt.params, clip, *reference, *refine, reference_frames);
      r.probability = o.probability;
      r.fac_trace = std::move(o.fac_trace);
      r.refine_failed = o.failed;
      r.failure = std::move(o.failure);
    } else {
      clip.validate();
      const auto p = predict_proba(ckpt.config, ckpt.params, stack_frames(clip.frames));
      r.probability = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
    }
  } catch (...) {
    errors[std::size_t(i)] = std::current_exception();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace

EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<VideoClip>& test_set, const EvalOptions& options,
                    const AttentionMap<float>* reference, const std::vector<Tensor<float>>* reference_frames) {
  const auto start = std::chrono::steady_clock::now();
  if (test_set.empty()) throw ConfigError("evaluate: empty test set");
  const Shape expected{checkpoint.config.channels, checkpoint.config.input_size, checkpoint.config.input_size};
  for (const auto& clip : test_set) {
    for (const auto& f : clip.frames) {
      if (f.shape() != expected) {
        throw ShapeError("evaluate: video " + clip.video_id + " has frames " + to_string(f.shape()) +
                         " but the checkpoint expects " + to_string(expected));
      }
    }
  }

  EvalReport report;
  if (options.refine && options.refine->rounds > 0) {
    options.refine->validate();
    if (!reference) throw ConfigError("evaluate: refinement requires a reference map");
    report.refine = options.refine;
  }

  report.videos = score_videos(checkpoint, test_set, report.refine, reference, reference_frames);
  report.auc = summarize_auc(report.videos);
  for (PerturbKind kind : options.perturbations) {
    const auto perturbed = perturb_videos(test_set, kind, options.perturb_seed);
    const auto results = score_videos(checkpoint, perturbed, report.refine, reference, reference_frames);
    report.perturbations[std::string(perturb_name(kind))] = summarize_auc(results);
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace acmf
