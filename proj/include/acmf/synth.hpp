#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "acmf/rng.hpp"
#include "acmf/tensor.hpp"

namespace acmf {

enum class Family { kNone, kHiFreqGrid, kLoFreqBlend };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

// Frames of one video share a label, an identity, and (for fakes) an
// artifact family. `subset` names the evaluation group the clip belongs to:
// the artifact family its real/fake pair was generated for.
struct VideoClip {
  std::string video_id;
  std::vector<Tensor<float>> frames;  // each C x H x W
  int label = 0;
  Family family = Family::kNone;
  std::string subset;

  void validate() const;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t train_videos_per_class = 25;
  std::size_t test_videos_per_class = 12;
  std::size_t frames_per_video = 8;
  std::size_t image_size = 64;
  std::size_t channels = 1;
  std::vector<Family> train_families{Family::kHiFreqGrid};
  std::vector<Family> test_families{Family::kHiFreqGrid, Family::kLoFreqBlend};
  double grid_amplitude = 0.14;
  double blend_strength = 0.6;
  double blend_offset = 0.12;
  // Strength of the blend manipulation underneath the grid in hi-freq-grid fakes.
  double grid_family_blend_strength = 0.3;

  void validate() const;
};

struct Dataset {
  std::vector<VideoClip> train;
  std::vector<VideoClip> test;
};

// Real frames: up to eight low-frequency sinusoids plus blurred noise,
// standardized to mean 0.5 / std 0.15 and clamped to [0, 1]; frames of one
// video share the scene and differ by small phase jitter and fine noise.
// hi-freq-grid fakes add an alternating +/-a checkerboard inside a feathered
// face-like ellipse over a mild blend; lo-freq-blend fakes paste a feathered
// ellipse from another scene with a brightness offset.
Dataset synth_dataset(const SynthConfig& config);

// One real frame and the fake built on the same host frame, for measuring
// what an artifact family adds.
struct FramePair {
  Tensor<float> real;
  Tensor<float> fake;
};
FramePair synth_pair(const SynthConfig& config, Family family, std::uint64_t stream);

// Frames of every clip in order, with per-frame labels.
struct FrameSet {
  std::vector<Tensor<float>> frames;
  std::vector<int> labels;
};
FrameSet flatten(const std::vector<VideoClip>& clips);

}  // namespace acmf
