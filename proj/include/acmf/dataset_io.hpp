#pragma once

#include <filesystem>

#include "acmf/synth.hpp"
#include "json.hpp"

namespace acmf {

// DIR/manifest.json
//   {"format": "acmf-dataset", "version": 1, "config": {...},
//    "frames": [{"split", "video_id", "frame_index", "frame_path", "label", "family", "subset"}, ...]}
// DIR/<split>/<video_id>/frame-NNN.tensor  (ACMF-TENSOR v1, f32, C x H x W)
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, const nlohmann::ordered_json& config);

struct LoadedDataset {
  Dataset dataset;
  nlohmann::ordered_json config;
};

// Frames are grouped by video in manifest order.
LoadedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace acmf
