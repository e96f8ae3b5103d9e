#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "acmf/model.hpp"

namespace acmf {

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t cutoff = 0;
  std::size_t patch_size = 0;
  double mask_ratio = 0.0;
  bool mfr_enabled = true;
  bool operator==(const TrainingMetadata&) const = default;
};

// ACMF-CKPT v1:
//   "ACMF-CKPT v1\n"
//   one-line JSON header\n   {format_version, config, metadata, [run_config,] tensors: [{name, shape, offset, bytes}]}
//   payload: concatenated little-endian binary32 tensors; offsets are relative to the payload start
struct Checkpoint {
  static constexpr int kFormatVersion = 1;
  ModelConfig config;
  ModelParams<float> params;
  TrainingMetadata metadata;
  std::string run_config;  // resolved run configuration as a JSON object; empty when none
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace acmf
