#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "acmf/checkpoint.hpp"
#include "acmf/optim.hpp"
#include "acmf/synth.hpp"

namespace acmf {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t cutoff = 2;
  std::size_t patch_size = 8;
  double mask_ratio = 0.1;
  bool mfr_enabled = true;  // false: frames go to the model untouched
  AdamConfig adam;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Stage 1: per epoch the frames are shuffled with Rng::derive(seed, "shuffle", epoch);
// each sample is masked with Rng::derive(seed, "mfr", epoch, position) before the
// forward pass; batch-mean cross-entropy drives one Adam step per batch.
TrainResult train_mfr(const std::vector<VideoClip>& train_set, const ModelConfig& model, const TrainConfig& config,
                      const EpochCallback& on_epoch = {});

// Frames stacked into an N x C x H x W batch.
Tensor<float> stack_frames(const std::vector<Tensor<float>>& frames, std::size_t begin, std::size_t end);
Tensor<float> stack_frames(const std::vector<Tensor<float>>& frames);

// Mean fake probability over frames, predicted in batches.
std::vector<double> frame_probabilities(const ModelConfig& config, const ModelParams<float>& params,
                                        const std::vector<Tensor<float>>& frames, std::size_t batch_size = 64);

double accuracy(const std::vector<double>& probabilities, const std::vector<int>& labels);

}  // namespace acmf
