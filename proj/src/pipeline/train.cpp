#include "acmf/train.hpp"

#include <cmath>
#include <numeric>

#include "acmf/attention.hpp"
#include "acmf/spectral.hpp"

namespace acmf {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw ConfigError("train: mask_ratio must be in [0, 1]");
  if (patch_size < 1) throw ConfigError("train: patch_size must be >= 1");
  if (!(adam.lr > 0.0)) throw ConfigError("train: lr must be positive");
}

Tensor<float> stack_frames(const std::vector<Tensor<float>>& frames, std::size_t begin, std::size_t end) {
  if (begin >= end || end > frames.size()) throw ShapeError("stack_frames: empty or out-of-range selection");
  const Shape& fs = frames[begin].shape();
  const std::size_t per = frames[begin].size();
  std::vector<float> data;
  data.reserve((end - begin) * per);
  for (std::size_t i = begin; i < end; ++i) {
    if (frames[i].shape() != fs) throw ShapeError("stack_frames: mixed frame extents");
    data.insert(data.end(), frames[i].values().begin(), frames[i].values().end());
  }
  return Tensor<float>(Shape{end - begin, fs[0], fs[1], fs[2]}, std::move(data));
}

Tensor<float> stack_frames(const std::vector<Tensor<float>>& frames) { return stack_frames(frames, 0, frames.size()); }

std::vector<double> frame_probabilities(const ModelConfig& config, const ModelParams<float>& params,
                                        const std::vector<Tensor<float>>& frames, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(frames.size());
  for (std::size_t b = 0; b < frames.size(); b += batch_size) {
    const auto p = predict_proba(config, params, stack_frames(frames, b, std::min(frames.size(), b + batch_size)));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

double accuracy(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  if (probabilities.size() != labels.size() || labels.empty()) throw ShapeError("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += ((probabilities[i] >= 0.5) == (labels[i] == 1));
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

TrainResult train_mfr(const std::vector<VideoClip>& train_set, const ModelConfig& model, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  model.validate();
  const FrameSet data = flatten(train_set);
  if (data.frames.empty()) throw ConfigError("train_mfr: empty training set");

  TrainResult result;
  result.checkpoint.config = model;
  result.checkpoint.params = init_params<float>(model, config.seed);
  result.checkpoint.metadata = {config.seed, config.epochs, config.cutoff, config.patch_size, config.mask_ratio,
                                config.mfr_enabled};
  auto& params = result.checkpoint.params;
  AdamState<float> adam = AdamState<float>::zeros_like(params, config.adam);

  if (config.mfr_enabled) {
    // Mask geometry errors surface here rather than inside the parallel batch loop.
    const Shape& fs = data.frames.front().shape();
    try {
      Rng probe(0);
      spectral::freq_mask(fs[1], fs[2], config.cutoff);
      spectral::random_patch_mask(fs[1], fs[2], config.patch_size, config.mask_ratio, probe);
    } catch (const ShapeError& e) {
      throw ConfigError(std::string("train: ") + e.what());
    }
  }

  const std::size_t count = data.frames.size();
  std::vector<std::size_t> order(count);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::derive(config.seed, "shuffle", epoch);
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < count; start += config.batch_size) {
      const std::size_t stop = std::min(count, start + config.batch_size);
      std::vector<Tensor<float>> batch_frames(stop - start);
      std::vector<int> labels(stop - start);
      const auto n = static_cast<std::ptrdiff_t>(stop - start);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < n; ++k) {
        const std::size_t src = order[start + std::size_t(k)];
        if (config.mfr_enabled) {
          Rng mask_rng = Rng::derive(config.seed, "mfr", epoch, start + std::size_t(k));
          batch_frames[k] =
              spectral::mfr_transform(data.frames[src], config.cutoff, config.patch_size, config.mask_ratio, mask_rng)
                  .image;
        } else {
          batch_frames[k] = data.frames[src];
        }
        labels[k] = data.labels[src];
      }

      try {
        auto pass = forward_with_taps(model, params, stack_frames(batch_frames));
        const NodeId loss = cls_loss(pass.graph, pass.logits, labels);
        const double value = pass.graph.value(loss).item();
        if (!std::isfinite(value)) throw NumericalError("non-finite loss");
        const auto grads = pass.graph.backward(loss).parameters();
        adam_step(params, grads, adam);
        loss_sum += value;
        ++batches;
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(start / config.batch_size + 1) + ": " + e.what());
      }
    }
    for (const auto& [name, t] : params) {
      if (!t.all_finite()) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) + ": parameter " + name +
                             " is non-finite");
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(batches);
    result.epoch_losses.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
  }
  return result;
}

}  // namespace acmf
