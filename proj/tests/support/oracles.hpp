#pragma once

#include <cstdint>
#include <vector>

#include "acmf/attention.hpp"
#include "acmf/model.hpp"
#include "acmf/rng.hpp"

namespace acmf::testing {

// Bilinear resize of one h x w plane, half-pixel centers, edge clamp.
std::vector<double> bilinear_oracle(const std::vector<double>& plane, std::size_t h, std::size_t w, std::size_t H,
                                    std::size_t W);

// Random parameters whose fake logit is the plain spatial mean of tap
// channel 0: head row 1 is e_0 and both head biases are zero.
ModelParams<double> single_channel_model(const ModelConfig& config, std::uint64_t seed);

// Closed-form Grad-CAM map of single_channel_model: channel 0 of the tap,
// rectified, upsampled to input size and divided by its maximum.
Tensor<double> single_channel_map(const ModelConfig& config, const ModelParams<double>& params,
                                  const Tensor<double>& image);

// Mean over all (positive, negative) pairs of [s+ > s-] + 0.5 [s+ == s-].
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace acmf::testing
