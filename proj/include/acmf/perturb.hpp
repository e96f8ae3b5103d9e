#pragma once

#include <string_view>

#include "acmf/rng.hpp"
#include "acmf/tensor.hpp"

namespace acmf {

enum class PerturbKind { kSharpness, kBrightness, kGaussianNoise, kColor };

std::string_view perturb_name(PerturbKind kind);
PerturbKind parse_perturb(std::string_view name);

inline constexpr double kBrightnessFactor = 1.5;
inline constexpr double kNoiseVariance = 0.0001;
inline constexpr double kSharpnessFactor = 2.0;
inline constexpr double kColorFactor = 2.0;

// Frame C x H x W in [0, 1]; the result is clamped to [0, 1].
//   brightness   x * 1.5
//   noise        x + N(0, 0.0001) per value (draws from rng)
//   sharpness    x + (2 - 1) * (x - boxblur3(x)), edge-replicated 3x3 box
//   color        lum + 2 * (x - lum) per channel, lum = 0.299 R + 0.587 G + 0.114 B;
//                identity on single-channel frames
Tensor<float> perturb(const Tensor<float>& frame, PerturbKind kind, Rng& rng);

}  // namespace acmf
