#include "acmf/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace acmf {

std::string_view perturb_name(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kSharpness: return "sharpness";
    case PerturbKind::kBrightness: return "brightness";
    case PerturbKind::kGaussianNoise: return "gaussian-noise";
    case PerturbKind::kColor: return "color";
  }
  return "unknown";
}

PerturbKind parse_perturb(std::string_view name) {
  if (name == "sharpness") return PerturbKind::kSharpness;
  if (name == "brightness") return PerturbKind::kBrightness;
  if (name == "gaussian-noise") return PerturbKind::kGaussianNoise;
  if (name == "color") return PerturbKind::kColor;
  throw ConfigError("unknown perturbation '" + std::string(name) + "'");
}

Tensor<float> perturb(const Tensor<float>& frame, PerturbKind kind, Rng& rng) {
  if (frame.rank() != 3) throw ShapeError("perturb: expected C x H x W, got " + to_string(frame.shape()));
  const std::size_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  Tensor<float> out(frame.shape());
  auto clamp01 = [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); };

  switch (kind) {
    case PerturbKind::kBrightness:
      for (std::size_t i = 0; i < frame.size(); ++i) out[i] = clamp01(kBrightnessFactor * frame[i]);
      break;
    case PerturbKind::kGaussianNoise: {
      const double sigma = std::sqrt(kNoiseVariance);
      for (std::size_t i = 0; i < frame.size(); ++i) out[i] = clamp01(frame[i] + sigma * rng.normal());
      break;
    }
    case PerturbKind::kSharpness: {
      auto at = [&](std::size_t c, std::ptrdiff_t y, std::ptrdiff_t x) {
        y = std::clamp<std::ptrdiff_t>(y, 0, std::ptrdiff_t(H) - 1);
        x = std::clamp<std::ptrdiff_t>(x, 0, std::ptrdiff_t(W) - 1);
        return static_cast<double>(frame[(c * H + std::size_t(y)) * W + std::size_t(x)]);
      };
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x) {
            double blur = 0;
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) blur += at(c, std::ptrdiff_t(y) + dy, std::ptrdiff_t(x) + dx);
            blur /= 9.0;
            const double v = frame[(c * H + y) * W + x];
            out[(c * H + y) * W + x] = clamp01(v + (kSharpnessFactor - 1.0) * (v - blur));
          }
      break;
    }
    case PerturbKind::kColor: {
      if (C != 3) {
        for (std::size_t i = 0; i < frame.size(); ++i) out[i] = clamp01(frame[i]);
        break;
      }
      const std::size_t L = H * W;
      for (std::size_t p = 0; p < L; ++p) {
        const double lum = 0.299 * frame[p] + 0.587 * frame[L + p] + 0.114 * frame[2 * L + p];
        for (std::size_t c = 0; c < 3; ++c) out[c * L + p] = clamp01(lum + kColorFactor * (frame[c * L + p] - lum));
      }
      break;
    }
  }
  return out;
}

}  // namespace acmf
