#include "support/examples.hpp"

#include <cmath>
#include <sstream>

namespace acmf::testing {

namespace {

Tensor<float> filled(std::size_t c, std::size_t h, std::size_t w, float v) { return Tensor<float>(Shape{c, h, w}, v); }

// Largest deviation from `expected`, evaluated per element.
double worst(const Tensor<float>& got, const std::vector<double>& expected) {
  double d = 0;
  for (std::size_t i = 0; i < got.size(); ++i) d = std::max(d, std::abs(double(got[i]) - expected[i]));
  return d;
}

ExampleResult make(PerturbKind kind, std::string name, double error, double tol) {
  std::ostringstream os;
  os << "max error " << error << " (tol " << tol << ")";
  return {kind, std::move(name), error <= tol, os.str()};
}

}  // namespace

std::vector<ExampleResult> check_perturbation_examples() {
  std::vector<ExampleResult> out;
  Rng unused(0);
  const double tol = 1e-6;

  // brightness
  {
    const auto zeros = perturb(filled(1, 4, 4, 0.0f), PerturbKind::kBrightness, unused);
    out.push_back(make(PerturbKind::kBrightness, "zeros stay zeros", worst(zeros, std::vector<double>(16, 0.0)), tol));
    const auto mid = perturb(filled(1, 4, 4, 0.4f), PerturbKind::kBrightness, unused);
    out.push_back(make(PerturbKind::kBrightness, "0.4 scales to 0.6", worst(mid, std::vector<double>(16, 0.6)), tol));
    const auto hi = perturb(filled(1, 4, 4, 0.8f), PerturbKind::kBrightness, unused);
    out.push_back(make(PerturbKind::kBrightness, "0.8 clamps to 1", worst(hi, std::vector<double>(16, 1.0)), tol));
  }

  // gaussian-noise
  {
    const auto frame = filled(1, 64, 64, 0.5f);
    Rng a(7), b(7), c(8);
    const auto x = perturb(frame, PerturbKind::kGaussianNoise, a);
    const auto y = perturb(frame, PerturbKind::kGaussianNoise, b);
    const auto z = perturb(frame, PerturbKind::kGaussianNoise, c);
    out.push_back({PerturbKind::kGaussianNoise, "same seed twice is identical", x == y, ""});
    out.push_back({PerturbKind::kGaussianNoise, "different seeds differ", !(x == z), ""});
    double sum = 0, sq = 0;
    for (float v : x.values()) {
      sum += v - 0.5;
      sq += (v - 0.5) * (v - 0.5);
    }
    const double n = double(x.size()), var = sq / n - (sum / n) * (sum / n);
    out.push_back(make(PerturbKind::kGaussianNoise, "sample variance near 1e-4", std::abs(var - 1e-4), 1e-5));
  }

  // sharpness
  {
    const auto flat = perturb(filled(1, 5, 5, 0.3f), PerturbKind::kSharpness, unused);
    out.push_back(make(PerturbKind::kSharpness, "constant image unchanged", worst(flat, std::vector<double>(25, 0.3)), tol));

    // Impulse of 0.45 on 0.2: the centre gains (0.45 - blur) with blur = (8 * 0.2 + 0.45) / 9.
    Tensor<float> spike = filled(1, 5, 5, 0.2f);
    spike[12] = 0.45f;
    const auto s = perturb(spike, PerturbKind::kSharpness, unused);
    std::vector<double> expected(25, 0.2);
    const double centre_blur = (8 * 0.2 + 0.45) / 9.0, ring_blur = (8 * 0.2 + 0.45) / 9.0;
    expected[12] = 0.45 + (0.45 - centre_blur);
    for (std::size_t y = 1; y <= 3; ++y)
      for (std::size_t x = 1; x <= 3; ++x)
        if (y * 5 + x != 12) expected[y * 5 + x] = 0.2 + (0.2 - ring_blur);
    out.push_back(make(PerturbKind::kSharpness, "impulse overshoots by its contrast", worst(s, expected), tol));

    // Vertical step 0 | 1: the columns next to the edge clamp to 0 and 1.
    Tensor<float> step(Shape{1, 4, 4});
    for (std::size_t i = 0; i < 16; ++i) step[i] = i % 4 >= 2 ? 1.0f : 0.0f;
    const auto e = perturb(step, PerturbKind::kSharpness, unused);
    std::vector<double> step_expected(16);
    for (std::size_t i = 0; i < 16; ++i) step_expected[i] = i % 4 >= 2 ? 1.0 : 0.0;
    out.push_back(make(PerturbKind::kSharpness, "hard edge clamps to [0, 1]", worst(e, step_expected), tol));
  }

  // color
  {
    Rng rng(3);
    Tensor<float> gray_frame(Shape{1, 4, 4});
    for (auto& v : gray_frame.data()) v = float(rng.uniform());
    const auto g = perturb(gray_frame, PerturbKind::kColor, unused);
    out.push_back(make(PerturbKind::kColor, "single channel is identity",
                       worst(g, std::vector<double>(gray_frame.values().begin(), gray_frame.values().end())), 0.0));

    const auto neutral = perturb(filled(3, 2, 2, 0.35f), PerturbKind::kColor, unused);
    out.push_back(make(PerturbKind::kColor, "neutral gray unchanged", worst(neutral, std::vector<double>(12, 0.35)), tol));

    // (0.5, 0.4, 0.3): lum = 0.4185, so each channel doubles its distance from lum.
    Tensor<float> px(Shape{3, 1, 1}, std::vector<float>{0.5f, 0.4f, 0.3f});
    const auto c = perturb(px, PerturbKind::kColor, unused);
    out.push_back(make(PerturbKind::kColor, "saturation doubles around luminance", worst(c, {0.5815, 0.3815, 0.1815}),
                       tol));
  }
  return out;
}

}  // namespace acmf::testing
