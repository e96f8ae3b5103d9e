#include <benchmark/benchmark.h>

#include <vector>

#include "acmf/attention.hpp"
#include "acmf/kernels.hpp"
#include "acmf/model.hpp"
#include "acmf/rng.hpp"
#include "acmf/spectral.hpp"

namespace {

using acmf::kernels::ConvGeometry;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  acmf::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Shapes of the detector's layers at batch 32.
ConvGeometry geometry(int which) {
  switch (which) {
    case 0: return {32, 1, 64, 64, 16, 3, 3, 1, 1};   // stem
    case 1: return {32, 16, 32, 32, 32, 1, 1, 1, 0};  // block1 pointwise
    case 2: return {32, 16, 64, 64, 32, 1, 1, 2, 0};  // block1 shortcut
    default: return {32, 32, 16, 16, 64, 1, 1, 1, 0}; // block2 pointwise
  }
}

template <bool Serial>
void BM_ConvForward(benchmark::State& state) {
  const ConvGeometry g = geometry(static_cast<int>(state.range(0)));
  const auto x = random_vec(g.in_size(), 1);
  const auto w = random_vec(g.out_channels * g.in_channels * g.kernel_height * g.kernel_width, 2);
  std::vector<float> y(g.out_size());
  for (auto _ : state) {
    if constexpr (Serial) {
      acmf::kernels::serial::conv2d_forward<float>(g, x, w, {}, y);
    } else {
      acmf::kernels::conv2d_forward<float>(g, x, w, {}, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Serial>
void BM_ConvBackwardWeight(benchmark::State& state) {
  const ConvGeometry g = geometry(static_cast<int>(state.range(0)));
  const auto x = random_vec(g.in_size(), 1);
  const auto dy = random_vec(g.out_size(), 2);
  std::vector<float> dw(g.out_channels * g.in_channels * g.kernel_height * g.kernel_width);
  for (auto _ : state) {
    if constexpr (Serial) {
      acmf::kernels::serial::conv2d_backward_weight<float>(g, x, dy, dw);
    } else {
      acmf::kernels::conv2d_backward_weight<float>(g, x, dy, dw);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Serial>
void BM_ConvBackwardInput(benchmark::State& state) {
  const ConvGeometry g = geometry(static_cast<int>(state.range(0)));
  const auto w = random_vec(g.out_channels * g.in_channels * g.kernel_height * g.kernel_width, 1);
  const auto dy = random_vec(g.out_size(), 2);
  std::vector<float> dx(g.in_size());
  for (auto _ : state) {
    if constexpr (Serial) {
      acmf::kernels::serial::conv2d_backward_input<float>(g, dy, w, dx);
    } else {
      acmf::kernels::conv2d_backward_input<float>(g, dy, w, dx);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Serial>
void BM_DepthwiseForward(benchmark::State& state) {
  const ConvGeometry g{32, 16, 64, 64, 16, 3, 3, 2, 1};
  const auto x = random_vec(g.in_size(), 1);
  const auto w = random_vec(g.in_channels * 9, 2);
  std::vector<float> y(g.out_size());
  for (auto _ : state) {
    if constexpr (Serial) {
      acmf::kernels::serial::depthwise_forward<float>(g, x, w, {}, y);
    } else {
      acmf::kernels::depthwise_forward<float>(g, x, w, {}, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_TrainStep(benchmark::State& state) {
  const acmf::ModelConfig cfg;
  const auto params = acmf::init_params<float>(cfg, 1);
  const acmf::Tensor<float> batch(acmf::Shape{32, 1, 64, 64}, random_vec(32 * 64 * 64, 3));
  const std::vector<int> labels(32, 1);
  for (auto _ : state) {
    auto pass = acmf::forward_with_taps(cfg, params, batch);
    const auto loss = acmf::cls_loss(pass.graph, pass.logits, labels);
    benchmark::DoNotOptimize(pass.graph.backward(loss).parameters());
  }
}

void BM_MfrTransform(benchmark::State& state) {
  const acmf::Tensor<float> image(acmf::Shape{1, 64, 64}, random_vec(64 * 64, 4));
  acmf::Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(acmf::spectral::mfr_transform(image, 2, 8, 0.5, rng));
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/serial")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/omp")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight<true>)->Name("conv_backward_weight/serial")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight<false>)->Name("conv_backward_weight/omp")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInput<true>)->Name("conv_backward_input/serial")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInput<false>)->Name("conv_backward_input/omp")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DepthwiseForward<true>)->Name("depthwise_forward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DepthwiseForward<false>)->Name("depthwise_forward/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Name("train_step/batch32")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MfrTransform)->Name("mfr_transform/64x64")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
