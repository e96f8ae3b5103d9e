#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace acmf::kernels {

// Geometry of a zero-padded 2-D convolution over an N x C x H x W input.
// Dense convolution: weight K x C x KH x KW. Depthwise: weight C x 1 x KH x KW
// and K == C.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_height = 1;
  std::size_t kernel_width = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_height() const { return (in_height + 2 * pad - kernel_height) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * pad - kernel_width) / stride + 1; }
  std::size_t in_size() const { return batch * in_channels * in_height * in_width; }
  std::size_t out_size() const { return batch * out_channels * out_height() * out_width(); }
};

struct ResizeGeometry {
  std::size_t planes = 1;  // N * C
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t out_height = 1;
  std::size_t out_width = 1;
};

// OpenMP kernels. Every output element is produced by exactly one thread in a
// fixed summation order, so results are bit-identical for any thread count.
// An empty bias span means "no bias".
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                    std::span<T> y);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx);
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw);

template <typename T>
void depthwise_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                       std::span<T> y);
template <typename T>
void depthwise_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx);
template <typename T>
void depthwise_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw);

// Sum of dy over batch and space per output channel.
template <typename T>
void bias_backward(std::size_t batch, std::size_t channels, std::size_t spatial, std::span<const T> dy,
                   std::span<T> db);

// Bilinear resampling with align_corners = false (half-pixel centers,
// source coordinates clamped at 0 and at the last row/column).
template <typename T>
void bilinear_forward(const ResizeGeometry& g, std::span<const T> x, std::span<T> y);
template <typename T>
void bilinear_backward(const ResizeGeometry& g, std::span<const T> dy, std::span<T> dx);

// Straight-line serial versions: the kernels above are tested and
// benchmarked against these.
namespace serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                    std::span<T> y);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx);
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw);
template <typename T>
void depthwise_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                       std::span<T> y);
template <typename T>
void depthwise_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx);
template <typename T>
void depthwise_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw);
template <typename T>
void bilinear_forward(const ResizeGeometry& g, std::span<const T> x, std::span<T> y);

}  // namespace serial

// Threads available to the kernels: ACMF_THREADS if set, else the OpenMP default.
int configured_threads();
void apply_thread_limit_from_env();

}  // namespace acmf::kernels
