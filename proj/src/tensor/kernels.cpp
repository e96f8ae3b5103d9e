#include "acmf/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <string>
#include <vector>

namespace acmf::kernels {

namespace {

using Index = std::ptrdiff_t;

// Output positions o in [lo, hi) for which o * stride + offset lands inside [0, in_len).
struct ValidRange {
  Index lo;
  Index hi;
};

ValidRange valid_range(Index out_len, Index in_len, Index offset, Index stride) {
  Index lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  const Index last = in_len - 1 - offset;
  Index hi = last < 0 ? 0 : std::min(out_len, last / stride + 1);
  if (hi < lo) hi = lo;
  return {lo, hi};
}

struct Sampling {
  std::size_t i0;
  std::size_t i1;
  double w0;
  double w1;
};

Sampling sample_coordinate(std::size_t dst, std::size_t in_len, std::size_t out_len) {
  const double scale = static_cast<double>(in_len) / static_cast<double>(out_len);
  double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  std::size_t i0 = static_cast<std::size_t>(src);
  if (i0 > in_len - 1) i0 = in_len - 1;
  const std::size_t i1 = std::min(i0 + 1, in_len - 1);
  const double w1 = src - static_cast<double>(i0);
  return {i0, i1, 1.0 - w1, w1};
}

// Dot product with eight independent partial sums combined in a fixed order.
// Vectorizes without relaxing floating-point semantics, and the result does
// not depend on the thread count.
template <typename T>
T dot_lanes(const T* a, const T* b, Index len) {
  T lanes[8] = {};
  Index i = 0;
  for (; i + 8 <= len; i += 8)
    for (Index l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
  for (Index l = 0; i < len; ++i, ++l) lanes[l] += a[i] * b[i];
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

bool is_pointwise(const ConvGeometry& g) { return g.kernel_height == 1 && g.kernel_width == 1 && g.pad == 0; }

// x subsampled at the output grid of a strided 1x1 convolution: [N, C, OH*OW].
template <typename T>
std::vector<T> gather_strided(const ConvGeometry& g, std::span<const T> x) {
  const Index NC = g.batch * g.in_channels, H = g.in_height, W = g.in_width, S = g.stride;
  const Index OH = g.out_height(), OW = g.out_width();
  std::vector<T> out(static_cast<std::size_t>(NC * OH * OW));
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < NC; ++p)
    for (Index oh = 0; oh < OH; ++oh)
      for (Index ow = 0; ow < OW; ++ow) out[(p * OH + oh) * OW + ow] = x[(p * H + oh * S) * W + ow * S];
  return out;
}

template <typename T>
void pointwise_forward(const ConvGeometry& g, const T* x, std::span<const T> w, std::span<const T> bias,
                       std::span<T> y) {
  const Index N = g.batch, C = g.in_channels, K = g.out_channels, L = g.out_height() * g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index k = 0; k < K; ++k) {
      T* out = y.data() + (n * K + k) * L;
      std::fill(out, out + L, bias.empty() ? T(0) : bias[k]);
      for (Index c = 0; c < C; ++c) {
        const T wv = w[k * C + c];
        const T* in = x + (n * C + c) * L;
        for (Index p = 0; p < L; ++p) out[p] += wv * in[p];
      }
    }
  }
}

// Gradient w.r.t. the (subsampled) input, [N, C, OH*OW].
template <typename T>
void pointwise_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, T* dxs) {
  const Index N = g.batch, C = g.in_channels, K = g.out_channels, L = g.out_height() * g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < C; ++c) {
      T* din = dxs + (n * C + c) * L;
      std::fill(din, din + L, T(0));
      for (Index k = 0; k < K; ++k) {
        const T wv = w[k * C + c];
        const T* dout = dy.data() + (n * K + k) * L;
        for (Index p = 0; p < L; ++p) din[p] += wv * dout[p];
      }
    }
  }
}

template <typename T>
void pointwise_backward_weight(const ConvGeometry& g, const T* xs, std::span<const T> dy, std::span<T> dw) {
  const Index N = g.batch, C = g.in_channels, K = g.out_channels, L = g.out_height() * g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index k = 0; k < K; ++k) {
    for (Index c = 0; c < C; ++c) {
      T acc = 0;
      for (Index n = 0; n < N; ++n) acc += dot_lanes(dy.data() + (n * K + k) * L, xs + (n * C + c) * L, L);
      dw[k * C + c] = acc;
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                    std::span<T> y) {
  if (is_pointwise(g)) {
    if (g.stride == 1) return pointwise_forward(g, x.data(), w, bias, y);
    const auto xs = gather_strided(g, x);
    return pointwise_forward(g, xs.data(), w, bias, y);
  }
  const Index N = g.batch, C = g.in_channels, H = g.in_height, W = g.in_width, K = g.out_channels;
  const Index KH = g.kernel_height, KW = g.kernel_width, S = g.stride, P = g.pad;
  const Index OH = g.out_height(), OW = g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index k = 0; k < K; ++k) {
      T* out = y.data() + (n * K + k) * OH * OW;
      const T b = bias.empty() ? T(0) : bias[k];
      std::fill(out, out + OH * OW, b);
      for (Index c = 0; c < C; ++c) {
        const T* in = x.data() + (n * C + c) * H * W;
        const T* wk = w.data() + (k * C + c) * KH * KW;
        for (Index i = 0; i < KH; ++i) {
          const ValidRange rows = valid_range(OH, H, i - P, S);
          for (Index j = 0; j < KW; ++j) {
            const T wv = wk[i * KW + j];
            const ValidRange cols = valid_range(OW, W, j - P, S);
            for (Index oh = rows.lo; oh < rows.hi; ++oh) {
              const T* in_row = in + (oh * S + i - P) * W + (j - P);
              T* out_row = out + oh * OW;
              if (S == 1) {
                for (Index ow = cols.lo; ow < cols.hi; ++ow) out_row[ow] += wv * in_row[ow];
              } else {
                for (Index ow = cols.lo; ow < cols.hi; ++ow) out_row[ow] += wv * in_row[ow * S];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx) {
  if (is_pointwise(g)) {
    if (g.stride == 1) return pointwise_backward_input(g, dy, w, dx.data());
    const Index NC = g.batch * g.in_channels, H = g.in_height, W = g.in_width, S = g.stride;
    const Index OH = g.out_height(), OW = g.out_width();
    std::vector<T> dxs(static_cast<std::size_t>(NC * OH * OW));
    pointwise_backward_input(g, dy, w, dxs.data());
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < NC; ++p) {
      T* din = dx.data() + p * H * W;
      std::fill(din, din + H * W, T(0));
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) din[(oh * S) * W + ow * S] = dxs[(p * OH + oh) * OW + ow];
    }
    return;
  }
  const Index N = g.batch, C = g.in_channels, H = g.in_height, W = g.in_width, K = g.out_channels;
  const Index KH = g.kernel_height, KW = g.kernel_width, S = g.stride, P = g.pad;
  const Index OH = g.out_height(), OW = g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < C; ++c) {
      T* din = dx.data() + (n * C + c) * H * W;
      std::fill(din, din + H * W, T(0));
      for (Index k = 0; k < K; ++k) {
        const T* dout = dy.data() + (n * K + k) * OH * OW;
        const T* wk = w.data() + (k * C + c) * KH * KW;
        for (Index i = 0; i < KH; ++i) {
          const ValidRange rows = valid_range(OH, H, i - P, S);
          for (Index j = 0; j < KW; ++j) {
            const T wv = wk[i * KW + j];
            const ValidRange cols = valid_range(OW, W, j - P, S);
            for (Index oh = rows.lo; oh < rows.hi; ++oh) {
              T* din_row = din + (oh * S + i - P) * W + (j - P);
              const T* dout_row = dout + oh * OW;
              for (Index ow = cols.lo; ow < cols.hi; ++ow) din_row[ow * S] += wv * dout_row[ow];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw) {
  if (is_pointwise(g)) {
    if (g.stride == 1) return pointwise_backward_weight(g, x.data(), dy, dw);
    const auto xs = gather_strided(g, x);
    return pointwise_backward_weight(g, xs.data(), dy, dw);
  }
  const Index N = g.batch, C = g.in_channels, H = g.in_height, W = g.in_width, K = g.out_channels;
  const Index KH = g.kernel_height, KW = g.kernel_width, S = g.stride, P = g.pad;
  const Index OH = g.out_height(), OW = g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index k = 0; k < K; ++k) {
    for (Index c = 0; c < C; ++c) {
      T* dwk = dw.data() + (k * C + c) * KH * KW;
      for (Index i = 0; i < KH; ++i) {
        const ValidRange rows = valid_range(OH, H, i - P, S);
        for (Index j = 0; j < KW; ++j) {
          const ValidRange cols = valid_range(OW, W, j - P, S);
          T acc = 0;
          for (Index n = 0; n < N; ++n) {
            const T* in = x.data() + (n * C + c) * H * W;
            const T* dout = dy.data() + (n * K + k) * OH * OW;
            for (Index oh = rows.lo; oh < rows.hi; ++oh) {
              const T* in_row = in + (oh * S + i - P) * W + (j - P);
              const T* dout_row = dout + oh * OW;
              if (S == 1) {
                acc += dot_lanes(dout_row + cols.lo, in_row + cols.lo, cols.hi - cols.lo);
              } else {
                for (Index ow = cols.lo; ow < cols.hi; ++ow) acc += dout_row[ow] * in_row[ow * S];
              }
            }
          }
          dwk[i * KW + j] = acc;
        }
      }
    }
  }
}

template <typename T>
void depthwise_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                       std::span<T> y) {
  const Index N = g.batch, C = g.in_channels, H = g.in_height, W = g.in_width;
  const Index KH = g.kernel_height, KW = g.kernel_width, S = g.stride, P = g.pad;
  const Index OH = g.out_height(), OW = g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < C; ++c) {
      T* out = y.data() + (n * C + c) * OH * OW;
      const T* in = x.data() + (n * C + c) * H * W;
      const T* wc = w.data() + c * KH * KW;
      std::fill(out, out + OH * OW, bias.empty() ? T(0) : bias[c]);
      for (Index i = 0; i < KH; ++i) {
        const ValidRange rows = valid_range(OH, H, i - P, S);
        for (Index j = 0; j < KW; ++j) {
          const T wv = wc[i * KW + j];
          const ValidRange cols = valid_range(OW, W, j - P, S);
          for (Index oh = rows.lo; oh < rows.hi; ++oh) {
            const T* in_row = in + (oh * S + i - P) * W + (j - P);
            T* out_row = out + oh * OW;
            for (Index ow = cols.lo; ow < cols.hi; ++ow) out_row[ow] += wv * in_row[ow * S];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx) {
  const Index N = g.batch, C = g.in_channels, H = g.in_height, W = g.in_width;
  const Index KH = g.kernel_height, KW = g.kernel_width, S = g.stride, P = g.pad;
  const Index OH = g.out_height(), OW = g.out_width();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < C; ++c) {
      T* din = dx.data() + (n * C + c) * H * W;
      const T* dout = dy.data() + (n * C + c) * OH * OW;
      const T* wc = w.data() + c * KH * KW;
      std::fill(din, din + H * W, T(0));
      for (Index i = 0; i < KH; ++i) {
        const ValidRange rows = valid_range(OH, H, i - P, S);
        for (Index j = 0; j < KW; ++j) {
          const T wv = wc[i * KW + j];
          const ValidRange cols = valid_range(OW, W, j - P, S);
          for (Index oh = rows.lo; oh < rows.hi; ++oh) {
            T* din_row = din + (oh * S + i - P) * W + (j - P);
            const T* dout_row = dout + oh * OW;
            for (Index ow = cols.lo; ow < cols.hi; ++ow) din_row[ow * S] += wv * dout_row[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw) {
  const Index N = g.batch, C = g.in_channels, H = g.in_height, W = g.in_width;
  const Index KH = g.kernel_height, KW = g.kernel_width, S = g.stride, P = g.pad;
  const Index OH = g.out_height(), OW = g.out_width();
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < C; ++c) {
    T* dwc = dw.data() + c * KH * KW;
    for (Index i = 0; i < KH; ++i) {
      const ValidRange rows = valid_range(OH, H, i - P, S);
      for (Index j = 0; j < KW; ++j) {
        const ValidRange cols = valid_range(OW, W, j - P, S);
        T acc = 0;
        for (Index n = 0; n < N; ++n) {
          const T* in = x.data() + (n * C + c) * H * W;
          const T* dout = dy.data() + (n * C + c) * OH * OW;
          for (Index oh = rows.lo; oh < rows.hi; ++oh) {
            const T* in_row = in + (oh * S + i - P) * W + (j - P);
            const T* dout_row = dout + oh * OW;
            for (Index ow = cols.lo; ow < cols.hi; ++ow) acc += dout_row[ow] * in_row[ow * S];
          }
        }
        dwc[i * KW + j] = acc;
      }
    }
  }
}

template <typename T>
void bias_backward(std::size_t batch, std::size_t channels, std::size_t spatial, std::span<const T> dy,
                   std::span<T> db) {
  const Index N = batch, C = channels, L = spatial;
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < C; ++c) {
    T acc = 0;
    for (Index n = 0; n < N; ++n) {
      const T* d = dy.data() + (n * C + c) * L;
      for (Index i = 0; i < L; ++i) acc += d[i];
    }
    db[c] = acc;
  }
}

template <typename T>
void bilinear_forward(const ResizeGeometry& g, std::span<const T> x, std::span<T> y) {
  const Index planes = g.planes;
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < planes; ++p) {
    const T* in = x.data() + p * g.in_height * g.in_width;
    T* out = y.data() + p * g.out_height * g.out_width;
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      const Sampling sy = sample_coordinate(oy, g.in_height, g.out_height);
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        const Sampling sx = sample_coordinate(ox, g.in_width, g.out_width);
        const T v00 = in[sy.i0 * g.in_width + sx.i0], v01 = in[sy.i0 * g.in_width + sx.i1];
        const T v10 = in[sy.i1 * g.in_width + sx.i0], v11 = in[sy.i1 * g.in_width + sx.i1];
        out[oy * g.out_width + ox] = static_cast<T>(sy.w0 * (sx.w0 * v00 + sx.w1 * v01) +
                                                    sy.w1 * (sx.w0 * v10 + sx.w1 * v11));
      }
    }
  }
}

template <typename T>
void bilinear_backward(const ResizeGeometry& g, std::span<const T> dy, std::span<T> dx) {
  const Index planes = g.planes;
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < planes; ++p) {
    T* din = dx.data() + p * g.in_height * g.in_width;
    const T* dout = dy.data() + p * g.out_height * g.out_width;
    std::fill(din, din + g.in_height * g.in_width, T(0));
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      const Sampling sy = sample_coordinate(oy, g.in_height, g.out_height);
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        const Sampling sx = sample_coordinate(ox, g.in_width, g.out_width);
        const double d = dout[oy * g.out_width + ox];
        din[sy.i0 * g.in_width + sx.i0] += static_cast<T>(sy.w0 * sx.w0 * d);
        din[sy.i0 * g.in_width + sx.i1] += static_cast<T>(sy.w0 * sx.w1 * d);
        din[sy.i1 * g.in_width + sx.i0] += static_cast<T>(sy.w1 * sx.w0 * d);
        din[sy.i1 * g.in_width + sx.i1] += static_cast<T>(sy.w1 * sx.w1 * d);
      }
    }
  }
}

namespace serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                    std::span<T> y) {
  const Index OH = g.out_height(), OW = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) {
          T acc = bias.empty() ? T(0) : bias[k];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t i = 0; i < g.kernel_height; ++i)
              for (std::size_t j = 0; j < g.kernel_width; ++j) {
                const Index ih = oh * Index(g.stride) + Index(i) - Index(g.pad);
                const Index iw = ow * Index(g.stride) + Index(j) - Index(g.pad);
                if (ih < 0 || iw < 0 || ih >= Index(g.in_height) || iw >= Index(g.in_width)) continue;
                acc += w[((k * g.in_channels + c) * g.kernel_height + i) * g.kernel_width + j] *
                       x[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw];
              }
          y[((n * g.out_channels + k) * OH + oh) * OW + ow] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx) {
  const Index OH = g.out_height(), OW = g.out_width();
  std::fill(dx.begin(), dx.end(), T(0));
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) {
          const T d = dy[((n * g.out_channels + k) * OH + oh) * OW + ow];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t i = 0; i < g.kernel_height; ++i)
              for (std::size_t j = 0; j < g.kernel_width; ++j) {
                const Index ih = oh * Index(g.stride) + Index(i) - Index(g.pad);
                const Index iw = ow * Index(g.stride) + Index(j) - Index(g.pad);
                if (ih < 0 || iw < 0 || ih >= Index(g.in_height) || iw >= Index(g.in_width)) continue;
                dx[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw] +=
                    d * w[((k * g.in_channels + c) * g.kernel_height + i) * g.kernel_width + j];
              }
        }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw) {
  const Index OH = g.out_height(), OW = g.out_width();
  std::fill(dw.begin(), dw.end(), T(0));
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) {
          const T d = dy[((n * g.out_channels + k) * OH + oh) * OW + ow];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t i = 0; i < g.kernel_height; ++i)
              for (std::size_t j = 0; j < g.kernel_width; ++j) {
                const Index ih = oh * Index(g.stride) + Index(i) - Index(g.pad);
                const Index iw = ow * Index(g.stride) + Index(j) - Index(g.pad);
                if (ih < 0 || iw < 0 || ih >= Index(g.in_height) || iw >= Index(g.in_width)) continue;
                dw[((k * g.in_channels + c) * g.kernel_height + i) * g.kernel_width + j] +=
                    d * x[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw];
              }
        }
}

template <typename T>
void depthwise_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                       std::span<T> y) {
  const Index OH = g.out_height(), OW = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) {
          T acc = bias.empty() ? T(0) : bias[c];
          for (std::size_t i = 0; i < g.kernel_height; ++i)
            for (std::size_t j = 0; j < g.kernel_width; ++j) {
              const Index ih = oh * Index(g.stride) + Index(i) - Index(g.pad);
              const Index iw = ow * Index(g.stride) + Index(j) - Index(g.pad);
              if (ih < 0 || iw < 0 || ih >= Index(g.in_height) || iw >= Index(g.in_width)) continue;
              acc += w[(c * g.kernel_height + i) * g.kernel_width + j] *
                     x[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw];
            }
          y[((n * g.in_channels + c) * OH + oh) * OW + ow] = acc;
        }
}

template <typename T>
void depthwise_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx) {
  const Index OH = g.out_height(), OW = g.out_width();
  std::fill(dx.begin(), dx.end(), T(0));
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) {
          const T d = dy[((n * g.in_channels + c) * OH + oh) * OW + ow];
          for (std::size_t i = 0; i < g.kernel_height; ++i)
            for (std::size_t j = 0; j < g.kernel_width; ++j) {
              const Index ih = oh * Index(g.stride) + Index(i) - Index(g.pad);
              const Index iw = ow * Index(g.stride) + Index(j) - Index(g.pad);
              if (ih < 0 || iw < 0 || ih >= Index(g.in_height) || iw >= Index(g.in_width)) continue;
              dx[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw] +=
                  d * w[(c * g.kernel_height + i) * g.kernel_width + j];
            }
        }
}

template <typename T>
void depthwise_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw) {
  const Index OH = g.out_height(), OW = g.out_width();
  std::fill(dw.begin(), dw.end(), T(0));
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (Index oh = 0; oh < OH; ++oh)
        for (Index ow = 0; ow < OW; ++ow) {
          const T d = dy[((n * g.in_channels + c) * OH + oh) * OW + ow];
          for (std::size_t i = 0; i < g.kernel_height; ++i)
            for (std::size_t j = 0; j < g.kernel_width; ++j) {
              const Index ih = oh * Index(g.stride) + Index(i) - Index(g.pad);
              const Index iw = ow * Index(g.stride) + Index(j) - Index(g.pad);
              if (ih < 0 || iw < 0 || ih >= Index(g.in_height) || iw >= Index(g.in_width)) continue;
              dw[(c * g.kernel_height + i) * g.kernel_width + j] +=
                  d * x[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw];
            }
        }
}

template <typename T>
void bilinear_forward(const ResizeGeometry& g, std::span<const T> x, std::span<T> y) {
  for (std::size_t p = 0; p < g.planes; ++p)
    for (std::size_t oy = 0; oy < g.out_height; ++oy)
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        const Sampling sy = sample_coordinate(oy, g.in_height, g.out_height);
        const Sampling sx = sample_coordinate(ox, g.in_width, g.out_width);
        const std::size_t base = p * g.in_height * g.in_width;
        const double v = sy.w0 * sx.w0 * x[base + sy.i0 * g.in_width + sx.i0] +
                         sy.w0 * sx.w1 * x[base + sy.i0 * g.in_width + sx.i1] +
                         sy.w1 * sx.w0 * x[base + sy.i1 * g.in_width + sx.i0] +
                         sy.w1 * sx.w1 * x[base + sy.i1 * g.in_width + sx.i1];
        y[(p * g.out_height + oy) * g.out_width + ox] = static_cast<T>(v);
      }
}

}  // namespace serial

int configured_threads() {
  if (const char* env = std::getenv("ACMF_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

void apply_thread_limit_from_env() { omp_set_num_threads(configured_threads()); }

#define ACMF_INSTANTIATE_KERNELS(T)                                                                           \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,               \
                                  std::span<const T>, std::span<T>);                                          \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,        \
                                         std::span<T>);                                                       \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,       \
                                          std::span<T>);                                                      \
  template void depthwise_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,            \
                                     std::span<const T>, std::span<T>);                                       \
  template void depthwise_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,     \
                                            std::span<T>);                                                    \
  template void depthwise_backward_weight<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,    \
                                             std::span<T>);                                                   \
  template void bias_backward<T>(std::size_t, std::size_t, std::size_t, std::span<const T>, std::span<T>);   \
  template void bilinear_forward<T>(const ResizeGeometry&, std::span<const T>, std::span<T>);                \
  template void bilinear_backward<T>(const ResizeGeometry&, std::span<const T>, std::span<T>);               \
  template void serial::conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,       \
                                          std::span<const T>, std::span<T>);                                  \
  template void serial::conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                                 std::span<T>);                                               \
  template void serial::conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,                   \
                                                  std::span<const T>, std::span<T>);                          \
  template void serial::depthwise_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,    \
                                             std::span<const T>, std::span<T>);                               \
  template void serial::depthwise_backward_input<T>(const ConvGeometry&, std::span<const T>,                 \
                                                    std::span<const T>, std::span<T>);                        \
  template void serial::depthwise_backward_weight<T>(const ConvGeometry&, std::span<const T>,                \
                                                     std::span<const T>, std::span<T>);                       \
  template void serial::bilinear_forward<T>(const ResizeGeometry&, std::span<const T>, std::span<T>);

ACMF_INSTANTIATE_KERNELS(float)
ACMF_INSTANTIATE_KERNELS(double)

#undef ACMF_INSTANTIATE_KERNELS

}  // namespace acmf::kernels
