#include "acmf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace acmf::spectral {

namespace {

void require_image(const Shape& shape, const char* op) {
  if (shape.size() != 3) throw ShapeError(std::string(op) + ": expected a C x H x W image, got " + to_string(shape));
  for (std::size_t axis : {std::size_t{1}, std::size_t{2}}) {
    if (!is_power_of_two(shape[axis])) {
      throw ShapeError(std::string(op) + ": extent " + std::to_string(shape[axis]) + " (axis " + std::to_string(axis) +
                       ") is not a power of two");
    }
  }
}

std::size_t shifted(std::size_t i, std::size_t n) { return (i + n / 2) % n; }

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t FreqMask::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

Tensor<double> FreqMask::to_tensor() const {
  Tensor<double> t(Shape{height, width});
  for (std::size_t i = 0; i < bits.size(); ++i) t[i] = bits[i];
  return t;
}

Tensor<double> PatchMask::to_tensor() const {
  Tensor<double> t(Shape{height, width});
  for (std::size_t i = 0; i < bits.size(); ++i) t[i] = bits[i];
  return t;
}

namespace {

// e^{-2 pi i k / n} for k < n / 2.
std::vector<Complex> twiddles(std::size_t n) {
  std::vector<Complex> t(n / 2);
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  return t;
}

void fft1d_with(std::vector<Complex>& a, const std::vector<Complex>& tw, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, step = n / len;
    for (std::size_t k = 0; k < half; ++k) {
      const double wr = tw[k * step].real();
      const double wi = inverse ? -tw[k * step].imag() : tw[k * step].imag();
      for (std::size_t start = 0; start < n; start += len) {
        const Complex b = a[start + k + half];
        const Complex t(wr * b.real() - wi * b.imag(), wr * b.imag() + wi * b.real());
        const Complex u = a[start + k];
        a[start + k] = u + t;
        a[start + k + half] = u - t;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
  }
}

}  // namespace

void fft1d(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ShapeError("fft1d: length " + std::to_string(n) + " is not a power of two");
  fft1d_with(a, twiddles(n), inverse);
}

namespace {

// Unshifted 2-D transform of one plane, in place.
void fft2_plane(std::vector<Complex>& plane, std::size_t h, std::size_t w, bool inverse) {
  std::vector<Complex> line(w);
  const auto row_tw = twiddles(w);
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(plane.begin() + static_cast<std::ptrdiff_t>(r * w), w, line.begin());
    fft1d_with(line, row_tw, inverse);
    std::copy(line.begin(), line.end(), plane.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  line.resize(h);
  const auto col_tw = h == w ? row_tw : twiddles(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) line[r] = plane[r * w + c];
    fft1d_with(line, col_tw, inverse);
    for (std::size_t r = 0; r < h; ++r) plane[r * w + c] = line[r];
  }
}

}  // namespace

template <typename T>
Spectrum dft2(const Tensor<T>& image) {
  require_image(image.shape(), "dft2");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  Spectrum s{C, H, W, std::vector<Complex>(C * H * W)};
  std::vector<Complex> plane(H * W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < H * W; ++i) plane[i] = Complex(static_cast<double>(image[c * H * W + i]), 0.0);
    fft2_plane(plane, H, W, false);
    // Centered layout: bin (u, v) holds unshifted frequency ((u + H/2) mod H, (v + W/2) mod W).
    for (std::size_t u = 0; u < H; ++u)
      for (std::size_t v = 0; v < W; ++v) s.at(c, u, v) = plane[shifted(u, H) * W + shifted(v, W)];
  }
  return s;
}

template <typename T>
InverseResult<T> idft2(const Spectrum& s) {
  if (!is_power_of_two(s.height) || !is_power_of_two(s.width) || s.bins.size() != s.channels * s.height * s.width) {
    throw ShapeError("idft2: malformed spectrum " + std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
                     std::to_string(s.width));
  }
  const std::size_t C = s.channels, H = s.height, W = s.width;
  InverseResult<T> out{Tensor<T>(Shape{C, H, W}), 0.0, false};
  std::vector<Complex> plane(H * W);
  double max_real = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t u = 0; u < H; ++u)
      for (std::size_t v = 0; v < W; ++v) plane[shifted(u, H) * W + shifted(v, W)] = s.at(c, u, v);
    fft2_plane(plane, H, W, true);
    for (std::size_t i = 0; i < H * W; ++i) {
      out.image[c * H * W + i] = static_cast<T>(plane[i].real());
      out.imag_residue = std::max(out.imag_residue, std::abs(plane[i].imag()));
      max_real = std::max(max_real, std::abs(plane[i].real()));
    }
  }
  out.symmetry_violation = out.imag_residue > kImagResidueTolerance * std::max(1.0, max_real);
  return out;
}

FreqMask freq_mask(std::size_t height, std::size_t width, std::size_t cutoff) {
  if (cutoff > std::max(height, width) / 2) {
    throw ShapeError("freq_mask: cutoff " + std::to_string(cutoff) + " outside [0, " +
                     std::to_string(std::max(height, width) / 2) + "]");
  }
  FreqMask m{height, width, cutoff, std::vector<std::uint8_t>(height * width)};
  const auto ch = static_cast<std::ptrdiff_t>(height / 2), cw = static_cast<std::ptrdiff_t>(width / 2);
  for (std::size_t u = 0; u < height; ++u)
    for (std::size_t v = 0; v < width; ++v) {
      const auto du = std::abs(static_cast<std::ptrdiff_t>(u) - ch);
      const auto dv = std::abs(static_cast<std::ptrdiff_t>(v) - cw);
      m.bits[u * width + v] = std::max(du, dv) > static_cast<std::ptrdiff_t>(cutoff) ? 1 : 0;
    }
  return m;
}

Spectrum apply_mask(Spectrum s, const FreqMask& mask) {
  if (mask.height != s.height || mask.width != s.width) {
    throw ShapeError("apply_mask: mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                     " vs spectrum " + std::to_string(s.height) + "x" + std::to_string(s.width));
  }
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t u = 0; u < s.height; ++u)
      for (std::size_t v = 0; v < s.width; ++v)
        if (!mask.at(u, v)) s.at(c, u, v) = Complex(0.0, 0.0);
  return s;
}

template <typename T>
HighLowPair<T> decompose_frequency(const Tensor<T>& image, std::size_t cutoff) {
  const Spectrum z = dft2(image);
  const FreqMask mask = freq_mask(z.height, z.width, cutoff);
  InverseResult<T> inv = idft2<T>(apply_mask(z, mask));
  if (inv.symmetry_violation) {
    throw NumericalError("decompose_frequency: imaginary residue " + std::to_string(inv.imag_residue) +
                         " after masking; the mask is not conjugate-symmetric");
  }
  HighLowPair<T> pair{std::move(inv.image), Tensor<T>(image.shape())};
  for (std::size_t i = 0; i < image.size(); ++i) pair.low[i] = image[i] - pair.high[i];
  return pair;
}

PatchMask random_patch_mask(std::size_t height, std::size_t width, std::size_t patch_size, double ratio, Rng& rng) {
  if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0) {
    throw ShapeError("random_patch_mask: patch size " + std::to_string(patch_size) + " does not divide " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ShapeError("random_patch_mask: ratio " + std::to_string(ratio) + " outside [0, 1]");
  const std::size_t rows = height / patch_size, cols = width / patch_size, total = rows * cols;
  const auto zeroed = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));

  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < zeroed; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(idx[i], idx[j]);
  }

  PatchMask m{height, width, patch_size, ratio, zeroed, std::vector<std::uint8_t>(height * width, 1)};
  for (std::size_t i = 0; i < zeroed; ++i) {
    const std::size_t pr = idx[i] / cols, pc = idx[i] % cols;
    for (std::size_t y = pr * patch_size; y < (pr + 1) * patch_size; ++y)
      for (std::size_t x = pc * patch_size; x < (pc + 1) * patch_size; ++x) m.bits[y * width + x] = 0;
  }
  return m;
}

template <typename T>
MfrResult<T> mfr_transform(const Tensor<T>& image, std::size_t cutoff, std::size_t patch_size, double ratio, Rng& rng) {
  require_image(image.shape(), "mfr_transform");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const HighLowPair<T> parts = decompose_frequency(image, cutoff);
  const PatchMask mask = random_patch_mask(H, W, patch_size, ratio, rng);
  MfrResult<T> out{Tensor<T>(image.shape()), 0};
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < H * W; ++p) {
      const std::size_t i = c * H * W + p;
      const T kept = mask.bits[p] ? parts.high[i] : T(0);
      out.image[i] = kept + parts.low[i];
      if (out.image[i] < T(0) || out.image[i] > T(1)) ++out.out_of_unit_range;
    }
  return out;
}

template <typename T>
double high_band_energy(const Tensor<T>& image, std::size_t cutoff) {
  const Spectrum z = dft2(image);
  const FreqMask mask = freq_mask(z.height, z.width, cutoff);
  double e = 0.0;
  for (std::size_t c = 0; c < z.channels; ++c)
    for (std::size_t u = 0; u < z.height; ++u)
      for (std::size_t v = 0; v < z.width; ++v)
        if (mask.at(u, v)) e += std::norm(z.at(c, u, v));
  return e;
}

template Spectrum dft2(const Tensor<float>&);
template Spectrum dft2(const Tensor<double>&);
template InverseResult<float> idft2(const Spectrum&);
template InverseResult<double> idft2(const Spectrum&);
template HighLowPair<float> decompose_frequency(const Tensor<float>&, std::size_t);
template HighLowPair<double> decompose_frequency(const Tensor<double>&, std::size_t);
template MfrResult<float> mfr_transform(const Tensor<float>&, std::size_t, std::size_t, double, Rng&);
template MfrResult<double> mfr_transform(const Tensor<double>&, std::size_t, std::size_t, double, Rng&);
template double high_band_energy(const Tensor<float>&, std::size_t);
template double high_band_energy(const Tensor<double>&, std::size_t);

}  // namespace acmf::spectral
