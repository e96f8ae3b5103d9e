#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "acmf/rng.hpp"
#include "acmf/tensor.hpp"

namespace acmf::spectral {

using Complex = std::complex<double>;

// Per-channel centered 2-D spectrum: the DC bin sits at (H/2, W/2).
// Bins are stored channel-major, then row-major.
struct Spectrum {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Complex> bins;

  Complex& at(std::size_t c, std::size_t u, std::size_t v) { return bins[(c * height + u) * width + v]; }
  const Complex& at(std::size_t c, std::size_t u, std::size_t v) const { return bins[(c * height + u) * width + v]; }
};

// Binary high-pass mask on the centered grid: 1 where
// max(|u - H/2|, |v - W/2|) > cutoff. Bins at distance exactly `cutoff`
// stay in the low component.
struct FreqMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t cutoff = 0;
  std::vector<std::uint8_t> bits;

  bool at(std::size_t u, std::size_t v) const { return bits[u * width + v] != 0; }
  std::size_t count() const;
  Tensor<double> to_tensor() const;
};

// Spatial mask over a regular grid of patch_size x patch_size cells; each
// cell is uniformly 0 or 1.
struct PatchMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t patch_size = 1;
  double ratio = 0.0;
  std::size_t zeroed_patches = 0;
  std::vector<std::uint8_t> bits;

  bool at(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
  std::size_t patch_count() const { return (height / patch_size) * (width / patch_size); }
  Tensor<double> to_tensor() const;
};

template <typename T>
struct HighLowPair {
  Tensor<T> high;
  Tensor<T> low;
};

template <typename T>
struct InverseResult {
  Tensor<T> image;
  double imag_residue = 0.0;      // max |Im| discarded
  bool symmetry_violation = false;  // residue above 1e-6 * max(1, max |Re|)
};

template <typename T>
struct MfrResult {
  Tensor<T> image;
  std::size_t out_of_unit_range = 0;  // values outside [0, 1]; reported, never clamped
};

constexpr double kImagResidueTolerance = 1e-6;

bool is_power_of_two(std::size_t n);

// In-place radix-2 FFT; the inverse applies the 1/n factor.
void fft1d(std::vector<Complex>& data, bool inverse);

// Image layout is C x H x W; H and W must be powers of two.
template <typename T>
Spectrum dft2(const Tensor<T>& image);

template <typename T>
InverseResult<T> idft2(const Spectrum& spectrum);

FreqMask freq_mask(std::size_t height, std::size_t width, std::size_t cutoff);

// Zeroes the bins where the mask is 0 (every channel).
Spectrum apply_mask(Spectrum spectrum, const FreqMask& mask);

template <typename T>
HighLowPair<T> decompose_frequency(const Tensor<T>& image, std::size_t cutoff);

// Zeroes round(ratio * patches) patches chosen by a partial Fisher-Yates
// shuffle: for i in [0, k): j = i + rng.below(P - i); swap(idx[i], idx[j]).
// The first k entries of idx are the zeroed patches.
PatchMask random_patch_mask(std::size_t height, std::size_t width, std::size_t patch_size, double ratio, Rng& rng);

// x_hat = high * M + low with one patch mask shared across channels.
template <typename T>
MfrResult<T> mfr_transform(const Tensor<T>& image, std::size_t cutoff, std::size_t patch_size, double ratio, Rng& rng);

// Sum over channels of |z|^2 on bins strictly beyond the cutoff.
template <typename T>
double high_band_energy(const Tensor<T>& image, std::size_t cutoff);

}  // namespace acmf::spectral
