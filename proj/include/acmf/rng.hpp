#pragma once

#include <cstdint>
#include <string_view>

namespace acmf {

// splitmix64 generator. The algorithm is fixed so that masks and datasets
// reproduce bit-exactly on every platform and in other implementations.
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  // Uniform in [0, 1) with 53 random bits: (next_u64() >> 11) * 2^-53.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound) by rejection sampling on the top bits; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Standard normal via Box-Muller (one draw per call, two uniforms consumed).
  double normal() noexcept;

  std::uint64_t state() const noexcept { return state_; }

  // Child stream: the label is folded into the seed with FNV-1a and then
  // mixed once through splitmix64, so streams do not depend on draw order
  // elsewhere.
  static Rng derive(std::uint64_t seed, std::string_view label) noexcept;
  static Rng derive(std::uint64_t seed, std::string_view label, std::uint64_t index) noexcept;
  static Rng derive(std::uint64_t seed, std::string_view label, std::uint64_t a, std::uint64_t b) noexcept;

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

}  // namespace acmf
