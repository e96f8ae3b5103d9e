#include "acmf/rng.hpp"

#include <cmath>
#include <numbers>

namespace acmf {

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() noexcept {
  state_ += 0x9E3779B97F4A7C15ULL;
  return splitmix64_mix(state_);
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  // Rejection on the largest multiple of bound keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x <= limit) return x % bound;
  }
}

double Rng::normal() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Rng Rng::derive(std::uint64_t seed, std::string_view label) noexcept {
  return Rng(splitmix64_mix(seed ^ fnv1a(label)));
}

Rng Rng::derive(std::uint64_t seed, std::string_view label, std::uint64_t index) noexcept {
  return Rng(splitmix64_mix(splitmix64_mix(seed ^ fnv1a(label)) + index * 0x9E3779B97F4A7C15ULL));
}

Rng Rng::derive(std::uint64_t seed, std::string_view label, std::uint64_t a, std::uint64_t b) noexcept {
  const std::uint64_t inner = splitmix64_mix(splitmix64_mix(seed ^ fnv1a(label)) + a * 0x9E3779B97F4A7C15ULL);
  return Rng(splitmix64_mix(inner + b * 0xD1B54A32D192ED03ULL));
}

}  // namespace acmf
