#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace adaclust {

/// SplitMix64 finalizer (Steele, Lea & Flood). Also the output function of Rng.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// Child seed for stream `index` under `seed`: mix64(seed ^ mix64(index + gamma)).
/// Every random quantity in the library is addressed as a chain of these
/// splits, so any draw can be regenerated without replaying the ones before it.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index + kGoldenGamma));
}

/// Counter-based SplitMix64 generator: state advances by the golden gamma,
/// output is mix64(state). Rng{0}.next() == 0xe220a8397b1dcdaf.
class Rng {
 public:
  constexpr explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
  }

  /// Standard normal via Box-Muller, consuming exactly two uniforms per call.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr Rng split(std::uint64_t index) const noexcept { return Rng(split_seed(state_, index)); }

 private:
  std::uint64_t state_;
};

}  // namespace adaclust
