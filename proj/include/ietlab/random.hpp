#pragma once

#include <cstdint>
#include <limits>

namespace ietlab {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream keyed by (seed, stream, index).
///
/// Sample j of any Monte Carlo loop draws from Substream(seed, tag, j), so the
/// values it sees never depend on how the loop is split between workers.
/// Satisfies UniformRandomBitGenerator.
class Substream {
 public:
  using result_type = std::uint64_t;

  constexpr Substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
      : state_(splitmix64(splitmix64(splitmix64(seed) ^ stream) + index)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Stream tags used across the library; distinct tags keep substreams independent.
namespace stream {
inline constexpr std::uint64_t kSamplePoints = 0x5a11;
inline constexpr std::uint64_t kGamma = 0x6a33;
inline constexpr std::uint64_t kFrame = 0xf4a3;
inline constexpr std::uint64_t kRandomIet = 0x1e7;
inline constexpr std::uint64_t kRandomObservable = 0x0b5;
inline constexpr std::uint64_t kJitter = 0x717;
inline constexpr std::uint64_t kVerify = 0x7e1;
}  // namespace stream

}  // namespace ietlab
