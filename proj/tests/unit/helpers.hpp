#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <doctest.h>

#include "ietlab/error.hpp"
#include "ietlab/iet.hpp"
#include "ietlab/random.hpp"

namespace testing {

inline constexpr std::uint64_t kTestStream = 0x7e57;

inline double golden() { return (std::sqrt(5.0) - 1.0) / 2.0; }

/// Random irreducible permutation (zero-based) and exponential lengths.
inline ietlab::Iet random_test_iet(std::size_t d, std::uint64_t seed) {
  ietlab::Substream rng(seed, kTestStream, d);
  std::vector<int> perm(d);
  do {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
  } while (!ietlab::is_irreducible(perm));
  std::vector<double> lengths(d);
  for (auto& l : lengths) l = -std::log1p(-rng.uniform());
  return ietlab::Iet::from_zero_based(lengths, perm);
}

inline ietlab::PiecewiseFunction random_test_function(std::size_t d, std::uint64_t seed) {
  ietlab::Substream rng(seed, kTestStream + 1, d);
  std::vector<double> a(d), b(d);
  for (std::size_t i = 0; i < d; ++i) {
    a[i] = 2.0 * rng.uniform() - 1.0;
    b[i] = 2.0 * rng.uniform() - 1.0;
  }
  return ietlab::PiecewiseFunction(a, b);
}

inline double uniform(std::uint64_t seed, std::uint64_t i) { return ietlab::Substream(seed, kTestStream + 2, i).uniform(); }

/// The error code raised by fn, or nullopt when it returns normally.
template <class Fn>
std::optional<ietlab::Errc> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const ietlab::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing
