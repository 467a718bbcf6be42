#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ietlab/iet.hpp"

namespace ietlab {

/// S_n f(x) for many starting points, several observables and a schedule of
/// times n, laid out as values[(point * functions + function) * checkpoints + c].
struct BirkhoffTable {
  std::size_t points = 0;
  std::size_t functions = 0;
  std::size_t checkpoints = 0;
  std::vector<double> values;

  double at(std::size_t point, std::size_t function, std::size_t checkpoint) const {
    return values[(point * functions + function) * checkpoints + checkpoint];
  }
  /// All points' sums for one (function, checkpoint).
  std::vector<double> column(std::size_t function, std::size_t checkpoint) const;
};

/// Batched orbit kernel. All observables are summed along one shared orbit per
/// starting point, with compensated accumulation; `checkpoints` must be
/// non-decreasing. Points are split across `threads` workers; the output does
/// not depend on the worker count.
BirkhoffTable birkhoff_sums(const Iet& t, std::span<const PiecewiseFunction> fs,
                            std::span<const double> xs, std::span<const std::uint64_t> checkpoints,
                            unsigned threads = 1);

/// Up to n log-spaced integers from lo to hi inclusive, strictly increasing;
/// values that coincide after rounding are kept once.
std::vector<std::uint64_t> log_spaced(std::uint64_t lo, std::uint64_t hi, std::size_t n);

}  // namespace ietlab
