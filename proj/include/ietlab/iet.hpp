#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ietlab {

/// Interval exchange transformation on the unit interval I = [0, 1).
///
/// Interval i (zero-based, in the top order) is I_i = [left_i, left_i + lambda_i)
/// and is translated to the slot perm[i] of the bottom order. Breakpoints
/// belong to the piece on their right, so apply() is total on [0, 1).
/// Values are immutable after construction and safe to share between threads.
class Iet {
 public:
  /// `lengths` may have any positive scale; they are rescaled to sum to one.
  /// `perm_one_based[i]` is the bottom position (1..d) of interval i.
  /// Throws NonPositiveLength, InvalidPermutation or ReduciblePermutation.
  static Iet make(std::span<const double> lengths, std::span<const int> perm_one_based);

  /// Same as make() with a zero-based permutation.
  static Iet from_zero_based(std::span<const double> lengths, std::span<const int> perm);

  /// Rotation x -> x + alpha mod 1 as the two-interval exchange (1-alpha, alpha), perm (2,1).
  static Iet rotation(double alpha);

  std::size_t size() const noexcept { return lengths_.size(); }
  /// |I|; always 1 after normalization.
  double total_length() const noexcept { return total_; }

  std::span<const double> lengths() const noexcept { return lengths_; }
  std::span<const double> lefts() const noexcept { return lefts_; }
  std::span<const double> offsets() const noexcept { return offsets_; }
  /// Zero-based bottom position of each interval.
  std::span<const int> perm() const noexcept { return perm_; }
  /// Interval occupying each bottom position.
  std::span<const int> inverse_perm() const noexcept { return inverse_; }
  std::vector<int> perm_one_based() const;

  /// Left endpoint of T(I_i).
  double image_left(std::size_t i) const noexcept { return lefts_[i] + offsets_[i]; }

  /// Zero-based index i with x in I_i. Throws OutOfDomain.
  std::size_t interval_index(double x) const;
  double apply(double x) const;
  double apply_inverse(double x) const;

  /// Unchecked variants for hot loops; x must lie in [0, 1).
  std::size_t index_unchecked(double x) const noexcept;
  double apply_unchecked(double x) const noexcept;
  double apply_inverse_unchecked(double x) const noexcept;

  /// Distance from x to the nearest interior breakpoint of T.
  double distance_to_breakpoint(double x) const noexcept;

  friend bool operator==(const Iet&, const Iet&) = default;

 private:
  Iet() = default;
  std::vector<double> lengths_;
  std::vector<int> perm_;
  std::vector<int> inverse_;
  std::vector<double> lefts_;
  std::vector<double> image_lefts_;  // by bottom position
  std::vector<double> offsets_;
  double total_ = 1.0;
};

/// Irreducible: no k < d with perm({0..k-1}) = {0..k-1}.
bool is_irreducible(std::span<const int> perm_zero_based) noexcept;

inline Iet make_iet(std::span<const double> lengths, std::span<const int> perm_one_based) {
  return Iet::make(lengths, perm_one_based);
}

/// Observable f(x) = a_i * x + b_i on the continuity interval I_i of a companion Iet.
class PiecewiseFunction {
 public:
  PiecewiseFunction(std::vector<double> a, std::vector<double> b);

  static PiecewiseFunction constant(std::size_t d, double c);
  static PiecewiseFunction piecewise_constant(std::span<const double> values);

  std::size_t size() const noexcept { return a_.size(); }
  std::span<const double> a() const noexcept { return a_; }
  std::span<const double> b() const noexcept { return b_; }

  /// L_f = max |a_i|.
  double lipschitz() const noexcept;
  bool is_piecewise_constant() const noexcept;

  double value(std::size_t i, double x) const noexcept { return a_[i] * x + b_[i]; }
  double operator()(const Iet& t, double x) const { return value(t.interval_index(x), x); }

  /// sup over I of |f|, from the closures of the pieces.
  double sup_abs(const Iet& t) const;

  /// Throws IncompatiblePartition when the piece count differs from t.size().
  void check_compatible(const Iet& t) const;

  PiecewiseFunction scaled(double s) const;
  PiecewiseFunction shifted(double c) const;
  /// f - mean_value(f).
  PiecewiseFunction centered(const Iet& t) const;

  friend bool operator==(const PiecewiseFunction&, const PiecewiseFunction&) = default;

 private:
  std::vector<double> a_;
  std::vector<double> b_;
};

/// (1/|I|) * integral of f over I, in closed form.
double mean_value(const PiecewiseFunction& f, const Iet& t);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double s = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - s) + v;
    else
      comp_ += (v - s) + sum_;
    sum_ = s;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// S_n f(x) = sum_{k<n} f(T^k x). When `trace` is given it receives the
/// visited interval indices i(T^k x), k < n.
double birkhoff_sum(const Iet& t, const PiecewiseFunction& f, double x, std::uint64_t n,
                    std::vector<std::size_t>* trace = nullptr);

/// T^n x.
double iterate(const Iet& t, double x, std::uint64_t n);

enum class SampleStrategy { GridJitter, Iid };

/// N points of [0, |I|). Point j depends only on (seed, j): uniform in
/// [j/N, (j+1)/N) for GridJitter, uniform on I for Iid.
std::vector<double> sample_points(const Iet& t, std::size_t count, std::uint64_t seed,
                                  SampleStrategy strategy = SampleStrategy::GridJitter);

}  // namespace ietlab
