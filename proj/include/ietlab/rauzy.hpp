#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ietlab/iet.hpp"

namespace ietlab {

/// Square matrix of 64-bit integers with overflow-checked products.
class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(std::size_t d) : d_(d), v_(d * d, 0) {}
  static IntMatrix identity(std::size_t d);

  std::size_t size() const noexcept { return d_; }
  std::int64_t& operator()(std::size_t i, std::size_t j) noexcept { return v_[i * d_ + j]; }
  std::int64_t operator()(std::size_t i, std::size_t j) const noexcept { return v_[i * d_ + j]; }

  /// this * rhs; returns false (leaving `out` unspecified) on int64 overflow.
  bool try_multiply(const IntMatrix& rhs, IntMatrix& out) const;
  /// this * rhs; throws BlockOverflow on overflow.
  IntMatrix operator*(const IntMatrix& rhs) const;
  /// A * v in double precision.
  std::vector<double> apply(std::span<const double> v) const;
  /// Exact determinant (fraction-free elimination).
  std::int64_t determinant() const;

  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;

 private:
  std::size_t d_ = 0;
  std::vector<std::int64_t> v_;  // row major
};

enum class Move { Top, Bottom };

/// One Rauzy-Veech step, or a Zorich block of same-type steps.
struct RauzyStep {
  Move move = Move::Top;
  /// lengths_before = matrix * unnormalized_lengths.
  IntMatrix matrix;
  /// Induced IET rescaled to unit length.
  Iet successor;
  /// Lengths of the induced IET before rescaling, in the successor's labelling.
  std::vector<double> unnormalized_lengths;
  /// -log of the induced interval's length; positive.
  double log_scale = 0.0;
  std::uint64_t steps = 1;
};

/// Elementary step: the longer of the last top and last bottom interval loses
/// the shorter one. Throws KeaneDegenerate on a tie within 1e-13.
RauzyStep rauzy_step(const Iet& t);

/// Maximal run of same-type steps, renormalized once. Throws KeaneDegenerate,
/// or BlockOverflow past 10^6 steps.
RauzyStep zorich_block(const Iet& t);

/// Forward cocycle of block matrices acting on heights (transposes), kept
/// orthonormal by QR. Exponents are measured per unit of accumulated log scale,
/// which makes the top one equal 1.
struct OseledetsFrame {
  std::size_t dim = 0;
  std::vector<double> frame;  // column major dim x dim
  std::vector<double> log_diagonal;
  std::uint64_t blocks = 0;
  std::uint64_t elementary_steps = 0;
  double total_log_scale = 0.0;
  /// log_diagonal / total_log_scale, sorted non-increasing.
  std::vector<double> theta_hat;
  /// IET reached after the last block.
  std::vector<double> final_lengths;
  std::vector<int> final_perm;

  /// Column j of the frame.
  std::vector<double> column(std::size_t j) const;
};

/// Runs k Zorich blocks. With frame_seed = 0 the frame starts at the identity,
/// otherwise at a random orthonormal frame drawn from that seed.
OseledetsFrame cocycle_orbit(const Iet& t, std::uint64_t k, std::uint64_t frame_seed = 0);

struct SecondDirection {
  /// Unit vector orthogonal to the length vector, first nonzero coordinate > 0.
  std::vector<double> direction;
  /// Leading direction of the same product (close to the normalized lengths).
  std::vector<double> perron;
  std::vector<double> theta_hat;
  /// theta_2 - theta_3 (or theta_2 when d = 2).
  double gap = 0.0;
  /// Set when the gap is below 0.05, i.e. the second exponent may not be simple.
  bool gap_warning = false;
  std::uint64_t blocks = 0;
  double log_scale = 0.0;
};

/// Second singular direction of the block product A_1 ... A_k, the direction
/// whose Birkhoff cocycle grows like n^theta_2. Runs at least k blocks and
/// continues until the accumulated log scale reaches min_log_scale.
/// Throws NoSecondExponent when theta_2 < 0.05.
SecondDirection second_direction_details(const Iet& t, std::uint64_t k, double min_log_scale = 30.0,
                                         std::uint64_t frame_seed = 0);
std::vector<double> second_direction(const Iet& t, std::uint64_t k);

/// f_v = v_i on I_i. Throws DimensionMismatch, or InvalidArgument when |v| != 1.
PiecewiseFunction cocycle_function(std::span<const double> v, const Iet& t);

struct DegeneracyResult {
  bool degenerate = false;
  /// One-based index of the exponent closest to the growth rate; 0 when degenerate.
  int i_hat = 0;
  /// Fitted exponent of max_x |S_n f(x)| against n.
  double beta = 0.0;
  std::vector<double> theta_hat;
};

/// Classifies a zero-mean f by the growth of its Birkhoff sums up to nmax.
/// Uses theta_hat when given, otherwise estimates it from 2000 blocks.
/// Throws NonZeroMean, or InvalidArgument when nmax < 10^4.
DegeneracyResult degeneracy_index(const Iet& t, const PiecewiseFunction& f, std::uint64_t nmax,
                                  std::span<const double> theta_hat = {}, unsigned threads = 1,
                                  std::uint64_t seed = 0);

}  // namespace ietlab
