#include "ietlab/rauzy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ietlab/distrib.hpp"
#include "ietlab/error.hpp"
#include "ietlab/orbit.hpp"
#include "ietlab/random.hpp"

namespace ietlab {

IntMatrix IntMatrix::identity(std::size_t d) {
  IntMatrix m(d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) = 1;
  return m;
}

bool IntMatrix::try_multiply(const IntMatrix& rhs, IntMatrix& out) const {
  if (rhs.d_ != d_) throw Error(Errc::DimensionMismatch, "matrix sizes differ");
  out = IntMatrix(d_);
  for (std::size_t i = 0; i < d_; ++i)
    for (std::size_t j = 0; j < d_; ++j) {
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < d_; ++k) {
        std::int64_t p;
        if (__builtin_mul_overflow((*this)(i, k), rhs(k, j), &p)) return false;
        if (__builtin_add_overflow(acc, p, &acc)) return false;
      }
      out(i, j) = acc;
    }
  return true;
}

IntMatrix IntMatrix::operator*(const IntMatrix& rhs) const {
  IntMatrix out;
  if (!try_multiply(rhs, out)) throw Error(Errc::BlockOverflow, "integer matrix product overflows int64");
  return out;
}

std::vector<double> IntMatrix::apply(std::span<const double> v) const {
  if (v.size() != d_) throw Error(Errc::DimensionMismatch, "vector size differs from matrix size");
  std::vector<double> out(d_, 0.0);
  for (std::size_t i = 0; i < d_; ++i) {
    CompensatedSum acc;
    for (std::size_t j = 0; j < d_; ++j) acc.add(static_cast<double>((*this)(i, j)) * v[j]);
    out[i] = acc.value();
  }
  return out;
}

std::int64_t IntMatrix::determinant() const {
  // Bareiss: every intermediate is a minor of the input, so exact in 128 bits
  // for the unimodular nonnegative matrices seen here.
  const std::size_t n = d_;
  if (n == 0) return 1;
  std::vector<__int128> m(v_.begin(), v_.end());
  auto at = [&](std::size_t i, std::size_t j) -> __int128& { return m[i * n + j]; };
  __int128 prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (at(k, k) == 0) {
      std::size_t r = k + 1;
      while (r < n && at(r, k) == 0) ++r;
      if (r == n) return 0;
      for (std::size_t j = 0; j < n; ++j) std::swap(at(k, j), at(r, j));
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j)
        at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
    prev = at(k, k);
  }
  return static_cast<std::int64_t>(sign * at(n - 1, n - 1));
}

namespace {

constexpr double kKeaneTolerance = 1e-13;
constexpr std::uint64_t kMaxBlockSteps = 1'000'000;

struct InductionState {
  std::vector<double> lengths;
  std::vector<int> perm;
  IntMatrix matrix;
};

// Right-multiplies the accumulated matrix by the elementary matrix of one step
// and updates lengths and permutation. Returns false, leaving the state
// untouched, if the matrix would overflow.
bool apply_step(InductionState& s, Move move, std::size_t b) {
  const std::size_t d = s.lengths.size();
  const std::size_t t = d - 1;
  IntMatrix& a = s.matrix;
  if (move == Move::Top) {
    // column b += column t
    std::vector<std::int64_t> col(d);
    for (std::size_t i = 0; i < d; ++i)
      if (__builtin_add_overflow(a(i, b), a(i, t), &col[i])) return false;
    for (std::size_t i = 0; i < d; ++i) a(i, b) = col[i];
    s.lengths[t] -= s.lengths[b];
    const int p = s.perm[t];
    for (std::size_t j = 0; j < d; ++j)
      if (j != b && s.perm[j] > p) ++s.perm[j];
    s.perm[b] = p + 1;
    return true;
  }
  // Interval t moves to slot b+1 of the top row; the others after b shift right.
  std::vector<std::int64_t> merged(d);
  for (std::size_t i = 0; i < d; ++i)
    if (__builtin_add_overflow(a(i, t), a(i, b), &merged[i])) return false;
  const double lt = s.lengths[t];
  const int pt = s.perm[t];
  for (std::size_t j = t; j > b + 1; --j) {
    for (std::size_t i = 0; i < d; ++i) a(i, j) = a(i, j - 1);
    s.lengths[j] = s.lengths[j - 1];
    s.perm[j] = s.perm[j - 1];
  }
  for (std::size_t i = 0; i < d; ++i) a(i, b + 1) = merged[i];
  s.lengths[b + 1] = lt;
  s.perm[b + 1] = pt;
  s.lengths[b] -= lt;
  return true;
}

// Move type of the next step, or throws on a tie.
Move next_move(const InductionState& s, std::size_t& b) {
  const std::size_t d = s.lengths.size();
  b = 0;
  while (s.perm[b] != static_cast<int>(d) - 1) ++b;
  const double total = std::accumulate(s.lengths.begin(), s.lengths.end(), 0.0);
  const double diff = s.lengths[d - 1] - s.lengths[b];
  if (std::fabs(diff) < kKeaneTolerance * total)
    throw Error(Errc::KeaneDegenerate, "last top and last bottom intervals have equal length");
  return diff > 0.0 ? Move::Top : Move::Bottom;
}

RauzyStep finish(InductionState&& s, Move move, std::uint64_t steps) {
  const double total = std::accumulate(s.lengths.begin(), s.lengths.end(), 0.0);
  RauzyStep out{move, std::move(s.matrix), Iet::from_zero_based(s.lengths, s.perm), s.lengths,
                -std::log(total), steps};
  return out;
}

InductionState start(const Iet& t) {
  return {std::vector<double>(t.lengths().begin(), t.lengths().end()),
          std::vector<int>(t.perm().begin(), t.perm().end()), IntMatrix::identity(t.size())};
}

Eigen::MatrixXd to_eigen(const IntMatrix& m) {
  const std::size_t d = m.size();
  Eigen::MatrixXd out(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = static_cast<double>(m(i, j));
  return out;
}

Eigen::MatrixXd random_orthonormal(std::size_t d, std::uint64_t seed) {
  if (seed == 0) return Eigen::MatrixXd::Identity(d, d);
  Substream rng(seed, stream::kFrame, 0);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(d, d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < d; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ();
}

// Q R = m; returns Q with R's diagonal made positive, adds log|R_ii| to logs.
Eigen::MatrixXd reorthonormalize(const Eigen::MatrixXd& m, std::vector<double>* logs) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  const auto& r = qr.matrixQR();
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const double rii = r(i, i);
    if (logs) (*logs)[static_cast<std::size_t>(i)] += std::log(std::fabs(rii));
    if (rii < 0.0) q.col(i) *= -1.0;
  }
  return q;
}

std::vector<double> sorted_theta(const std::vector<double>& logs, double total) {
  std::vector<double> theta(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) theta[i] = logs[i] / total;
  std::sort(theta.begin(), theta.end(), std::greater<>());
  return theta;
}

}  // namespace

RauzyStep rauzy_step(const Iet& t) {
  InductionState s = start(t);
  std::size_t b;
  const Move move = next_move(s, b);
  apply_step(s, move, b);
  return finish(std::move(s), move, 1);
}

RauzyStep zorich_block(const Iet& t) {
  InductionState s = start(t);
  std::size_t b;
  const Move move = next_move(s, b);
  apply_step(s, move, b);
  std::uint64_t steps = 1;
  for (;;) {
    std::size_t nb;
    if (next_move(s, nb) != move) break;
    if (steps == kMaxBlockSteps)
      throw Error(Errc::BlockOverflow, "Zorich block longer than 10^6 steps");
    // An overflowing block is cut short; the next block continues the run.
    if (!apply_step(s, move, nb)) break;
    ++steps;
  }
  return finish(std::move(s), move, steps);
}

std::vector<double> OseledetsFrame::column(std::size_t j) const {
  return {frame.begin() + static_cast<std::ptrdiff_t>(j * dim),
          frame.begin() + static_cast<std::ptrdiff_t>((j + 1) * dim)};
}

OseledetsFrame cocycle_orbit(const Iet& t, std::uint64_t k, std::uint64_t frame_seed) {
  if (k == 0) throw Error(Errc::InvalidArgument, "block count must be positive");
  const std::size_t d = t.size();
  OseledetsFrame out;
  out.dim = d;
  out.log_diagonal.assign(d, 0.0);
  Eigen::MatrixXd q = random_orthonormal(d, frame_seed);
  Iet cur = t;
  for (std::uint64_t i = 0; i < k; ++i) {
    RauzyStep block = zorich_block(cur);
    q = reorthonormalize(to_eigen(block.matrix).transpose() * q, &out.log_diagonal);
    out.total_log_scale += block.log_scale;
    out.elementary_steps += block.steps;
    cur = std::move(block.successor);
  }
  out.blocks = k;
  out.frame.assign(q.data(), q.data() + d * d);
  out.theta_hat = sorted_theta(out.log_diagonal, out.total_log_scale);
  out.final_lengths.assign(cur.lengths().begin(), cur.lengths().end());
  out.final_perm.assign(cur.perm().begin(), cur.perm().end());
  return out;
}

SecondDirection second_direction_details(const Iet& t, std::uint64_t k, double min_log_scale,
                                         std::uint64_t frame_seed) {
  const std::size_t d = t.size();
  std::vector<IntMatrix> matrices;
  std::vector<double> logs(d, 0.0);
  Eigen::MatrixXd q = random_orthonormal(d, frame_seed);
  double log_scale = 0.0;
  Iet cur = t;
  while (matrices.size() < k || log_scale < min_log_scale) {
    RauzyStep block = zorich_block(cur);
    q = reorthonormalize(to_eigen(block.matrix).transpose() * q, &logs);
    log_scale += block.log_scale;
    matrices.push_back(std::move(block.matrix));
    cur = std::move(block.successor);
  }

  SecondDirection out;
  out.theta_hat = sorted_theta(logs, log_scale);
  out.blocks = matrices.size();
  out.log_scale = log_scale;
  if (d < 2 || out.theta_hat[1] < 0.05)
    throw Error(Errc::NoSecondExponent,
                "estimated second exponent " + std::to_string(d >= 2 ? out.theta_hat[1] : 0.0) +
                    " is below 0.05");
  out.gap = d >= 3 ? out.theta_hat[1] - out.theta_hat[2] : out.theta_hat[1];
  out.gap_warning = out.gap < 0.05;

  // Leading left singular subspace of A_1 ... A_k, applying the factors last first.
  Eigen::MatrixXd x = random_orthonormal(d, frame_seed == 0 ? 1 : frame_seed + 1);
  for (auto it = matrices.rbegin(); it != matrices.rend(); ++it) x = reorthonormalize(to_eigen(*it) * x, nullptr);

  Eigen::VectorXd lam(d);
  for (std::size_t i = 0; i < d; ++i) lam(i) = t.lengths()[i];
  lam.normalize();
  Eigen::VectorXd perron = x.col(0);
  if (perron.sum() < 0.0) perron = -perron;
  Eigen::VectorXd v = x.col(1);
  v -= v.dot(lam) * lam;
  v.normalize();
  v -= v.dot(lam) * lam;
  v.normalize();
  for (std::size_t i = 0; i < d; ++i) {
    if (std::fabs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      break;
    }
  }
  out.direction.assign(v.data(), v.data() + d);
  out.perron.assign(perron.data(), perron.data() + d);
  return out;
}

std::vector<double> second_direction(const Iet& t, std::uint64_t k) {
  return second_direction_details(t, k).direction;
}

PiecewiseFunction cocycle_function(std::span<const double> v, const Iet& t) {
  if (v.size() != t.size())
    throw Error(Errc::DimensionMismatch, "vector has " + std::to_string(v.size()) + " entries, IET has " +
                                             std::to_string(t.size()) + " intervals");
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (std::fabs(norm - 1.0) > 1e-9) throw Error(Errc::InvalidArgument, "cocycle vector must have unit norm");
  return PiecewiseFunction::piecewise_constant(v);
}

DegeneracyResult degeneracy_index(const Iet& t, const PiecewiseFunction& f, std::uint64_t nmax,
                                  std::span<const double> theta_hat, unsigned threads, std::uint64_t seed) {
  f.check_compatible(t);
  if (nmax < 10'000) throw Error(Errc::InvalidArgument, "degeneracy classification needs nmax >= 10^4");
  const double mean = mean_value(f, t);
  if (std::fabs(mean) > 1e-9 * std::max(1.0, f.sup_abs(t)))
    throw Error(Errc::NonZeroMean, "observable mean " + std::to_string(mean) + " is not zero");

  DegeneracyResult out;
  if (theta_hat.empty())
    out.theta_hat = cocycle_orbit(t, 2000).theta_hat;
  else
    out.theta_hat.assign(theta_hat.begin(), theta_hat.end());

  const auto xs = sample_points(t, 256, seed);
  const auto ns = log_spaced(100, nmax, 12);
  const PiecewiseFunction fs[] = {f};
  const BirkhoffTable table = birkhoff_sums(t, fs, xs, ns, threads);

  std::vector<double> log_n;
  std::vector<double> log_max;
  for (std::size_t c = 0; c < ns.size(); ++c) {
    double m = 0.0;
    for (std::size_t p = 0; p < xs.size(); ++p) m = std::max(m, std::fabs(table.at(p, 0, c)));
    if (m > 0.0) {
      log_n.push_back(std::log(static_cast<double>(ns[c])));
      log_max.push_back(std::log(m));
    }
  }
  out.beta = log_n.size() >= 2 ? least_squares_slope(log_n, log_max) : 0.0;
  if (out.beta <= 0.05) {
    out.degenerate = true;
    return out;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.theta_hat.size(); ++i)
    if (std::fabs(out.beta - out.theta_hat[i]) < std::fabs(out.beta - out.theta_hat[best])) best = i;
  out.i_hat = static_cast<int>(best) + 1;
  return out;
}

}  // namespace ietlab
