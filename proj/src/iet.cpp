#include "ietlab/iet.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "ietlab/error.hpp"
#include "ietlab/random.hpp"

namespace ietlab {

namespace {

constexpr double kBelowOne = 0x1.fffffffffffffp-1;  // largest double < 1

inline double clamp_unit(double x) noexcept {
  return x < 0.0 ? 0.0 : (x >= 1.0 ? kBelowOne : x);
}

}  // namespace

bool is_irreducible(std::span<const int> perm) noexcept {
  // perm maps {0..k-1} onto itself iff the max over the prefix equals k-1.
  int running_max = -1;
  for (std::size_t k = 0; k + 1 < perm.size(); ++k) {
    running_max = std::max(running_max, perm[k]);
    if (running_max == static_cast<int>(k)) return false;
  }
  return true;
}

Iet Iet::make(std::span<const double> lengths, std::span<const int> perm_one_based) {
  std::vector<int> zero(perm_one_based.begin(), perm_one_based.end());
  for (auto& p : zero) --p;
  return from_zero_based(lengths, zero);
}

Iet Iet::from_zero_based(std::span<const double> lengths, std::span<const int> perm) {
  const std::size_t d = lengths.size();
  if (d < 2) throw Error(Errc::InvalidArgument, "an IET needs at least two intervals");
  if (perm.size() != d)
    throw Error(Errc::InvalidPermutation, "permutation size " + std::to_string(perm.size()) +
                                              " does not match " + std::to_string(d) + " lengths");
  for (double l : lengths)
    if (!(l > 0.0) || !std::isfinite(l))
      throw Error(Errc::NonPositiveLength, "interval length " + std::to_string(l));

  std::vector<int> inverse(d, -1);
  for (std::size_t i = 0; i < d; ++i) {
    const int p = perm[i];
    if (p < 0 || p >= static_cast<int>(d) || inverse[p] != -1)
      throw Error(Errc::InvalidPermutation, "not a bijection of {1..d}");
    inverse[p] = static_cast<int>(i);
  }
  if (!is_irreducible(perm))
    throw Error(Errc::ReduciblePermutation, "permutation fixes a proper prefix");

  Iet t;
  const double sum = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  t.lengths_.resize(d);
  for (std::size_t i = 0; i < d; ++i) t.lengths_[i] = lengths[i] / sum;
  t.perm_.assign(perm.begin(), perm.end());
  t.inverse_ = std::move(inverse);

  t.lefts_.resize(d);
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    t.lefts_[i] = acc;
    acc += t.lengths_[i];
  }
  t.image_lefts_.resize(d);
  acc = 0.0;
  for (std::size_t p = 0; p < d; ++p) {
    t.image_lefts_[p] = acc;
    acc += t.lengths_[t.inverse_[p]];
  }
  t.offsets_.resize(d);
  for (std::size_t i = 0; i < d; ++i) t.offsets_[i] = t.image_lefts_[t.perm_[i]] - t.lefts_[i];
  t.total_ = 1.0;
  return t;
}

Iet Iet::rotation(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidArgument, "rotation angle must lie in (0,1)");
  const double lengths[] = {1.0 - alpha, alpha};
  const int perm[] = {1, 0};
  return from_zero_based(lengths, perm);
}

std::vector<int> Iet::perm_one_based() const {
  std::vector<int> out(perm_.begin(), perm_.end());
  for (auto& p : out) ++p;
  return out;
}

std::size_t Iet::index_unchecked(double x) const noexcept {
  const std::size_t d = lefts_.size();
  if (d <= 16) {
    std::size_t idx = 0;
    for (std::size_t j = 1; j < d; ++j) idx += (x >= lefts_[j]);
    return idx;
  }
  return static_cast<std::size_t>(std::upper_bound(lefts_.begin() + 1, lefts_.end(), x) -
                                  lefts_.begin()) - 1;
}

std::size_t Iet::interval_index(double x) const {
  if (!(x >= 0.0 && x < total_))
    throw Error(Errc::OutOfDomain, "point " + std::to_string(x) + " outside [0, |I|)");
  return index_unchecked(x);
}

double Iet::apply_unchecked(double x) const noexcept {
  return clamp_unit(x + offsets_[index_unchecked(x)]);
}

double Iet::apply(double x) const {
  return clamp_unit(x + offsets_[interval_index(x)]);
}

double Iet::apply_inverse_unchecked(double x) const noexcept {
  const auto pos = static_cast<std::size_t>(
      std::upper_bound(image_lefts_.begin() + 1, image_lefts_.end(), x) - image_lefts_.begin() - 1);
  return clamp_unit(x - offsets_[inverse_[pos]]);
}

double Iet::apply_inverse(double x) const {
  if (!(x >= 0.0 && x < total_))
    throw Error(Errc::OutOfDomain, "point " + std::to_string(x) + " outside [0, |I|)");
  return apply_inverse_unchecked(x);
}

double Iet::distance_to_breakpoint(double x) const noexcept {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < lefts_.size(); ++j) best = std::min(best, std::fabs(x - lefts_[j]));
  return best;
}

// ---------------------------------------------------------------------------

PiecewiseFunction::PiecewiseFunction(std::vector<double> a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != b_.size())
    throw Error(Errc::DimensionMismatch, "slope and intercept vectors differ in length");
  if (a_.empty()) throw Error(Errc::DimensionMismatch, "observable with no pieces");
}

PiecewiseFunction PiecewiseFunction::constant(std::size_t d, double c) {
  return PiecewiseFunction(std::vector<double>(d, 0.0), std::vector<double>(d, c));
}

PiecewiseFunction PiecewiseFunction::piecewise_constant(std::span<const double> values) {
  return PiecewiseFunction(std::vector<double>(values.size(), 0.0),
                           std::vector<double>(values.begin(), values.end()));
}

double PiecewiseFunction::lipschitz() const noexcept {
  double l = 0.0;
  for (double s : a_) l = std::max(l, std::fabs(s));
  return l;
}

bool PiecewiseFunction::is_piecewise_constant() const noexcept {
  return std::all_of(a_.begin(), a_.end(), [](double s) { return s == 0.0; });
}

void PiecewiseFunction::check_compatible(const Iet& t) const {
  if (size() != t.size())
    throw Error(Errc::IncompatiblePartition, "observable has " + std::to_string(size()) +
                                                 " pieces, IET has " + std::to_string(t.size()));
}

double PiecewiseFunction::sup_abs(const Iet& t) const {
  check_compatible(t);
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double lo = t.lefts()[i];
    const double hi = lo + t.lengths()[i];
    s = std::max({s, std::fabs(value(i, lo)), std::fabs(value(i, hi))});
  }
  return s;
}

PiecewiseFunction PiecewiseFunction::scaled(double s) const {
  auto a = a_;
  auto b = b_;
  for (auto& v : a) v *= s;
  for (auto& v : b) v *= s;
  return PiecewiseFunction(std::move(a), std::move(b));
}

PiecewiseFunction PiecewiseFunction::shifted(double c) const {
  auto b = b_;
  for (auto& v : b) v += c;
  return PiecewiseFunction(a_, std::move(b));
}

PiecewiseFunction PiecewiseFunction::centered(const Iet& t) const {
  return shifted(-mean_value(*this, t));
}

double mean_value(const PiecewiseFunction& f, const Iet& t) {
  f.check_compatible(t);
  CompensatedSum acc;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double len = t.lengths()[i];
    acc.add((f.a()[i] * (t.lefts()[i] + 0.5 * len) + f.b()[i]) * len);
  }
  return acc.value() / t.total_length();
}

double birkhoff_sum(const Iet& t, const PiecewiseFunction& f, double x, std::uint64_t n,
                    std::vector<std::size_t>* trace) {
  f.check_compatible(t);
  t.interval_index(x);  // domain check
  if (trace) {
    trace->clear();
    trace->reserve(n);
  }
  CompensatedSum acc;
  const auto offsets = t.offsets();
  for (std::uint64_t k = 0; k < n; ++k) {
    const std::size_t i = t.index_unchecked(x);
    if (trace) trace->push_back(i);
    acc.add(f.value(i, x));
    x = clamp_unit(x + offsets[i]);
  }
  return acc.value();
}

double iterate(const Iet& t, double x, std::uint64_t n) {
  t.interval_index(x);
  for (std::uint64_t k = 0; k < n; ++k) x = t.apply_unchecked(x);
  return x;
}

std::vector<double> sample_points(const Iet& t, std::size_t count, std::uint64_t seed,
                                  SampleStrategy strategy) {
  std::vector<double> xs(count);
  const double len = t.total_length();
  const double n = static_cast<double>(count);
  for (std::size_t j = 0; j < count; ++j) {
    Substream rng(seed, stream::kSamplePoints, j);
    const double u = rng.uniform();
    const double x = strategy == SampleStrategy::GridJitter ? (static_cast<double>(j) + u) / n * len
                                                            : u * len;
    xs[j] = std::min(x, std::nextafter(len, 0.0));
  }
  return xs;
}

}  // namespace ietlab
