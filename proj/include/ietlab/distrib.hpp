#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace ietlab {

/// Sorted sample multiset with cached mean and population variance.
class EmpiricalDistribution {
 public:
  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }

  /// Fraction of samples <= x.
  double cdf(double x) const noexcept;

  friend EmpiricalDistribution empirical(std::span<const double> samples);

 private:
  std::vector<double> samples_;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

/// Throws EmptySample.
EmpiricalDistribution empirical(std::span<const double> samples);

/// (s - mean) / sqrt(variance). Throws DegenerateVariance when variance <= 1e-24.
EmpiricalDistribution standardize(const EmpiricalDistribution& p);

/// Wasserstein-1 distance: the exact integral of |F_P - F_Q|.
double d_kr(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

/// Levy-Prokhorov distance: the smallest delta admitting a coupling with
/// P(|X - Y| > delta) <= delta, found by bisection on [0, 1]. Feasibility of
/// a delta is decided exactly by a greedy matching of sorted atoms.
double d_lp(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double tol = 1e-9);

/// Levy distance: the smallest delta with
/// F_P(x - delta) - delta <= F_Q(x) <= F_P(x + delta) + delta for all x.
/// Never exceeds d_lp.
double d_levy(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double tol = 1e-9);

/// One value per line, round-trip precision.
void write_samples(std::ostream& os, std::span<const double> samples);
/// Reads whitespace-separated numbers until end of stream. Throws InvalidArgument on junk.
std::vector<double> read_samples(std::istream& is);

/// Ordinary least squares slope of y against x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace ietlab
