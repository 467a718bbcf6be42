#include "ietlab/distrib.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "ietlab/error.hpp"
#include "ietlab/iet.hpp"

namespace ietlab {

double EmpiricalDistribution::cdf(double x) const noexcept {
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
  return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

EmpiricalDistribution empirical(std::span<const double> samples) {
  if (samples.empty()) throw Error(Errc::EmptySample, "empirical distribution of no samples");
  EmpiricalDistribution p;
  p.samples_.assign(samples.begin(), samples.end());
  std::sort(p.samples_.begin(), p.samples_.end());
  const double n = static_cast<double>(p.samples_.size());
  CompensatedSum sum;
  for (double s : p.samples_) sum.add(s);
  p.mean_ = sum.value() / n;
  CompensatedSum sq;
  for (double s : p.samples_) sq.add((s - p.mean_) * (s - p.mean_));
  p.variance_ = sq.value() / n;
  return p;
}

EmpiricalDistribution standardize(const EmpiricalDistribution& p) {
  if (!(p.variance() > 1e-24))
    throw Error(Errc::DegenerateVariance, "variance " + std::to_string(p.variance()) + " too small to standardize");
  const double sd = std::sqrt(p.variance());
  std::vector<double> z(p.samples().begin(), p.samples().end());
  for (auto& s : z) s = (s - p.mean()) / sd;
  return empirical(z);
}

double d_kr(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  const auto a = p.samples();
  const auto b = q.samples();
  const auto m = static_cast<std::int64_t>(a.size());
  const auto n = static_cast<std::int64_t>(b.size());
  // Between consecutive merged atoms F_P = i/m and F_Q = j/n are constant.
  std::size_t i = 0;
  std::size_t j = 0;
  CompensatedSum acc;
  double x = std::min(a[0], b[0]);
  while (i < a.size() || j < b.size()) {
    const double next = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    const std::int64_t gap = static_cast<std::int64_t>(i) * n - static_cast<std::int64_t>(j) * m;
    if (gap != 0) acc.add(static_cast<double>(gap < 0 ? -gap : gap) * (next - x));
    x = next;
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
  }
  return acc.value() / (static_cast<double>(m) * static_cast<double>(n));
}

namespace {

// Mass (in units of 1/(m n)) left unmatched by the best coupling that only
// pairs atoms at distance <= delta. Each P atom carries n units, each Q atom m.
// Matching every P atom to the leftmost Q atoms still in reach is optimal
// because the reachable windows move monotonically to the right.
std::int64_t unmatched_mass(std::span<const double> a, std::span<const double> b, double delta) {
  const auto m = static_cast<std::int64_t>(a.size());
  const auto n = static_cast<std::int64_t>(b.size());
  std::size_t j = 0;
  std::int64_t cap = m;
  std::int64_t matched = 0;
  for (double x : a) {
    std::int64_t need = n;
    while (j < b.size() && b[j] < x - delta) {
      ++j;
      cap = m;
    }
    while (need > 0 && j < b.size() && b[j] <= x + delta) {
      const std::int64_t take = std::min(need, cap);
      need -= take;
      cap -= take;
      matched += take;
      if (cap == 0) {
        ++j;
        cap = m;
      }
    }
  }
  return m * n - matched;
}

template <class Feasible>
double bisect(Feasible&& feasible, double tol) {
  if (!(tol > 0.0)) throw Error(Errc::InvalidArgument, "tolerance must be positive");
  if (feasible(0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::size_t count_le(std::span<const double> s, double x) {
  return static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin());
}

// sup_x F_A(x) - F_B(x + shift), evaluated at the jumps of both step functions.
double max_excess(std::span<const double> a, std::span<const double> b, double shift) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double best = 0.0;
  for (double x : a) best = std::max(best, count_le(a, x) / na - count_le(b, x + shift) / nb);
  for (double y : b) {
    const double x = y - shift;
    best = std::max(best, count_le(a, x) / na - count_le(b, x + shift) / nb);
  }
  return best;
}

}  // namespace

double d_lp(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double tol) {
  const auto a = p.samples();
  const auto b = q.samples();
  const double total = static_cast<double>(a.size()) * static_cast<double>(b.size());
  return bisect([&](double delta) { return static_cast<double>(unmatched_mass(a, b, delta)) <= delta * total; },
                tol);
}

double d_levy(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double tol) {
  const auto a = p.samples();
  const auto b = q.samples();
  return bisect(
      [&](double delta) {
        // F_Q(x) <= F_P(x + delta) + delta and F_P(x - delta) <= F_Q(x) + delta
        return max_excess(b, a, delta) <= delta && max_excess(a, b, delta) <= delta;
      },
      tol);
}

void write_samples(std::ostream& os, std::span<const double> samples) {
  char buf[32];
  for (double s : samples) {
    const auto res = std::to_chars(buf, buf + sizeof buf, s);
    os.write(buf, res.ptr - buf);
    os.put('\n');
  }
}

std::vector<double> read_samples(std::istream& is) {
  std::vector<double> out;
  std::string token;
  while (is >> token) {
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
      throw Error(Errc::InvalidArgument, "not a number: '" + token + "'");
    out.push_back(v);
  }
  return out;
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(Errc::InvalidArgument, "slope fit needs two or more paired values");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error(Errc::InvalidArgument, "slope fit needs distinct abscissae");
  return sxy / sxx;
}

}  // namespace ietlab
