#include "ietlab/suspension.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "ietlab/error.hpp"
#include "ietlab/parallel.hpp"
#include "ietlab/random.hpp"

namespace ietlab {

namespace {

constexpr double kKeaneTolerance = 1e-13;
constexpr double kBelowOne = 0x1.fffffffffffffp-1;

inline double clamp_unit(double x) noexcept { return x < 0.0 ? 0.0 : (x >= 1.0 ? kBelowOne : x); }

double distance_to_image_breakpoint(const Iet& t, double x) {
  double best = std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < t.size(); ++p) {
    acc += t.lengths()[t.inverse_perm()[p]];
    best = std::min(best, std::fabs(x - acc));
  }
  return best;
}

[[noreturn]] void keane(double x) {
  throw Error(Errc::KeaneDegenerate, "flow crosses the base within 1e-13 of a discontinuity at x = " +
                                         std::to_string(x));
}

}  // namespace

bool valid_suspension_data(std::span<const double> tau, std::span<const int> perm) {
  const std::size_t d = perm.size();
  if (tau.size() != d) return false;
  std::vector<int> inverse(d);
  for (std::size_t i = 0; i < d; ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  double top = 0.0;
  double bottom = 0.0;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    top += tau[k];
    bottom += tau[static_cast<std::size_t>(inverse[k])];
    if (!(top > 0.0) || !(bottom < 0.0)) return false;
  }
  return true;
}

Suspension Suspension::make(const Iet& base, std::vector<double> heights, std::optional<std::vector<double>> tau) {
  if (heights.size() != base.size())
    throw Error(Errc::DimensionMismatch, "need one height per interval");
  for (double h : heights)
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(Errc::NonPositiveHeight, "height " + std::to_string(h));
  Suspension s(base);
  if (tau) {
    if (!valid_suspension_data(*tau, base.perm()))
      throw Error(Errc::InvalidSuspension, "tau violates the suspension sign conditions");
    s.tau_ = std::move(*tau);
  }
  s.heights_ = std::move(heights);
  CompensatedSum area;
  for (std::size_t i = 0; i < base.size(); ++i) area.add(base.lengths()[i] * s.heights_[i]);
  s.area_ = area.value();
  return s;
}

double Suspension::min_height() const noexcept { return *std::min_element(heights_.begin(), heights_.end()); }
double Suspension::max_height() const noexcept { return *std::max_element(heights_.begin(), heights_.end()); }

Suspension Suspension::normalized() const {
  Suspension s = *this;
  for (auto& h : s.heights_) h /= area_;
  CompensatedSum area;
  for (std::size_t i = 0; i < base_.size(); ++i) area.add(base_.lengths()[i] * s.heights_[i]);
  s.area_ = area.value();
  return s;
}

void Suspension::check(const SurfacePoint& p) const {
  const double h = roof(p.x);
  if (!(p.y >= 0.0 && p.y < h))
    throw Error(Errc::OutOfDomain, "height " + std::to_string(p.y) + " outside [0, " + std::to_string(h) + ")");
}

Suspension canonical_suspension(const Iet& t) {
  const std::size_t d = t.size();
  const auto perm = t.perm();
  std::vector<double> tau(d);
  for (std::size_t j = 0; j < d; ++j) tau[j] = static_cast<double>(perm[j]) - static_cast<double>(j);
  std::vector<double> h(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      // h = -Omega tau
      if (i < j && perm[i] > perm[j]) h[i] -= tau[j];
      if (i > j && perm[i] < perm[j]) h[i] += tau[j];
    }
  for (double v : h)
    if (!(v > 0.0)) throw Error(Errc::NonPositiveHeight, "canonical height not positive");
  return Suspension::make(t, std::move(h), std::move(tau)).normalized();
}

SurfaceObservable::SurfaceObservable(const Suspension& s, PiecewiseFunction f)
    : base_(s.base()), heights_(s.heights().begin(), s.heights().end()), f_(std::move(f)) {
  f_.check_compatible(base_);
}

double SurfaceObservable::operator()(const SurfacePoint& p) const {
  const std::size_t i = base_.interval_index(p.x);
  if (!(p.y >= 0.0 && p.y < heights_[i])) throw Error(Errc::OutOfDomain, "point above the roof");
  return on_piece(i, p.x);
}

SurfaceObservable make_psi(const Suspension& s, const PiecewiseFunction& f) { return SurfaceObservable(s, f); }

SurfacePoint flow(const Suspension& s, SurfacePoint p, double t) {
  s.check(p);
  const Iet& base = s.base();
  const auto h = s.heights();
  double x = p.x;
  std::size_t i = base.index_unchecked(x);
  if (t >= 0.0) {
    double y = p.y + t;
    while (y >= h[i]) {
      y -= h[i];
      x = base.apply_unchecked(x);
      i = base.index_unchecked(x);
      if (base.distance_to_breakpoint(x) < kKeaneTolerance) keane(x);
    }
    return {x, y};
  }
  double y = p.y + t;
  while (y < 0.0) {
    x = base.apply_inverse_unchecked(x);
    i = base.index_unchecked(x);
    y += h[i];
    if (y < 0.0 && distance_to_image_breakpoint(base, x) < kKeaneTolerance) keane(x);
    if (base.distance_to_breakpoint(x) < kKeaneTolerance) keane(x);
  }
  // y + h can round up to exactly h
  if (y >= h[i]) y = std::nextafter(h[i], 0.0);
  return {x, y};
}

namespace {

// Walks (x, 0) through whole returns while the next return time stays <= t.
// Return times and sums use the same compensated order as return_time, so an
// arc ending exactly at t_n(x) has no fractional tail.
double integral_from_base(const Suspension& s, const PiecewiseFunction& f, double x, double t) {
  const Iet& base = s.base();
  const auto h = s.heights();
  CompensatedSum time;
  CompensatedSum sum;
  for (;;) {
    const std::size_t i = base.index_unchecked(x);
    CompensatedSum next = time;
    next.add(h[i]);
    if (next.value() > t) return sum.value() + (t - time.value()) * f.value(i, x) / h[i];
    time = next;
    sum.add(f.value(i, x));
    x = clamp_unit(x + base.offsets()[i]);
  }
}

}  // namespace

double return_time(const Suspension& s, double x, std::uint64_t n) {
  const Iet& base = s.base();
  base.interval_index(x);
  const auto h = s.heights();
  CompensatedSum time;
  for (std::uint64_t k = 0; k < n; ++k) {
    const std::size_t i = base.index_unchecked(x);
    time.add(h[i]);
    x = clamp_unit(x + base.offsets()[i]);
  }
  return time.value();
}

double ergodic_integral(const Suspension& s, const PiecewiseFunction& f, double x, double t) {
  f.check_compatible(s.base());
  s.base().interval_index(x);
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(Errc::InvalidArgument, "integration time must be finite and >= 0");
  return integral_from_base(s, f, x, t);
}

double ergodic_integral(const Suspension& s, const PiecewiseFunction& f, SurfacePoint p, double t) {
  if (p.y == 0.0) return ergodic_integral(s, f, p.x, t);
  f.check_compatible(s.base());
  s.check(p);
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(Errc::InvalidArgument, "integration time must be finite and >= 0");
  const Iet& base = s.base();
  const std::size_t i = base.index_unchecked(p.x);
  const double h = s.heights()[i];
  const double room = h - p.y;
  const double rate = f.value(i, p.x) / h;
  if (t < room) return t * rate;
  return room * rate + integral_from_base(s, f, base.apply_unchecked(p.x), t - room);
}

double DensityGrid::sup_deviation() const {
  double best = 0.0;
  for (double r : rho) best = std::max(best, std::fabs(r - 1.0));
  return best;
}

double DensityGrid::total_mass() const {
  CompensatedSum acc;
  for (std::size_t r = 0; r < rectangles; ++r)
    for (std::size_t c = 0; c < nx * ny; ++c) acc.add(rho[r * nx * ny + c] * cell_area[r]);
  return acc.value() / area;
}

namespace {

constexpr std::size_t kDensityChunk = 4096;
constexpr std::size_t kDensityLanes = 8;

struct DensityTables {
  std::size_t d = 0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> image_breaks;  // interior breakpoints of the inverse map
  std::vector<int> slot_interval;    // interval landing in each bottom slot
  std::vector<double> offsets;
  std::vector<double> heights;
  std::vector<double> lefts;
  std::vector<double> column_scale;  // nx / lambda_i
};

struct ChunkTally {
  std::vector<std::int64_t> full;   // whole passes through column (i, cx)
  std::vector<double> partial;      // occupation fractions per cell, or point counts
};

// One backward crossing: from (x, 0^-) into the top of the rectangle below.
inline std::size_t cross_down(const DensityTables& tab, double& x) {
  std::size_t slot = 0;
  double near = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < tab.d; ++j) {
    slot += (x >= tab.image_breaks[j]);
    near = std::min(near, std::fabs(x - tab.image_breaks[j]));
  }
  if (near < kKeaneTolerance) keane(x);
  const auto i = static_cast<std::size_t>(tab.slot_interval[slot]);
  x = clamp_unit(x - tab.offsets[i]);
  return i;
}

inline std::size_t column_of(const DensityTables& tab, std::size_t i, double x) {
  const double u = (x - tab.lefts[i]) * tab.column_scale[i];
  const auto cx = u <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(u);
  return i * tab.nx + std::min(cx, tab.nx - 1);
}

void run_chunk(const DensityTables& tab, DensityEstimator estimator, double time, std::span<const double> xs,
               std::uint64_t seed, std::size_t begin, std::size_t end, ChunkTally& tally) {
  const std::size_t ny = tab.ny;
  struct Lane {
    double x;
    double rem;
    double span;  // arc length for this sample
    bool active;
  };
  std::array<Lane, kDensityLanes> lanes{};
  std::size_t next = begin;
  auto load = [&](Lane& lane) {
    if (next == end) {
      lane.active = false;
      return;
    }
    const std::size_t j = next++;
    lane.x = xs[j];
    lane.span = estimator == DensityEstimator::ArcAverage ? time : Substream(seed, stream::kGamma, j).uniform() * time;
    lane.rem = lane.span;
    lane.active = true;
  };
  auto finish_at_base = [&](const Lane& lane) {
    // gamma = 0 leaves the sample at (x, 0)
    const std::size_t i = static_cast<std::size_t>(
        std::upper_bound(tab.lefts.begin() + 1, tab.lefts.end(), lane.x) - tab.lefts.begin() - 1);
    tally.partial[column_of(tab, i, lane.x) * ny] += 1.0;
  };
  for (auto& lane : lanes) load(lane);
  bool any = true;
  while (any) {
    any = false;
    for (auto& lane : lanes) {
      if (!lane.active) continue;
      any = true;
      if (!(lane.rem > 0.0)) {
        finish_at_base(lane);
        load(lane);
        continue;
      }
      const std::size_t i = cross_down(tab, lane.x);
      const double h = tab.heights[i];
      const std::size_t col = column_of(tab, i, lane.x);
      if (lane.rem > h) {
        ++tally.full[col];
        lane.rem -= h;
        continue;
      }
      // The arc ends inside this rectangle, covering y in [h - rem, h).
      const double lo = (h - lane.rem) / h * static_cast<double>(ny);
      if (estimator == DensityEstimator::Sampled) {
        const auto cy = std::min(static_cast<std::size_t>(lo), ny - 1);
        tally.partial[col * ny + cy] += 1.0;
      } else {
        const double per_cell = h / static_cast<double>(ny) / lane.span;
        const auto first = std::min(static_cast<std::size_t>(lo), ny - 1);
        tally.partial[col * ny + first] += (static_cast<double>(first + 1) - lo) * per_cell;
        for (std::size_t cy = first + 1; cy < ny; ++cy) tally.partial[col * ny + cy] += per_cell;
      }
      load(lane);
    }
  }
}

}  // namespace

DensityGrid density_field(const Suspension& s, double time, std::size_t nx, std::size_t ny, std::size_t samples,
                          std::uint64_t seed, unsigned threads, DensityEstimator estimator) {
  if (!(time > 0.0) || !std::isfinite(time)) throw Error(Errc::InvalidArgument, "flow time must be positive");
  if (nx < 4 || ny < 4) throw Error(Errc::InvalidArgument, "density grid needs at least 4x4 cells per rectangle");
  if (samples == 0) throw Error(Errc::InvalidArgument, "density needs samples");
  const Iet& base = s.base();
  const std::size_t d = base.size();

  DensityTables tab;
  tab.d = d;
  tab.nx = nx;
  tab.ny = ny;
  tab.slot_interval.assign(base.inverse_perm().begin(), base.inverse_perm().end());
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < d; ++p) {
    acc += base.lengths()[static_cast<std::size_t>(base.inverse_perm()[p])];
    tab.image_breaks.push_back(acc);
  }
  tab.offsets.assign(base.offsets().begin(), base.offsets().end());
  tab.heights.assign(s.heights().begin(), s.heights().end());
  tab.lefts.assign(base.lefts().begin(), base.lefts().end());
  for (std::size_t i = 0; i < d; ++i) tab.column_scale.push_back(static_cast<double>(nx) / base.lengths()[i]);

  const auto xs = sample_points(base, samples, seed, SampleStrategy::GridJitter);
  const std::size_t chunks = (samples + kDensityChunk - 1) / kDensityChunk;
  std::vector<ChunkTally> tallies(chunks);
  parallel_for(chunks, threads, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      tallies[c].full.assign(d * nx, 0);
      tallies[c].partial.assign(d * nx * ny, 0.0);
      run_chunk(tab, estimator, time, xs, seed, c * kDensityChunk, std::min(samples, (c + 1) * kDensityChunk),
                tallies[c]);
    }
  });

  // Chunks are reduced in a fixed order so the result is independent of threads.
  std::vector<std::int64_t> full(d * nx, 0);
  std::vector<double> partial(d * nx * ny, 0.0);
  for (const auto& t : tallies) {
    for (std::size_t k = 0; k < full.size(); ++k) full[k] += t.full[k];
    for (std::size_t k = 0; k < partial.size(); ++k) partial[k] += t.partial[k];
  }

  DensityGrid g;
  g.rectangles = d;
  g.nx = nx;
  g.ny = ny;
  g.area = s.area();
  g.rho.assign(d * nx * ny, 0.0);
  const double n = static_cast<double>(samples);
  for (std::size_t i = 0; i < d; ++i) {
    const double cell = base.lengths()[i] * tab.heights[i] / static_cast<double>(nx * ny);
    g.cell_area.push_back(cell);
    for (std::size_t cx = 0; cx < nx; ++cx) {
      const std::size_t col = i * nx + cx;
      for (std::size_t cy = 0; cy < ny; ++cy) {
        double mass = partial[col * ny + cy];
        if (estimator == DensityEstimator::ArcAverage)
          mass += static_cast<double>(full[col]) * tab.heights[i] / static_cast<double>(ny) / time;
        g.rho[col * ny + cy] = mass / n / (cell / g.area);
      }
    }
  }
  return g;
}

double surface_integral(const Suspension& s, const SurfaceObservable& psi, int nodes) {
  static constexpr double kNodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                       0.9061798459386640};
  static constexpr double kWeights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                         0.4786286704993665, 0.2369268850561891};
  if (nodes != 5) throw Error(Errc::InvalidArgument, "only the 5-node rule is available");
  const Iet& base = s.base();
  CompensatedSum acc;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double x0 = base.lefts()[i];
    const double w = base.lengths()[i];
    const double h = s.heights()[i];
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) {
        const double x = x0 + 0.5 * w * (1.0 + kNodes[a]);
        const double y = 0.5 * h * (1.0 + kNodes[b]);
        acc.add(0.25 * w * h * kWeights[a] * kWeights[b] * psi(SurfacePoint{x, y}));
      }
  }
  return acc.value();
}

void write_density_csv(std::ostream& os, const DensityGrid& g) {
  os << "rect_index,cell_x,cell_y,rho_hat\n";
  char buf[32];
  for (std::size_t r = 0; r < g.rectangles; ++r)
    for (std::size_t cx = 0; cx < g.nx; ++cx)
      for (std::size_t cy = 0; cy < g.ny; ++cy) {
        std::snprintf(buf, sizeof buf, "%.12g", g.at(r, cx, cy));
        os << r << ',' << cx << ',' << cy << ',' << buf << '\n';
      }
}

double weak_lip_bound(const Suspension& s, const PiecewiseFunction& f) {
  const Iet& base = s.base();
  f.check_compatible(base);
  const auto h = s.heights();
  double sup = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double lo = base.lefts()[i];
    const double hi = lo + base.lengths()[i];
    sup = std::max({sup, std::fabs(f.value(i, lo)) / h[i], std::fabs(f.value(i, hi)) / h[i]});
  }
  return sup + f.lipschitz() / s.min_height();
}

}  // namespace ietlab
