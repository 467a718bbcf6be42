#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ietlab/iet.hpp"

namespace ietlab {

/// Point (x, y) of the suspended surface: x on the base, 0 <= y < h(x).
struct SurfacePoint {
  double x = 0.0;
  double y = 0.0;
};

/// Special flow under the piecewise constant roof h over an IET, i.e. the
/// vertical flow of a zippered-rectangle surface.
class Suspension {
 public:
  /// Heights are kept as given. tau, when present, must satisfy the suspension
  /// condition (top partial sums positive, bottom partial sums negative).
  /// Throws NonPositiveHeight, InvalidSuspension or DimensionMismatch.
  static Suspension make(const Iet& base, std::vector<double> heights,
                         std::optional<std::vector<double>> tau = std::nullopt);

  const Iet& base() const noexcept { return base_; }
  std::size_t size() const noexcept { return heights_.size(); }
  std::span<const double> heights() const noexcept { return heights_; }
  /// Empty when the suspension was built from heights alone.
  std::span<const double> tau() const noexcept { return tau_; }
  /// sum_i lambda_i h_i.
  double area() const noexcept { return area_; }
  double min_height() const noexcept;
  double max_height() const noexcept;

  /// Same surface with heights scaled to area 1.
  Suspension normalized() const;

  double roof(double x) const { return heights_[base_.interval_index(x)]; }
  /// Throws OutOfDomain when p is not on the surface.
  void check(const SurfacePoint& p) const;

 private:
  Suspension(Iet base) : base_(std::move(base)) {}
  Iet base_;
  std::vector<double> heights_;
  std::vector<double> tau_;
  double area_ = 0.0;
};

/// True when tau satisfies the suspension condition for the zero-based perm.
bool valid_suspension_data(std::span<const double> tau, std::span<const int> perm);

/// tau_j = perm(j) - j, heights -Omega tau, scaled to area 1.
Suspension canonical_suspension(const Iet& t);

/// psi_f(x, y) = f(x) / h(x).
class SurfaceObservable {
 public:
  SurfaceObservable(const Suspension& s, PiecewiseFunction f);
  double operator()(const SurfacePoint& p) const;
  /// Value on the rectangle over interval i at base coordinate x.
  double on_piece(std::size_t i, double x) const noexcept { return f_.value(i, x) / heights_[i]; }
  const PiecewiseFunction& base_function() const noexcept { return f_; }

 private:
  Iet base_;
  std::vector<double> heights_;
  PiecewiseFunction f_;
};

SurfaceObservable make_psi(const Suspension& s, const PiecewiseFunction& f);

/// Vertical flow for signed time t. Throws KeaneDegenerate when a roof or
/// floor crossing happens within 1e-13 of a discontinuity.
SurfacePoint flow(const Suspension& s, SurfacePoint p, double t);

/// t_n(x) = S_n h(x), the time of the n-th return of (x, 0) to the base.
double return_time(const Suspension& s, double x, std::uint64_t n);

/// Integral of psi_f along the vertical arc of length t >= 0 from p.
double ergodic_integral(const Suspension& s, const PiecewiseFunction& f, SurfacePoint p, double t);
/// Arc starting at (x, 0).
double ergodic_integral(const Suspension& s, const PiecewiseFunction& f, double x, double t);

enum class DensityEstimator {
  /// One point q = flow((x,0), -gamma T) per sample, gamma ~ U[0,1].
  Sampled,
  /// The law of q given x in closed form: occupation time of the whole arc.
  ArcAverage,
};

struct DensityGrid {
  std::size_t rectangles = 0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  /// rho[(r * nx + cx) * ny + cy], density relative to the area measure.
  std::vector<double> rho;
  /// Area of each cell of rectangle r, and of the whole surface.
  std::vector<double> cell_area;
  double area = 1.0;

  double at(std::size_t r, std::size_t cx, std::size_t cy) const { return rho[(r * nx + cx) * ny + cy]; }
  /// sup over cells of |rho - 1|.
  double sup_deviation() const;
  /// sum of rho * cell area / area; 1 for a probability.
  double total_mass() const;
};

/// Empirical density of q = flow((x,0), -gamma T) with x stratified on I and
/// gamma uniform on [0,1], on an nx by ny grid over each rectangle.
/// Requires nx, ny >= 4. Output does not depend on the thread count.
DensityGrid density_field(const Suspension& s, double time, std::size_t nx, std::size_t ny,
                          std::size_t samples, std::uint64_t seed, unsigned threads = 1,
                          DensityEstimator estimator = DensityEstimator::ArcAverage);

/// Integral of psi over the surface by tensor Gauss-Legendre quadrature on
/// every rectangle (exact for psi affine in x).
double surface_integral(const Suspension& s, const SurfaceObservable& psi, int nodes = 5);

/// Columns rect_index, cell_x, cell_y, rho_hat.
void write_density_csv(std::ostream& os, const DensityGrid& g);

/// sup |psi_f| + L_f / min h, an upper bound for the weakly Lipschitz norm of psi_f.
double weak_lip_bound(const Suspension& s, const PiecewiseFunction& f);

}  // namespace ietlab
