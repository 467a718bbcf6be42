#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "ietlab/orbit.hpp"
#include "ietlab/rauzy.hpp"

using namespace ietlab;
using doctest::Approx;
using testing::error_of;

namespace {

Iet golden_iet() {
  const double g = testing::golden();
  const double l[] = {1.0 - g, g};
  const int p[] = {2, 1};
  return Iet::make(l, p);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

Iet jittered(const Iet& t, std::uint64_t seed) {
  std::vector<double> l(t.lengths().begin(), t.lengths().end());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] *= 1.0 + 1e-10 * (2.0 * testing::uniform(seed, i) - 1.0);
  return Iet::from_zero_based(l, t.perm());
}

}  // namespace

TEST_SUITE("rauzy") {
  TEST_CASE("one step on a two-interval exchange subtracts the shorter length") {
    const double l[] = {0.3, 0.7};
    const int p[] = {2, 1};
    const RauzyStep s = rauzy_step(Iet::make(l, p));
    CHECK(s.move == Move::Top);
    CHECK(s.unnormalized_lengths[0] == Approx(0.3));
    CHECK(s.unnormalized_lengths[1] == Approx(0.4));
    CHECK(s.successor.perm_one_based() == std::vector<int>{2, 1});
    CHECK(s.successor.lengths()[0] == Approx(0.3 / 0.7));
    CHECK(s.log_scale == Approx(-std::log(0.7)));
  }

  TEST_CASE("golden exchange returns to itself after two steps") {
    const double g = testing::golden();
    const Iet t = golden_iet();
    const RauzyStep one = rauzy_step(t);
    // one step swaps the two lengths
    CHECK(one.successor.lengths()[0] == Approx(g).epsilon(1e-12));
    CHECK(one.successor.lengths()[1] == Approx(1.0 - g).epsilon(1e-12));
    const RauzyStep two = rauzy_step(one.successor);
    CHECK(two.move != one.move);
    CHECK(two.successor.lengths()[0] == Approx(1.0 - g).epsilon(1e-12));
    CHECK(two.successor.perm_one_based() == std::vector<int>{2, 1});
    CHECK(zorich_block(t).steps == 1);
  }

  TEST_CASE("exact tie is rejected") {
    const double l[] = {0.5, 0.5};
    const int p[] = {2, 1};
    CHECK(error_of([&] { rauzy_step(Iet::make(l, p)); }) == Errc::KeaneDegenerate);
    const double l4[] = {0.25, 0.25, 0.25, 0.25};
    const int p4[] = {4, 3, 2, 1};
    CHECK(error_of([&] { rauzy_step(Iet::make(l4, p4)); }) == Errc::KeaneDegenerate);
  }

  TEST_CASE("matrices are unimodular and carry the lengths") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      Iet t = testing::random_test_iet(2 + s % 5, s);
      for (int k = 0; k < 200; ++k) {
        const RauzyStep st = (k % 2) ? rauzy_step(t) : zorich_block(t);
        const auto det = st.matrix.determinant();
        CHECK((det == 1 || det == -1));
        for (std::size_t i = 0; i < t.size(); ++i)
          for (std::size_t j = 0; j < t.size(); ++j) CHECK(st.matrix(i, j) >= 0);
        const auto back = st.matrix.apply(st.unnormalized_lengths);
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::fabs(back[i] - t.lengths()[i]) <= 1e-12 * t.lengths()[i] + 1e-15);
        t = st.successor;
      }
    }
  }

  TEST_CASE("successor is the first return map") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Iet t = testing::random_test_iet(3 + s % 3, 50 + s);
      const RauzyStep st = zorich_block(t);
      const double len = std::accumulate(st.unnormalized_lengths.begin(), st.unnormalized_lengths.end(), 0.0);
      for (std::uint64_t j = 0; j < 10; ++j) {
        const double x = len * testing::uniform(s, j);
        double y = t.apply(x);
        while (y >= len) y = t.apply(y);
        CHECK(std::fabs(y - len * st.successor.apply(x / len)) <= 1e-10);
      }
    }
  }

  TEST_CASE("block lengths on two intervals are continued fraction digits") {
    const double r = std::sqrt(2.0) + 4.0;  // [5; 2, 2, 2, ...]
    const double l[] = {1.0, r};
    const int p[] = {2, 1};
    Iet t = Iet::make(l, p);
    long double a = 1.0L, b = 4.0L + std::sqrt(2.0L);
    for (int k = 0; k < 8; ++k) {
      const long double big = std::max(a, b), small = std::min(a, b);
      const auto digit = static_cast<std::uint64_t>(std::floor(big / small));
      const RauzyStep st = zorich_block(t);
      CHECK(st.steps == digit);
      if (a > b) a -= digit * b;
      else b -= digit * a;
      t = st.successor;
    }
  }

  TEST_CASE("integer matrix products") {
    IntMatrix a(2);
    a(0, 0) = 1, a(0, 1) = 1, a(1, 0) = 0, a(1, 1) = 1;
    const IntMatrix p = a * a;
    CHECK(p(0, 1) == 2);
    CHECK((IntMatrix::identity(2) * a) == a);
    IntMatrix big(2);
    big(0, 0) = std::int64_t{1} << 62, big(0, 1) = 1, big(1, 0) = 1, big(1, 1) = 1;
    IntMatrix out;
    CHECK_FALSE(big.try_multiply(big, out));
    CHECK(error_of([&] { (void)(big * big); }) == Errc::BlockOverflow);
  }

  TEST_CASE("frame after one block is orthonormal") {
    const OseledetsFrame f = cocycle_orbit(testing::random_test_iet(5, 3), 1, 7);
    for (std::size_t i = 0; i < f.dim; ++i)
      for (std::size_t j = 0; j < f.dim; ++j)
        CHECK(dot(f.column(i), f.column(j)) == Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
  }

  TEST_CASE("golden spectrum is symmetric") {
    const OseledetsFrame f = cocycle_orbit(golden_iet(), 10'000);
    CHECK(f.theta_hat[0] == Approx(1.0).epsilon(0.02));
    CHECK(f.theta_hat[1] == Approx(-1.0).epsilon(0.02));
  }

  TEST_CASE("top exponent is one and the spectrum is sorted") {
    for (std::size_t d : {4u, 5u}) {
      for (std::uint64_t s = 0; s < 3; ++s) {
        const OseledetsFrame f = cocycle_orbit(testing::random_test_iet(d, 10 * d + s), 10'000, s + 1);
        CHECK(std::fabs(f.theta_hat[0] - 1.0) <= 0.02);
        CHECK(std::is_sorted(f.theta_hat.rbegin(), f.theta_hat.rend()));
        CHECK(f.blocks == 10'000);
      }
    }
  }

  TEST_CASE("second exponent of the hyperelliptic four-interval class") {
    const Iet r = testing::random_test_iet(4, 77);
    const Iet t = Iet::from_zero_based(std::vector<double>(r.lengths().begin(), r.lengths().end()), std::vector<int>{3, 2, 1, 0});
    const OseledetsFrame a = cocycle_orbit(jittered(t, 1), 50'000, 1);
    const OseledetsFrame b = cocycle_orbit(jittered(t, 2), 50'000, 2);
    CHECK(a.theta_hat[1] >= 0.28);
    CHECK(a.theta_hat[1] <= 0.38);
    CHECK(std::fabs(a.theta_hat[1] - b.theta_hat[1]) <= 0.02);
    // symplectic pairing
    CHECK(a.theta_hat[1] + a.theta_hat[2] == Approx(0.0).epsilon(0.01).scale(1.0));
  }

  TEST_CASE("second direction: unit, orthogonal to lengths, reproducible") {
    const Iet t = testing::random_test_iet(4, 400);
    const Iet base = Iet::from_zero_based(std::vector<double>(t.lengths().begin(), t.lengths().end()),
                                          std::vector<int>{3, 2, 1, 0});
    const SecondDirection a = second_direction_details(jittered(base, 1), 2000);
    const SecondDirection b = second_direction_details(jittered(base, 2), 20'000);
    CHECK(dot(a.direction, a.direction) == Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(dot(a.direction, base.lengths())) <= 1e-10);
    const double cosine = std::min(1.0, std::fabs(dot(a.direction, b.direction)));
    CHECK(std::acos(cosine) < 0.05);
    CHECK(dot(a.direction, b.direction) > 0.0);
    CHECK(std::fabs(dot(a.perron, a.direction)) < 1e-6);
    CHECK(a.theta_hat[1] > 0.05);
    CHECK(error_of([&] { second_direction(golden_iet(), 2000); }) == Errc::NoSecondExponent);
  }

  TEST_CASE("cocycle functions") {
    const Iet r = testing::random_test_iet(4, 9);
    const Iet t = Iet::from_zero_based(std::vector<double>(r.lengths().begin(), r.lengths().end()), std::vector<int>{3, 2, 1, 0});
    const std::vector<double> flat(4, 0.5);
    const PiecewiseFunction f = cocycle_function(flat, t);
    CHECK(birkhoff_sum(t, f, 0.3, 1000) == Approx(500.0).epsilon(1e-14));
    const auto v = second_direction(t, 2000);
    CHECK(mean_value(cocycle_function(v, t), t) == Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(error_of([&] { cocycle_function(std::vector<double>{1.0, 0.0}, t); }) == Errc::DimensionMismatch);
    CHECK(error_of([&] { cocycle_function(std::vector<double>{1.0, 1.0, 0.0, 0.0}, t); }) == Errc::InvalidArgument);
  }

  TEST_CASE("degeneracy classification") {
    const Iet t = testing::random_test_iet(4, 21);
    const Iet u = Iet::from_zero_based(std::vector<double>(t.lengths().begin(), t.lengths().end()),
                                       std::vector<int>{3, 2, 1, 0});
    const auto v = second_direction(u, 2000);
    const DegeneracyResult r = degeneracy_index(u, cocycle_function(v, u), 100'000);
    CHECK_FALSE(r.degenerate);
    CHECK(r.i_hat == 2);

    // g(x) = x gives the coboundary g - g o T = -offset on each piece
    std::vector<double> c(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) c[i] = -u.offsets()[i];
    const DegeneracyResult cob = degeneracy_index(u, PiecewiseFunction::piecewise_constant(c), 100'000, r.theta_hat);
    CHECK(cob.degenerate);
    CHECK(cob.i_hat == 0);

    CHECK(degeneracy_index(u, PiecewiseFunction::constant(4, 0.0), 10'000, r.theta_hat).degenerate);
    CHECK(error_of([&] { degeneracy_index(u, PiecewiseFunction::constant(4, 1.0), 10'000); }) == Errc::NonZeroMean);
    CHECK(error_of([&] { degeneracy_index(u, PiecewiseFunction::constant(4, 0.0), 100); }) == Errc::InvalidArgument);
  }
}
