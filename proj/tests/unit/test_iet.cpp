#include <doctest.h>

#include "helpers.hpp"
#include "ietlab/error.hpp"
#include "ietlab/iet.hpp"
#include "ietlab/orbit.hpp"

using namespace ietlab;
using doctest::Approx;

namespace {

using testing::error_of;

Iet two_interval() {
  const double l[] = {0.3, 0.7};
  const int p[] = {2, 1};
  return Iet::make(l, p);
}

}  // namespace

TEST_SUITE("iet") {
  TEST_CASE("two-interval exchange has one breakpoint and opposite offsets") {
    const Iet t = two_interval();
    CHECK(t.size() == 2);
    CHECK(t.lefts()[1] == Approx(0.3));
    CHECK(t.offsets()[0] == Approx(0.7));
    CHECK(t.offsets()[1] == Approx(-0.3));
    CHECK(t.total_length() == 1.0);
  }

  TEST_CASE("lengths are scale free") {
    const double l[] = {3.0, 7.0};
    const int p[] = {2, 1};
    const Iet t = Iet::make(l, p);
    const Iet u = two_interval();
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(t.lengths()[i] == Approx(u.lengths()[i]).epsilon(1e-15));
      CHECK(t.offsets()[i] == Approx(u.offsets()[i]).epsilon(1e-15));
    }
  }

  TEST_CASE("construction errors") {
    const double half[] = {0.5, 0.5};
    const int id[] = {1, 2};
    CHECK(error_of([&] { Iet::make(half, id); }) == Errc::ReduciblePermutation);
    const double neg[] = {0.5, -0.5};
    const int swap[] = {2, 1};
    CHECK(error_of([&] { Iet::make(neg, swap); }) == Errc::NonPositiveLength);
    const int bad[] = {2, 2};
    CHECK(error_of([&] { Iet::make(half, bad); }) == Errc::InvalidPermutation);
    const int three[] = {3, 2, 1};
    CHECK(error_of([&] { Iet::make(half, three); }) == Errc::InvalidPermutation);
    const double nan_len[] = {0.5, std::nan("")};
    CHECK(error_of([&] { Iet::make(nan_len, swap); }) == Errc::NonPositiveLength);
  }

  TEST_CASE("apply and apply_inverse") {
    const Iet t = two_interval();
    CHECK(t.apply(0.1) == Approx(0.8));
    CHECK(t.apply(0.5) == Approx(0.2));
    CHECK(t.apply_inverse(t.apply(0.123456)) == Approx(0.123456).epsilon(1e-12));
    CHECK(error_of([&] { t.apply(1.0); }) == Errc::OutOfDomain);
    CHECK(error_of([&] { t.apply(-0.1); }) == Errc::OutOfDomain);
  }

  TEST_CASE("interval index uses half-open pieces") {
    const Iet t = two_interval();
    CHECK(t.interval_index(0.1) == 0);
    CHECK(t.interval_index(0.3) == 1);
    const double l[] = {0.2, 0.3, 0.5};
    const int p[] = {3, 2, 1};
    CHECK(Iet::make(l, p).interval_index(0.49) == 1);
  }

  TEST_CASE("rotation is the two-interval exchange") {
    const Iet r = Iet::rotation(0.25);
    CHECK(r.apply(0.1) == Approx(0.35));
    CHECK(r.apply(0.8) == Approx(0.05));
  }

  TEST_CASE("birkhoff sum examples") {
    const double l[] = {0.5, 0.5};
    const int p[] = {2, 1};
    const Iet t = Iet::make(l, p);
    const PiecewiseFunction id({1.0, 1.0}, {0.0, 0.0});
    CHECK(birkhoff_sum(t, id, 0.1, 0) == 0.0);
    CHECK(birkhoff_sum(t, id, 0.1, 2) == Approx(0.7));
    std::vector<std::size_t> trace;
    birkhoff_sum(t, id, 0.1, 2, &trace);
    CHECK(trace == std::vector<std::size_t>{0, 1});
    CHECK(iterate(t, 0.1, 2) == Approx(0.1));
  }

  TEST_CASE("mean value examples") {
    const Iet t = two_interval();
    CHECK(mean_value(PiecewiseFunction::constant(2, 3.5), t) == Approx(3.5));
    CHECK(mean_value(PiecewiseFunction({1.0, 1.0}, {0.0, 0.0}), t) == Approx(0.5));
    const double l[] = {0.5, 0.5};
    const int p[] = {2, 1};
    CHECK(mean_value(PiecewiseFunction({0.0, 0.0}, {1.0, -1.0}), Iet::make(l, p)) == Approx(0.0));
    const PiecewiseFunction f = testing::random_test_function(2, 3);
    CHECK(mean_value(f.centered(t), t) == Approx(0.0).epsilon(1e-15));
    const Iet three = testing::random_test_iet(3, 1);
    CHECK(error_of([&] { f.check_compatible(three); }) == Errc::IncompatiblePartition);
  }

  TEST_CASE("sample points") {
    const Iet t = two_interval();
    const auto q = sample_points(t, 4, 9);
    REQUIRE(q.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(q[j] >= 0.25 * j);
      CHECK(q[j] < 0.25 * (j + 1));
    }
    CHECK(sample_points(t, 1000, 5) == sample_points(t, 1000, 5));
    const auto iid = sample_points(t, 100'000, 11, SampleStrategy::Iid);
    double m = 0.0;
    for (double x : iid) m += x;
    m /= iid.size();
    CHECK(std::fabs(m - 0.5) <= 3.0 * 0.2887 / std::sqrt(1e5));
  }

  TEST_CASE("cocycle additivity and boundedness") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const std::size_t d = 2 + s % 5;
      const Iet t = testing::random_test_iet(d, s);
      const PiecewiseFunction f = testing::random_test_function(d, s);
      const double x = testing::uniform(s, 0);
      const auto m = static_cast<std::uint64_t>(1 + 1e4 * testing::uniform(s, 1));
      const auto n = static_cast<std::uint64_t>(1 + 1e4 * testing::uniform(s, 2));
      const double sup = f.sup_abs(t);
      const double whole = birkhoff_sum(t, f, x, m + n);
      const double split = birkhoff_sum(t, f, x, m) + birkhoff_sum(t, f, iterate(t, x, m), n);
      CHECK(std::fabs(whole - split) <= 1e-9 * (m + n) * sup);
      CHECK(std::fabs(whole) <= (m + n) * sup);
    }
  }

  TEST_CASE("measure preservation on a grid") {
    const Iet t = testing::random_test_iet(5, 17);
    const std::size_t n = 10'000;
    std::vector<double> counts(t.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = t.apply((j + 0.5) / n);
      // y lies in T(I_i) for the i in bottom position of y
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double lo = t.image_left(i);
        if (y >= lo && y < lo + t.lengths()[i]) counts[i] += 1.0;
      }
    }
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::fabs(counts[i] / n - t.lengths()[i]) <= 2.0 / std::sqrt(n));
  }

  TEST_CASE("bijective off breakpoints") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Iet t = testing::random_test_iet(4, 100 + s);
      for (std::uint64_t j = 0; j < 50; ++j) {
        const double x = testing::uniform(s, j);
        CHECK(std::fabs(t.apply_inverse(t.apply(x)) - x) <= 1e-12);
        CHECK(t.apply(x) < 1.0);
      }
    }
  }

  TEST_CASE("irreducibility") {
    const int a[] = {1, 0};
    const int b[] = {0, 1};
    const int c[] = {1, 0, 2};
    const int e[] = {3, 2, 1, 0};
    CHECK(is_irreducible(a));
    CHECK_FALSE(is_irreducible(b));
    CHECK_FALSE(is_irreducible(c));
    CHECK(is_irreducible(e));
  }
}

TEST_SUITE("orbit") {
  TEST_CASE("batched kernel matches the scalar sum") {
    for (std::size_t d : {2u, 4u, 5u, 9u}) {
      const Iet t = testing::random_test_iet(d, d);
      const std::vector<PiecewiseFunction> fs{testing::random_test_function(d, 1), testing::random_test_function(d, 2),
                                              PiecewiseFunction::constant(d, 1.0)};
      const auto xs = sample_points(t, 77, 3);
      const std::vector<std::uint64_t> ns{0, 1, 10, 999, 5000};
      const BirkhoffTable tab = birkhoff_sums(t, fs, xs, ns, 2);
      for (std::size_t p = 0; p < xs.size(); p += 7)
        for (std::size_t f = 0; f < fs.size(); ++f)
          for (std::size_t c = 0; c < ns.size(); ++c) {
            const double ref = birkhoff_sum(t, fs[f], xs[p], ns[c]);
            CHECK(tab.at(p, f, c) == Approx(ref).epsilon(1e-12).scale(1.0));
          }
      for (std::size_t p = 0; p < xs.size(); ++p) CHECK(tab.at(p, 2, 4) == 5000.0);
    }
  }

  TEST_CASE("kernel output is independent of the thread count") {
    const Iet t = testing::random_test_iet(4, 8);
    const std::vector<PiecewiseFunction> fs{testing::random_test_function(4, 1)};
    const auto xs = sample_points(t, 1000, 3);
    const std::vector<std::uint64_t> ns{100, 20000};
    CHECK(birkhoff_sums(t, fs, xs, ns, 1).values == birkhoff_sums(t, fs, xs, ns, 5).values);
  }

  TEST_CASE("log spaced schedule") {
    const auto ns = log_spaced(1000, 1'000'000, 8);
    REQUIRE(ns.size() == 8);
    CHECK(ns.front() == 1000);
    CHECK(ns.back() == 1'000'000);
    for (std::size_t i = 1; i < ns.size(); ++i) CHECK(ns[i] > ns[i - 1]);
    CHECK(log_spaced(1, 5, 5) == std::vector<std::uint64_t>{1, 2, 3, 5});
  }
}
