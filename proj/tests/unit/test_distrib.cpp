#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "ietlab/distrib.hpp"

using namespace ietlab;
using doctest::Approx;
using testing::error_of;

namespace {

constexpr double kTol = 1e-9;

/// Mixture of a normal and an exponential tail, shape varying with the seed.
std::vector<double> random_sample(std::uint64_t seed, std::size_t n) {
  Substream rng(seed, testing::kTestStream + 9, 0);
  std::normal_distribution<double> normal(0.0, 0.5 + rng.uniform());
  std::exponential_distribution<double> expo(1.0 + 2.0 * rng.uniform());
  const double mix = rng.uniform();
  std::vector<double> s(n);
  for (auto& v : s) v = rng.uniform() < mix ? normal(rng) : expo(rng);
  return s;
}

std::vector<double> centered(std::vector<double> s) {
  double m = 0.0;
  for (double v : s) m += v;
  m /= s.size();
  for (double& v : s) v -= m;
  return s;
}

std::vector<double> mapped(const std::vector<double>& s, double scale, double shift) {
  std::vector<double> out(s);
  for (double& v : out) v = scale * v + shift;
  return out;
}

}  // namespace

TEST_SUITE("distrib") {
  TEST_CASE("moments") {
    const auto p = empirical(std::vector<double>{3.0, 1.0, 2.0});
    CHECK(p.mean() == Approx(2.0));
    CHECK(p.variance() == Approx(2.0 / 3.0));
    CHECK(p.samples()[0] == 1.0);
    CHECK(empirical(std::vector<double>{4.0, 4.0, 4.0}).variance() == 0.0);
    const auto one = empirical(std::vector<double>{5.0});
    CHECK(one.mean() == 5.0);
    CHECK(one.variance() == 0.0);
    CHECK(error_of([] { empirical(std::vector<double>{}); }) == Errc::EmptySample);
    CHECK(p.cdf(2.0) == Approx(2.0 / 3.0));
    CHECK(p.cdf(0.5) == 0.0);
  }

  TEST_CASE("standardize") {
    const auto z = standardize(empirical(std::vector<double>{1.0, 2.0, 3.0}));
    CHECK(z.samples()[0] == Approx(-std::sqrt(1.5)));
    CHECK(z.samples()[1] == Approx(0.0));
    CHECK(z.samples()[2] == Approx(std::sqrt(1.5)));
    const auto zz = standardize(z);
    for (std::size_t i = 0; i < 3; ++i) CHECK(zz.samples()[i] == Approx(z.samples()[i]).epsilon(1e-10));
    CHECK(error_of([] { standardize(empirical(std::vector<double>{2.0, 2.0})); }) == Errc::DegenerateVariance);
  }

  TEST_CASE("distance examples") {
    const auto zero = empirical(std::vector<double>{0.0});
    CHECK(d_kr(zero, empirical(std::vector<double>{1.0})) == Approx(1.0));
    CHECK(d_kr(empirical(std::vector<double>{0.0, 2.0}), empirical(std::vector<double>{1.0, 1.0})) == Approx(1.0));
    const auto p = empirical(random_sample(1, 1000));
    CHECK(d_kr(p, p) == 0.0);
    CHECK(d_lp(p, p) <= kTol);
    CHECK(d_lp(zero, empirical(std::vector<double>{0.4})) == Approx(0.4).epsilon(1e-8));
    CHECK(d_lp(zero, empirical(std::vector<double>{3.0})) == Approx(1.0).epsilon(1e-8));
    // unequal sizes
    CHECK(d_kr(empirical(std::vector<double>{0.0, 1.0}), empirical(std::vector<double>{0.0, 0.0, 1.0})) ==
          Approx(1.0 / 6.0));
  }

  TEST_CASE("shift bound") {
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto s = random_sample(k, 10'000);
      const double eps = testing::uniform(k, 0) - 0.5;
      const auto p = empirical(s);
      const auto q = empirical(mapped(s, 1.0, eps));
      CHECK(d_kr(p, q) <= std::fabs(eps) + kTol);
      CHECK(d_lp(p, q) <= std::fabs(eps) + kTol);
    }
  }

  TEST_CASE("scaling bounds") {
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto s = centered(random_sample(100 + k, 10'000));
      const double eps = testing::uniform(k, 1) - 0.5;
      const auto p = empirical(s);
      const auto q = empirical(mapped(s, 1.0 + eps, 0.0));
      double mean_abs = 0.0;
      for (double v : s) mean_abs += std::fabs(v);
      mean_abs /= s.size();
      const double a = std::fabs(eps);
      CHECK(d_kr(p, q) <= a * mean_abs + 1e-12);
      const double lp_bound = std::pow(a, 2.0 / 3.0) * std::cbrt(p.variance()) * std::pow((1 + a) / (1 - a), 2.0 / 3.0);
      CHECK(d_lp(p, q) <= lp_bound + 2 * kTol);
    }
  }

  TEST_CASE("cross-metric bound and levy") {
    for (std::uint64_t k = 0; k < 60; ++k) {
      const auto p = empirical(random_sample(200 + k, 2000 + 37 * k));
      const auto q = empirical(mapped(random_sample(300 + k, 3000), 1.0 + 0.3 * testing::uniform(k, 2), 0.2));
      const double lp = d_lp(p, q);
      CHECK(lp * lp <= d_kr(p, q) + 2 * kTol);
      CHECK(d_levy(p, q) <= lp + 2 * kTol);
      CHECK(lp <= 1.0);
    }
  }

  TEST_CASE("metric axioms") {
    for (std::uint64_t k = 0; k < 30; ++k) {
      const auto p = empirical(random_sample(400 + k, 1500));
      const auto q = empirical(random_sample(500 + k, 1700));
      const auto r = empirical(mapped(random_sample(600 + k, 1300), 0.7, 0.1));
      CHECK(d_kr(p, q) == Approx(d_kr(q, p)).epsilon(1e-12));
      CHECK(std::fabs(d_lp(p, q) - d_lp(q, p)) <= 2 * kTol);
      CHECK(d_kr(p, r) <= d_kr(p, q) + d_kr(q, r) + 1e-12);
      CHECK(d_lp(p, r) <= d_lp(p, q) + d_lp(q, r) + 2 * kTol);
      CHECK(d_kr(p, q) > 0.0);
      CHECK(d_lp(p, q) > 0.0);
    }
  }

  TEST_CASE("sample text round trip") {
    const auto s = random_sample(7, 100);
    std::stringstream io;
    write_samples(io, s);
    CHECK(read_samples(io) == s);
    std::istringstream junk("1.0\n2.5\nabc\n");
    CHECK(error_of([&] { read_samples(junk); }) == Errc::InvalidArgument);
  }

  TEST_CASE("least squares slope") {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y{1.0, 3.0, 5.0, 7.0};
    CHECK(least_squares_slope(x, y) == Approx(2.0));
  }
}
