#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "ietlab/experiments.hpp"
#include "ietlab/io.hpp"

using namespace ietlab;
using doctest::Approx;
using testing::error_of;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ietlab_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_limit_config(std::uint64_t seed) {
  return parse_config(json::parse(R"({
    "iet": {"random": {"d": 4, "seed": )" + std::to_string(seed) + R"(}},
    "f": "random-zero-mean",
    "n_schedule": [1000, 3000, 10000],
    "samples": 2000,
    "seed": 3
  })"));
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("json round trips") {
    const Iet t = testing::random_test_iet(5, 1);
    const Iet u = iet_from_json(to_json(t));
    CHECK(u.perm_one_based() == t.perm_one_based());
    for (std::size_t i = 0; i < 5; ++i) CHECK(u.lengths()[i] == Approx(t.lengths()[i]).epsilon(1e-15));

    const PiecewiseFunction f = testing::random_test_function(5, 2);
    CHECK(function_from_json(to_json(f)) == f);

    const Suspension s = canonical_suspension(t);
    const json js = to_json(s);
    CHECK(js.contains("tau"));
    const Suspension back = suspension_from_json(js);
    for (std::size_t i = 0; i < 5; ++i) CHECK(back.heights()[i] == Approx(s.heights()[i]).epsilon(1e-15));
  }

  TEST_CASE("json errors") {
    CHECK(error_of([] { iet_from_json(json::parse(R"({"lengths": [1, 2]})")); }) == Errc::InvalidArgument);
    CHECK(error_of([] { iet_from_json(json::parse(R"({"lengths": [1, 2], "perm": [1.5, 2]})")); }) ==
          Errc::InvalidArgument);
    CHECK(error_of([] { iet_from_json(json::parse(R"({"lengths": [1, 2], "perm": [1, 2]})")); }) ==
          Errc::ReduciblePermutation);
    CHECK(error_of([] {
            suspension_from_json(json::parse(R"({"lengths": [1, 2], "perm": [2, 1], "heights": [1, 1], "tau": [-1, 1]})"));
          }) == Errc::InvalidSuspension);
  }
}

TEST_SUITE("experiments") {
  TEST_CASE("config defaults and validation") {
    const ExperimentConfig c = parse_config(json::parse(R"({"iet": {"random": {"d": 4}}})"));
    CHECK(c.n_schedule.size() == 8);
    CHECK(c.n_schedule.front() == 1000);
    CHECK(c.n_schedule.back() == 1'000'000);
    CHECK(c.samples == 100'000);

    const char* bad[] = {
        R"({})",
        R"({"iet": {"random": {"d": 4}}, "bogus": 1})",
        R"({"iet": {"random": {"d": 4}}, "samples": 10})",
        R"({"iet": {"random": {"d": 4}}, "n_schedule": [100, 50]})",
        R"({"iet": {"random": {"d": 4}}, "n_schedule": [100]})",
        R"({"iet": {"random": {"d": 4}}, "f": "sideways"})",
        R"({"iet": {"random": {"d": 4}}, "lyapunov": {"blocks": 10}})",
        R"({"iet": {"lengths": [1, 2], "perm": [1, 2]}})",
        R"({"iet": {"random": {"d": 4}}, "f": {"a": [1], "b": [1]}})",
        R"([1, 2])",
    };
    for (const char* text : bad) {
      CAPTURE(text);
      CHECK(error_of([&] { build_iet(parse_config(json::parse(text))); }) == Errc::ConfigError);
    }
  }

  TEST_CASE("config files") {
    const auto dir = scratch_dir("config");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "ok.json") << R"({"iet": {"lengths": [0.3, 0.7], "perm": [2, 1]}, "output": "x"})";
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(load_config(dir / "ok.json").output == "x");
    CHECK(error_of([&] { load_config(dir / "broken.json"); }) == Errc::ConfigError);
    CHECK(error_of([&] { load_config(dir / "missing.json"); }) == Errc::ConfigError);
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(Errc::ConfigError) == 3);
    CHECK(exit_code_for(Errc::InvalidPermutation) == 3);
    CHECK(exit_code_for(Errc::NoSecondExponent) == 2);
    CHECK(exit_code_for(Errc::DegenerateVariance) == 2);
    CHECK(exit_code_for(Errc::DegenerateObservable) == 2);
    CHECK(exit_code_for(Errc::KeaneDegenerate) == 2);
  }

  TEST_CASE("random inputs") {
    const Iet t = random_iet(4, 5);
    CHECK(t.perm_one_based() == std::vector<int>{4, 3, 2, 1});
    CHECK(random_iet(4, 5) == t);
    CHECK(mean_value(random_zero_mean_function(t, 2), t) == Approx(0.0).scale(1.0).epsilon(1e-15));
  }

  TEST_CASE("limit report") {
    const ExperimentConfig c = small_limit_config(2);
    const LimitResult r = run_limit(c, 2);
    REQUIRE(r.rows.size() == 3);
    CHECK(std::isnan(r.rows[0].var_slope));
    for (const auto& row : r.rows) {
      CHECK(row.d_lp <= 1.0);
      CHECK(row.d_lp * row.d_lp <= row.d_kr + 2e-9);
      CHECK(row.var > 0.0);
    }
    CHECK(r.summary["rate"] == "qualitative");
    std::ostringstream os;
    write_limit_csv(os, r.rows);
    CHECK(os.str().rfind("n,mean,var,d_kr,d_lp,var_slope\n1000,", 0) == 0);
  }

  TEST_CASE("limit output does not depend on threads") {
    const auto a = scratch_dir("limit_a"), b = scratch_dir("limit_b");
    const ExperimentConfig c = small_limit_config(4);
    const int ea = cmd_limit(c, a, 1);
    const int eb = cmd_limit(c, b, 3);
    CHECK(ea == eb);
    CHECK(slurp(a / "report.csv") == slurp(b / "report.csv"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  }

  TEST_CASE("second-direction observable compares to itself") {
    ExperimentConfig c = small_limit_config(6);
    c.function = FunctionKind::SecondDirection;
    const LimitResult r = run_limit(c, 1);
    for (const auto& row : r.rows) CHECK(row.d_kr <= 2.0 / std::sqrt(static_cast<double>(c.samples)));
  }

  TEST_CASE("genus one is rejected") {
    const auto dir = scratch_dir("golden");
    const ExperimentConfig c = parse_config(json::parse(R"({
      "iet": {"lengths": [0.3819660112501051, 0.6180339887498949], "perm": [2, 1]},
      "n_schedule": [1000, 10000], "samples": 1000})"));
    CHECK(cmd_limit(c, dir, 1) == 2);
    const json summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary["status"] == "DEGENERATE");
    CHECK(summary["error"].get<std::string>().find("NoSecondExponent") != std::string::npos);
  }

  TEST_CASE("verify on a torus") {
    const auto dir = scratch_dir("torus");
    const ExperimentConfig c = parse_config(json::parse(R"({
      "iet": {"lengths": [0.3819660112501051, 0.6180339887498949], "perm": [2, 1]},
      "f": {"a": [0, 0], "b": [1, 1]},
      "verify": {"density_samples": 100000, "flow_times": [10, 1000], "identity_cases": 30}})"));
    const int code = cmd_verify(c, dir, 2);
    const json summary = json::parse(slurp(dir / "summary.json"));
    CAPTURE(summary.dump(2));
    CHECK(code == 0);
    for (const auto& check : summary["checks"]) {
      const std::string name = check["name"];
      const std::string status = check["status"];
      if (name == "standardization") CHECK(status == "EXPECTED-FAIL");
      else if (name == "shift_insensitivity") CHECK(status == "SKIPPED");
      else CHECK(status == "PASS");
    }
    CHECK(std::filesystem::exists(dir / "density_T10.csv"));
    CHECK(std::filesystem::exists(dir / "density_T1000.csv"));
  }

  TEST_CASE("lyapunov on a golden exchange") {
    const ExperimentConfig c = parse_config(json::parse(R"({
      "iet": {"lengths": [0.3819660112501051, 0.6180339887498949], "perm": [2, 1]},
      "lyapunov": {"blocks": 10000, "runs": 2}})"));
    const LyapunovResult r = run_lyapunov(c, 2);
    CHECK(r.pass);
    CHECK(r.theta_hat[0] == Approx(1.0).epsilon(0.02));
    CHECK(r.theta_hat[1] == Approx(-1.0).epsilon(0.02));
    for (const auto& run : r.runs) CHECK(std::is_sorted(run.rbegin(), run.rend()));
  }
}
