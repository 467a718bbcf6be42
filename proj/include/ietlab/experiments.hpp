#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ietlab/error.hpp"
#include "ietlab/iet.hpp"
#include "ietlab/io.hpp"
#include "ietlab/suspension.hpp"

namespace ietlab {

/// Exponential spacings on the given one-based perm (default d..1).
Iet random_iet(std::size_t d, std::uint64_t seed, std::span<const int> perm_one_based = {});

/// Slopes and intercepts uniform on (-1, 1), then centered.
PiecewiseFunction random_zero_mean_function(const Iet& t, std::uint64_t seed);

enum class FunctionKind { Explicit, RandomZeroMean, SecondDirection };

struct ExperimentConfig {
  // IET: explicit lengths + perm, or random of size d
  bool random_iet = false;
  std::size_t d = 4;
  std::vector<double> lengths;
  std::vector<int> perm;  // one-based; empty means d..1 for random IETs
  std::optional<std::uint64_t> iet_seed;

  FunctionKind function = FunctionKind::RandomZeroMean;
  std::vector<double> a;
  std::vector<double> b;

  // optional explicit suspension data; canonical when absent
  std::vector<double> heights;
  std::vector<double> tau;

  std::vector<std::uint64_t> n_schedule;
  std::size_t samples = 100'000;
  std::uint64_t seed = 1;
  std::string output;

  // limit
  std::uint64_t blocks = 2000;

  // verify
  std::size_t grid_nx = 4;
  std::size_t grid_ny = 4;
  std::vector<double> flow_times{1e2, 1e4};
  std::size_t density_samples = 1'000'000;
  DensityEstimator estimator = DensityEstimator::ArcAverage;
  std::uint64_t shift_n = 100'000;
  std::size_t shift_samples = 10'000;
  std::size_t identity_cases = 100;

  // lyapunov
  std::uint64_t lyapunov_blocks = 50'000;
  std::size_t runs = 2;
};

/// Throws ConfigError with a message naming the offending field.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The IET and suspension a config describes.
Iet build_iet(const ExperimentConfig& c);
Suspension build_suspension(const ExperimentConfig& c, const Iet& t);

struct LimitRow {
  std::uint64_t n = 0;
  double mean = 0.0;
  double var = 0.0;
  double d_kr = 0.0;
  double d_lp = 0.0;
  /// Slope of log var against log n over this and earlier rows; NaN on the first.
  double var_slope = 0.0;
};

struct LimitResult {
  std::vector<LimitRow> rows;
  bool pass = false;
  json summary;
};

/// Laws of standardized S_n f against those of the second-direction cocycle.
/// Throws DegenerateObservable, NoSecondExponent, DegenerateVariance.
LimitResult run_limit(const ExperimentConfig& c, unsigned threads);

struct CheckResult {
  std::string name;
  std::string status;  // PASS, FAIL, EXPECTED-FAIL, SKIPPED
  json detail;
};

struct VerifyResult {
  std::vector<CheckResult> checks;
  std::vector<DensityGrid> densities;  // one per flow time
  bool pass = false;
  json summary;
};

VerifyResult run_verify(const ExperimentConfig& c, unsigned threads);

struct LyapunovResult {
  std::vector<std::vector<double>> runs;
  std::vector<double> theta_hat;  // mean over runs
  double gap = 0.0;
  double agreement = 0.0;         // spread of theta_2 across runs
  bool pass = false;
  json summary;
};

LyapunovResult run_lyapunov(const ExperimentConfig& c, unsigned threads);

/// 0 pass, 1 fail, 2 degenerate input, 3 config error.
int exit_code_for(Errc code) noexcept;

/// Subcommand drivers: run, write outputs into `out`, return the exit code.
int cmd_limit(const ExperimentConfig& c, const std::filesystem::path& out, unsigned threads);
int cmd_verify(const ExperimentConfig& c, const std::filesystem::path& out, unsigned threads);
int cmd_lyapunov(const ExperimentConfig& c, const std::filesystem::path& out, unsigned threads);

/// Writes report.csv rows with fixed formatting.
void write_limit_csv(std::ostream& os, const std::vector<LimitRow>& rows);

std::string version_string();

}  // namespace ietlab
