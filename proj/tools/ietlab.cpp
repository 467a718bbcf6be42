#include <CLI11.hpp>
#include <cstdio>

#include "ietlab/experiments.hpp"
#include "ietlab/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ietlab: interval exchange experiments"};
  app.set_version_flag("--version", ietlab::version_string());
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = ietlab::hardware_threads();

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (defaults to the config's \"output\")");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
  };
  auto* limit = app.add_subcommand("limit", "compare laws of normalized Birkhoff sums with the cocycle law");
  auto* verify = app.add_subcommand("verify", "identity, density and shift checks on the suspension");
  auto* lyapunov = app.add_subcommand("lyapunov", "Lyapunov spectrum of the Zorich cocycle");
  for (auto* sub : {limit, verify, lyapunov}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  ietlab::ExperimentConfig config;
  try {
    config = ietlab::load_config(config_path);
  } catch (const ietlab::Error& e) {
    std::fprintf(stderr, "ietlab: %s\n", e.what());
    return 3;
  }
  if (seed) config.seed = *seed;
  if (out_dir.empty()) out_dir = config.output;
  if (out_dir.empty()) {
    std::fprintf(stderr, "ietlab: no output directory (use --out or \"output\" in the config)\n");
    return 3;
  }

  if (limit->parsed()) return ietlab::cmd_limit(config, out_dir, threads);
  if (verify->parsed()) return ietlab::cmd_verify(config, out_dir, threads);
  return ietlab::cmd_lyapunov(config, out_dir, threads);
}
