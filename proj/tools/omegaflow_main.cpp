#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "omegaflow/pipelines.hpp"

namespace {

constexpr const char* kDescription =
    "Balanced metrics, Bergman asymptotics, and volume-normalizing flows on "
    "model surfaces";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{kDescription};
  app.set_version_flag("--version", "0.1.0");
  app.fallthrough(true);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config_path, "Experiment config file (key = value lines)");
  app.add_option("--out", out_dir, "Output directory for traces and the manifest");
  app.add_option("--seed", seed, "Seed for randomized starts");
  app.add_option("--threads", threads, "Concurrent per-k runs within a sweep")
      ->check(CLI::Range(1, 64));

  auto* balanced = app.add_subcommand(
      "balanced", "Fixed-point iteration and balancing flow per tensor power");
  auto* bergman = app.add_subcommand(
      "bergman-asymptotics", "Error tables and fitted rates for the k-sweep");
  auto* quantization = app.add_subcommand(
      "quantization", "Compare balancing flows with the reference parabolic flow");
  auto* calabi = app.add_subcommand(
      "calabi", "Run the parabolic flow to stationarity (with optional endgame)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const omegaflow::ExperimentConfig cfg = config_path.empty()
                                                ? omegaflow::ExperimentConfig::parse("")
                                                : omegaflow::ExperimentConfig::load(config_path);
    const omegaflow::RunContext ctx{out_dir, seed, threads};
    if (balanced->parsed()) {
      omegaflow::cmd_balanced(cfg, ctx);
    } else if (bergman->parsed()) {
      omegaflow::cmd_bergman_asymptotics(cfg, ctx);
    } else if (quantization->parsed()) {
      omegaflow::cmd_quantization(cfg, ctx);
    } else if (calabi->parsed()) {
      omegaflow::cmd_calabi(cfg, ctx);
    }
    return 0;
  } catch (const omegaflow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const omegaflow::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
