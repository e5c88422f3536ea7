#pragma once

#include <cstdint>
#include <filesystem>

#include "omegaflow/config.hpp"

namespace omegaflow {

struct RunContext {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
};

// The four reproduction pipelines behind the CLI subcommands.  Each writes
// CSV traces plus a manifest.json into ctx.out_dir; rows are flushed as they
// are produced.  ConfigError marks a bad experiment description (exit 2 in
// the CLI), NumericError a failed numerical contract (exit 3).

// Fixed-point iteration and balancing flow per tensor power: per-k traces,
// final density fields, iteration/flow agreement, and the agreement of two
// differently seeded starts.
void cmd_balanced(const ExperimentConfig& cfg, const RunContext& ctx);

// Sweeps the tensor power and tabulates sup errors and fitted log-log slopes
// for the Bergman density, the Berezin transform on three fixed test
// functions, and the balancing potential.
void cmd_bergman_asymptotics(const ExperimentConfig& cfg, const RunContext& ctx);

// Runs the reference parabolic flow, then the balancing flows over the
// k-list, and tabulates the sup distance of the induced volume densities at
// the configured sample times together with metric-space distances.
void cmd_quantization(const ExperimentConfig& cfg, const RunContext& ctx);

// Runs the parabolic flow to stationarity with full functional traces, and
// optionally the balanced-metric endgame over the k-list.
void cmd_calabi(const ExperimentConfig& cfg, const RunContext& ctx);

}  // namespace omegaflow
