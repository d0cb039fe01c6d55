#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>

#include <json.hpp>

#include "metabayes/harness/checkpoint.hpp"
#include "metabayes/harness/config.hpp"

namespace metabayes {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2, exit_acceptance = 3 };

struct RunOptions {
  /// Continue from <out>/checkpoint.json when it exists.
  bool resume = false;
  /// Training kinds return exit_acceptance when a threshold is missed. The
  /// check kinds (oracle, dominance, gradient) always do.
  bool strict = false;
  std::ostream* log = nullptr;
};

struct RunResult {
  int exit_code = exit_ok;
  nlohmann::json summary;
};

/// Dispatches on config.kind and writes into config.output_directory():
///   config.txt, summary.json, and per kind
///   supervised, supervised_dataset: metrics.csv, checkpoint.json
///   bandit: metrics.csv, checkpoint.json
///   capacity_sweep: capacity.csv, h<size>/metrics.csv, h<size>/checkpoint.json
///   oracle_check: oracle_check.csv
///   dominance_test: dominance.csv
///   gradient_check: gradient_check.csv
/// Metrics and checkpoints are rewritten after every eval interval. Errors are
/// caught and reported through the exit code and summary.json ("partial": true).
/// The directory is locked for the duration of the run.
RunResult run_experiment(const RunConfig& config, const RunOptions& options = {});

/// Per-prefix predictive (mean, sd) of a supervised checkpoint and of the
/// exact oracle on `sequence` (t <= T observations, giving t + 1 entries each).
nlohmann::json export_predictive_trace(const Checkpoint& checkpoint, std::span<const double> sequence,
                                       std::optional<double> latent = std::nullopt, int oracle_bins = 4096);

/// Scores a checkpoint on fresh tasks: a supervised model on `count` tasks
/// from its family, a policy on `count` episodes.
nlohmann::json evaluate_checkpoint(const Checkpoint& checkpoint, int count, std::uint64_t seed);

/// Rebuilds the trained networks stored in a checkpoint.
AmortizedModel checkpoint_model(const Checkpoint& checkpoint);
PolicyModel checkpoint_policy(const Checkpoint& checkpoint);

}  // namespace metabayes
