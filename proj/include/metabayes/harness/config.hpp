#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metabayes/metarl/trainer.hpp"
#include "metabayes/metasl/trainer.hpp"
#include "metabayes/tasks/families.hpp"

namespace metabayes {

enum class ExperimentKind {
  supervised,
  supervised_dataset,
  bandit,
  capacity_sweep,
  oracle_check,
  dominance_test,
  gradient_check
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

enum class FamilyKind { gaussian, exponential };

struct FamilySettings {
  FamilyKind kind = FamilyKind::gaussian;
  double prior_mean = 10.0;
  double prior_sd = 3.0;
  double likelihood_sd = 2.0;
  double prior_rate = 0.1;
  int seq_len = 10;
  TaskFamily family() const;
};

struct DominanceSettings {
  int prefix_length = 3;
  int n_mc = 100000;
  std::string reference = "prior_predictive";
  double constant_mean = 0.0;
  double constant_sd = 1.0;
  double scale = 1.5;
  double shift = 1.0;
};

/// Model sizes for the gradient_check experiment.
struct GradcheckSettings {
  int hidden_size = 8;
  int seq_len = 5;
  int batch = 4;
  int rl_hidden_size = 4;
  int rl_horizon = 3;
  int rl_episodes = 8;
  double floor = 1e-4;
};

struct AcceptanceSettings {
  double max_kl = 0.05;
  double max_nll_gap = 0.05;
  double min_frac_optimal = 0.95;
  double monotone_tolerance = 0.02;
  double min_capacity_gap = 0.05;
  double oracle_kl = 1e-4;
  double gradient_tolerance = 1e-4;
};

/// Everything one experiment needs. Built from a flat `key = value` file; see
/// config_keys() for the full list.
struct RunConfig {
  ExperimentKind kind = ExperimentKind::supervised;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: runs/<kind>
  FamilySettings family;
  SupervisedConfig supervised;
  BanditConfig bandit;
  int bandit_eval_episodes = 100000;
  std::string dataset_path;
  bool dataset_oracle = false;
  std::vector<int> sweep_hidden_sizes{1, 2, 4, 8, 32};
  int oracle_instances = 100;
  int oracle_bins = 4096;
  DominanceSettings dominance;
  GradcheckSettings gradcheck;
  AcceptanceSettings accept;

  std::filesystem::path output_directory() const;
  /// `bandit` with the shared model.hidden_size and optim.* values applied.
  BanditConfig bandit_config() const;
  /// Cross-field checks; single-key range checks happen while parsing.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every accepted key with a one-line description, in canonical order.
const std::vector<ConfigKey>& config_keys();

/// Parses `key = value` lines. '#' starts a comment; blank lines are ignored.
/// Unknown keys, malformed values and out-of-range values raise ParseError
/// with the line number. `kind` is required unless `default_kind` is given.
RunConfig parse_config(const std::string& text, std::optional<ExperimentKind> default_kind = std::nullopt);

/// parse_config on a file, then `overrides` (key, value) applied in order.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides,
                      std::optional<ExperimentKind> default_kind = std::nullopt);

/// Sets one key; throws ValidationError naming the key.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Canonical key -> value text for every key except out_dir, which names a
/// location rather than the experiment.
std::map<std::string, std::string> config_echo(const RunConfig& config);

/// config_echo as `key = value` lines, readable by parse_config.
std::string format_config(const RunConfig& config);

/// Inverse of config_echo.
RunConfig config_from_echo(const std::map<std::string, std::string>& echo);

}  // namespace metabayes
