#pragma once

#include <string>
#include <vector>

#include "metabayes/metarl/policy.hpp"
#include "metabayes/nncore/optimizer.hpp"
#include "metabayes/oracles/bandit_oracle.hpp"

namespace metabayes {

struct BanditConfig {
  int arms = 2;
  int horizon = 10;
  BanditPrior<double> prior{{1.0, 1.0}};
  int hidden_size = 32;
  int batch_episodes = 128;
  int updates = 4000;
  int eval_interval = 100;
  int curve_episodes = 2048;  // fresh episodes behind each curve row
  LossCoefficients coefficients;
  OptimizerSettings optimizer;
  void validate() const;
};

struct RlCurveRow {
  int batch = 0;
  double mean_return = 0.0;
  double oracle_value = 0.0;
  double frac_optimal = 0.0;
};

struct RlTrainingCurve {
  std::vector<RlCurveRow> rows;
  std::vector<std::string> warnings;
};

struct PolicyReport {
  double mean_return = 0.0;
  double sem = 0.0;
  std::size_t episodes = 0;
  double oracle_value = 0.0;
  double frac_optimal = 0.0;
  /// Share of non-tie belief states where the sampled action equals the
  /// oracle's, overall and per step.
  double agreement = 0.0;
  std::vector<double> agreement_per_step;
  double p_repeat_after_reward = 0.0;
  double p_repeat_after_no_reward = 0.0;
};

/// Fresh tasks from the table's prior, the policy acting on its own history.
PolicyReport evaluate_policy(const PolicyModel& policy, const OptimalPolicyTable<double>& oracle,
                             std::size_t episodes, SeededRng& rng);

struct BanditState {
  MetaParams params;
  OptimizerState optimizer;
  SeededRng::State rng;
  int update = 0;
  RlTrainingCurve curve;
};

/// Streams derived from the root seed: 1 initialization, 3 tasks and actions,
/// 4 curve evaluations (one sub-stream per row).
class BanditTrainer {
 public:
  BanditTrainer(BanditConfig config, std::uint64_t seed);

  void train_until(int update);
  void train() { train_until(config_.updates); }
  bool finished() const { return update_ >= config_.updates; }

  int update() const { return update_; }
  const BanditConfig& config() const { return config_; }
  const PolicyModel& policy() const { return policy_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const RlTrainingCurve& curve() const { return curve_; }
  const OptimalPolicyTable<double>& oracle() const { return oracle_; }

  BanditState state() const;
  void restore(const BanditState& state);

 private:
  void update_once();
  void record_row();

  BanditConfig config_;
  std::uint64_t seed_;
  OptimalPolicyTable<double> oracle_;
  PolicyModel policy_;
  OptimizerState optimizer_;
  SeededRng rng_;
  int update_ = 0;
  RlTrainingCurve curve_;
};

}  // namespace metabayes
