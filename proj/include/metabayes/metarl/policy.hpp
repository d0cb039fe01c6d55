#pragma once

#include <vector>

#include "metabayes/nncore/layers.hpp"
#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/nncore/tape.hpp"
#include "metabayes/tasks/bandit.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// Recurrent bandit policy. Input at step t (K + 2 values): one-hot previous
/// action, previous reward, t / H. Heads: K action logits and a scalar
/// baseline.
struct PolicyModel {
  MetaParams params;
  int arms = 0;
  int hidden_size = 0;
  int horizon = 0;
  DenseLayer encoder;
  GruCell cell;
  std::size_t initial_state = 0;
  DenseLayer policy_head;
  DenseLayer value_head;
};

PolicyModel policy_model_layout(int arms, int horizon, int hidden_size);
PolicyModel make_policy_model(int arms, int horizon, int hidden_size, SeededRng& rng);

/// Column j is episode j; row t is step t + 1.
struct EpisodeBatch {
  Eigen::MatrixXi actions;
  Matrix rewards;
  Matrix log_probs;  // log pi(a_t) at sampling time
  Matrix baselines;  // value head at sampling time
  Matrix entropies;  // policy entropy at each step

  int horizon() const { return static_cast<int>(rewards.rows()); }
  Eigen::Index size() const { return rewards.cols(); }
  Vector returns() const { return rewards.colwise().sum().transpose(); }
  /// G_t = sum_{t' >= t} r_t', undiscounted.
  Matrix rewards_to_go() const;
};

/// Single-episode view.
struct EpisodeRecord {
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<double> baselines;
  double total_return = 0.0;
};

EpisodeRecord episode(const EpisodeBatch& batch, Eigen::Index j);

/// Graph handles of a batched rollout: per step, K x N log-probabilities and a
/// 1 x N baseline.
struct PolicyTrace {
  std::vector<Var> log_policy;
  std::vector<Var> values;
};

/// Samples actions and Bernoulli rewards for every task in lock step. Random
/// draws are taken per step, per episode in column order: one uniform for the
/// action, one for the reward.
PolicyTrace rollout_batch(Tape& tape, const PolicyModel& policy, const MetaParams& params,
                          const std::vector<BanditTask>& tasks, SeededRng& rng, EpisodeBatch& out);

/// Re-runs the network on recorded actions and rewards (no sampling).
PolicyTrace replay_batch(Tape& tape, const PolicyModel& policy, const MetaParams& params, const EpisodeBatch& batch);

/// Untaped rollout of a single task.
EpisodeRecord rollout(const PolicyModel& policy, const BanditTask& task, SeededRng& rng);

struct LossCoefficients {
  double value = 0.5;
  double entropy = 0.01;
};

struct ReinforceLoss {
  Var total;
  double policy_term = 0.0;  // -mean[(G_t - b_t) log pi(a_t)]
  double value_term = 0.0;   // mean[(G_t - b_t)^2], before the coefficient
  double entropy = 0.0;      // mean policy entropy per step
};

/// REINFORCE with a learned baseline and entropy bonus. Advantages use the
/// baselines recorded in `batch`, so the baseline only learns from the value term.
ReinforceLoss reinforce_loss(Tape& tape, const PolicyTrace& trace, const EpisodeBatch& batch,
                             const LossCoefficients& coefficients = {});

}  // namespace metabayes
