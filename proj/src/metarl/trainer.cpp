#include "metabayes/metarl/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "metabayes/errors.hpp"

namespace metabayes {
namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kCurveStream = 4;
constexpr std::size_t kEvalChunk = 1024;

}  // namespace

void BanditConfig::validate() const {
  if (arms < 2) throw ValidationError("bandit.arms must be >= 2");
  if (horizon < 1) throw ValidationError("bandit.horizon must be >= 1");
  validate_prior(prior);
  if (prior.size() != 1 && prior.size() != static_cast<std::size_t>(arms)) {
    throw ValidationError("bandit prior must have 1 or bandit.arms entries");
  }
  if (hidden_size < 1) throw ValidationError("model.hidden_size must be >= 1");
  if (batch_episodes < 1) throw ValidationError("bandit.batch must be >= 1");
  if (updates < 0) throw ValidationError("bandit.updates must be >= 0");
  if (eval_interval < 1) throw ValidationError("train.eval_interval must be >= 1");
  if (curve_episodes < 1) throw ValidationError("bandit.curve_episodes must be >= 1");
  if (!(coefficients.value >= 0.0) || !(coefficients.entropy >= 0.0)) {
    throw ValidationError("bandit loss coefficients must be >= 0");
  }
  optimizer.validate();
}

PolicyReport evaluate_policy(const PolicyModel& policy, const OptimalPolicyTable<double>& oracle,
                             std::size_t episodes, SeededRng& rng) {
  if (episodes < 1) throw ValidationError("evaluation needs at least one episode");
  if (oracle.arms() != policy.arms || oracle.horizon() != policy.horizon) {
    throw ValidationError("oracle table does not match the policy");
  }
  const int horizon = policy.horizon;
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> agree(static_cast<std::size_t>(horizon), 0.0), counted(static_cast<std::size_t>(horizon), 0.0);
  double repeat_r = 0, seen_r = 0, repeat_n = 0, seen_n = 0;

  for (std::size_t start = 0; start < episodes; start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, episodes - start);
    std::vector<BanditTask> tasks;
    tasks.reserve(n);
    for (std::size_t j = 0; j < n; ++j) tasks.push_back(sample_bandit_task(oracle.prior(), policy.arms, horizon, rng));
    Tape tape;
    EpisodeBatch batch;
    rollout_batch(tape, policy, policy.params, tasks, rng, batch);
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
      BeliefState s = BeliefState::initial(policy.arms, horizon);
      double ret = 0.0;
      for (int t = 0; t < horizon; ++t) {
        const int a = batch.actions(t, j);
        const bool success = batch.rewards(t, j) > 0.5;
        if (!oracle.tie(s)) {
          counted[static_cast<std::size_t>(t)] += 1.0;
          if (oracle.action(s) == a) agree[static_cast<std::size_t>(t)] += 1.0;
        }
        if (t > 0) {
          const bool repeated = a == batch.actions(t - 1, j);
          if (batch.rewards(t - 1, j) > 0.5) {
            seen_r += 1;
            repeat_r += repeated;
          } else {
            seen_n += 1;
            repeat_n += repeated;
          }
        }
        s.observe(a, success);
        ret += batch.rewards(t, j);
      }
      sum += ret;
      sum_sq += ret * ret;
    }
  }

  PolicyReport r;
  const double n = static_cast<double>(episodes);
  r.episodes = episodes;
  r.mean_return = sum / n;
  r.sem = episodes > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * r.mean_return * r.mean_return) / (n - 1.0)) / n) : 0.0;
  r.oracle_value = oracle.root_value();
  r.frac_optimal = r.mean_return / r.oracle_value;
  double total_agree = 0.0, total_counted = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const auto k = static_cast<std::size_t>(t);
    r.agreement_per_step.push_back(counted[k] > 0 ? agree[k] / counted[k] : std::nan(""));
    total_agree += agree[k];
    total_counted += counted[k];
  }
  r.agreement = total_counted > 0 ? total_agree / total_counted : std::nan("");
  r.p_repeat_after_reward = seen_r > 0 ? repeat_r / seen_r : std::nan("");
  r.p_repeat_after_no_reward = seen_n > 0 ? repeat_n / seen_n : std::nan("");
  return r;
}

BanditTrainer::BanditTrainer(BanditConfig config, std::uint64_t seed)
    : config_((config.validate(), std::move(config))),
      seed_(seed),
      oracle_(bayes_optimal_bandit(config_.prior, config_.arms, config_.horizon)),
      policy_([&] {
        SeededRng init = SeededRng(seed).substream(kInitStream);
        return make_policy_model(config_.arms, config_.horizon, config_.hidden_size, init);
      }()),
      optimizer_(OptimizerState::for_params(policy_.params, config_.optimizer)),
      rng_(SeededRng(seed).substream(kTrainStream)) {}

void BanditTrainer::record_row() {
  SeededRng rng = SeededRng(seed_).substream(kCurveStream).substream(static_cast<std::uint64_t>(update_));
  const PolicyReport r = evaluate_policy(policy_, oracle_, static_cast<std::size_t>(config_.curve_episodes), rng);
  curve_.rows.push_back({update_, r.mean_return, r.oracle_value, r.frac_optimal});
}

void BanditTrainer::update_once() {
  const SeededRng before = rng_;
  std::vector<BanditTask> tasks;
  tasks.reserve(static_cast<std::size_t>(config_.batch_episodes));
  for (int j = 0; j < config_.batch_episodes; ++j) {
    tasks.push_back(sample_bandit_task(oracle_.prior(), config_.arms, config_.horizon, rng_));
  }
  Tape tape;
  EpisodeBatch batch;
  try {
    PolicyTrace trace = rollout_batch(tape, policy_, policy_.params, tasks, rng_, batch);
    ReinforceLoss loss = reinforce_loss(tape, trace, batch, config_.coefficients);
    if (!std::isfinite(loss.total.scalar())) {
      throw NumericalError("non-finite policy loss at update " + std::to_string(update_ + 1));
    }
    MetaParams grads = tape.backward(loss.total);
    optimizer_step(policy_.params, grads, optimizer_);
  } catch (const NumericalError&) {
    rng_ = before;
    throw;
  }
  ++update_;
}

void BanditTrainer::train_until(int update) {
  if (curve_.rows.empty() && update_ == 0) record_row();
  const int target = std::min(update, config_.updates);
  while (update_ < target) {
    update_once();
    if (update_ % config_.eval_interval == 0 || update_ == config_.updates) record_row();
  }
}

BanditState BanditTrainer::state() const { return {policy_.params, optimizer_, rng_.state(), update_, curve_}; }

void BanditTrainer::restore(const BanditState& state) {
  if (!state.params.same_layout(policy_.params)) throw ValidationError("checkpoint parameters do not match the policy");
  if (!state.optimizer.first_moment.same_layout(policy_.params) ||
      !state.optimizer.second_moment.same_layout(policy_.params)) {
    throw ValidationError("checkpoint optimizer state does not match the policy");
  }
  if (state.update < 0 || state.update > config_.updates) throw ValidationError("checkpoint update out of range");
  policy_.params = state.params;
  optimizer_ = state.optimizer;
  rng_ = SeededRng(state.rng);
  update_ = state.update;
  curve_ = state.curve;
}

}  // namespace metabayes
