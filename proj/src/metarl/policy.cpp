#include "metabayes/metarl/policy.hpp"

#include <cmath>
#include <string>

#include "metabayes/errors.hpp"

namespace metabayes {
namespace {

Matrix step_input(const PolicyModel& m, const EpisodeBatch& rec, int t, Eigen::Index n) {
  Matrix in = Matrix::Zero(m.arms + 2, n);
  if (t > 0) {
    for (Eigen::Index j = 0; j < n; ++j) {
      in(rec.actions(t - 1, j), j) = 1.0;
      in(m.arms, j) = rec.rewards(t - 1, j);
    }
  }
  in.row(m.arms + 1).setConstant(static_cast<double>(t) / m.horizon);
  return in;
}

// Sampling when `tasks` is set, otherwise teacher forcing on `rec`.
PolicyTrace run_policy(Tape& tape, const PolicyModel& m, const MetaParams& params, Eigen::Index n,
                       const std::vector<BanditTask>* tasks, SeededRng* rng, EpisodeBatch& rec) {
  if (!params.same_layout(m.params)) throw ContractViolation("parameters do not match the policy layout");
  const int horizon = m.horizon;
  const bool sampling = tasks != nullptr;
  if (sampling) {
    rec.actions.setZero(horizon, n);
    rec.rewards.setZero(horizon, n);
  }
  rec.log_probs.setZero(horizon, n);
  rec.baselines.setZero(horizon, n);
  rec.entropies.setZero(horizon, n);

  PolicyTrace trace;
  Var h = add_colwise(tape.constant(Matrix::Zero(m.hidden_size, n)), tape.parameter(params, m.initial_state));
  for (int t = 0; t < horizon; ++t) {
    Var x = dense_forward(tape, params, m.encoder, tape.constant(step_input(m, rec, t, n)));
    h = gru_step(tape, params, m.cell, x, h);
    Var logp = log_softmax(dense_forward(tape, params, m.policy_head, h));
    Var value = dense_forward(tape, params, m.value_head, h);
    const Matrix& lp = logp.value();
    if (!lp.allFinite()) throw NumericalError("non-finite policy output at step " + std::to_string(t + 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      int a = 0;
      if (sampling) {
        const double u = rng->uniform();
        double cumulative = 0.0;
        a = m.arms - 1;
        for (int k = 0; k < m.arms; ++k) {
          cumulative += std::exp(lp(k, j));
          if (u < cumulative) {
            a = k;
            break;
          }
        }
        const double p = (*tasks)[static_cast<std::size_t>(j)].success_probabilities[static_cast<std::size_t>(a)];
        rec.actions(t, j) = a;
        rec.rewards(t, j) = rng->uniform() < p ? 1.0 : 0.0;
      } else {
        a = rec.actions(t, j);
      }
      rec.log_probs(t, j) = lp(a, j);
      rec.baselines(t, j) = value.value()(0, j);
      rec.entropies(t, j) = -(lp.col(j).array().exp() * lp.col(j).array()).sum();
    }
    trace.log_policy.push_back(logp);
    trace.values.push_back(value);
  }
  return trace;
}

}  // namespace

PolicyModel policy_model_layout(int arms, int horizon, int hidden_size) {
  if (arms < 2) throw ValidationError("bandit.arms must be >= 2");
  if (horizon < 1) throw ValidationError("bandit.horizon must be >= 1");
  if (hidden_size < 1) throw ValidationError("model.hidden_size must be >= 1");
  PolicyModel m;
  m.arms = arms;
  m.horizon = horizon;
  m.hidden_size = hidden_size;
  m.encoder = add_dense(m.params, "encoder", arms + 2, hidden_size);
  m.cell = add_gru(m.params, "gru", hidden_size, hidden_size);
  m.initial_state = m.params.add("gru.initial_state", hidden_size, 1);
  m.policy_head = add_dense(m.params, "policy", hidden_size, arms);
  m.value_head = add_dense(m.params, "value", hidden_size, 1);
  return m;
}

PolicyModel make_policy_model(int arms, int horizon, int hidden_size, SeededRng& rng) {
  PolicyModel m = policy_model_layout(arms, horizon, hidden_size);
  glorot_uniform_init(m.params, rng);
  return m;
}

Matrix EpisodeBatch::rewards_to_go() const {
  Matrix g = rewards;
  for (Eigen::Index t = g.rows() - 2; t >= 0; --t) g.row(t) += g.row(t + 1);
  return g;
}

EpisodeRecord episode(const EpisodeBatch& batch, Eigen::Index j) {
  if (j < 0 || j >= batch.size()) throw ContractViolation("episode index out of range");
  EpisodeRecord r;
  for (int t = 0; t < batch.horizon(); ++t) {
    r.actions.push_back(batch.actions(t, j));
    r.rewards.push_back(batch.rewards(t, j));
    r.log_probs.push_back(batch.log_probs(t, j));
    r.baselines.push_back(batch.baselines(t, j));
    r.total_return += batch.rewards(t, j);
  }
  return r;
}

PolicyTrace rollout_batch(Tape& tape, const PolicyModel& policy, const MetaParams& params,
                          const std::vector<BanditTask>& tasks, SeededRng& rng, EpisodeBatch& out) {
  if (tasks.empty()) throw ContractViolation("rollout needs at least one task");
  for (const BanditTask& task : tasks) {
    if (task.horizon != policy.horizon || task.arms() != policy.arms) {
      throw ContractViolation("task horizon/arms do not match the policy");
    }
  }
  return run_policy(tape, policy, params, static_cast<Eigen::Index>(tasks.size()), &tasks, &rng, out);
}

PolicyTrace replay_batch(Tape& tape, const PolicyModel& policy, const MetaParams& params, const EpisodeBatch& batch) {
  if (batch.horizon() != policy.horizon || batch.actions.rows() != policy.horizon ||
      batch.actions.cols() != batch.size()) {
    throw ContractViolation("recorded batch does not match the policy horizon");
  }
  if (batch.actions.size() > 0 && (batch.actions.minCoeff() < 0 || batch.actions.maxCoeff() >= policy.arms)) {
    throw ContractViolation("recorded action out of range");
  }
  EpisodeBatch rec = batch;
  return run_policy(tape, policy, params, batch.size(), nullptr, nullptr, rec);
}

EpisodeRecord rollout(const PolicyModel& policy, const BanditTask& task, SeededRng& rng) {
  Tape tape;
  EpisodeBatch batch;
  rollout_batch(tape, policy, policy.params, {task}, rng, batch);
  return episode(batch, 0);
}

ReinforceLoss reinforce_loss(Tape& tape, const PolicyTrace& trace, const EpisodeBatch& batch,
                             const LossCoefficients& coefficients) {
  const int horizon = batch.horizon();
  const Eigen::Index n = batch.size();
  if (n == 0 || static_cast<int>(trace.log_policy.size()) != horizon ||
      static_cast<int>(trace.values.size()) != horizon) {
    throw ContractViolation("reinforce_loss: trace and batch disagree");
  }
  const Matrix returns = batch.rewards_to_go();
  const Matrix advantages = returns - batch.baselines;
  const Eigen::Index arms = trace.log_policy.front().rows();

  std::vector<Var> pg, sq, ent;
  for (int t = 0; t < horizon; ++t) {
    Matrix mask = Matrix::Zero(arms, n);
    for (Eigen::Index j = 0; j < n; ++j) mask(batch.actions(t, j), j) = 1.0;
    const Var lp = trace.log_policy[static_cast<std::size_t>(t)];
    Var chosen = colwise_sum(cwise_product(lp, tape.constant(mask)));
    pg.push_back(cwise_product(chosen, tape.constant(advantages.row(t))));
    sq.push_back(square(tape.constant(returns.row(t)) - trace.values[static_cast<std::size_t>(t)]));
    ent.push_back(scale(colwise_sum(cwise_product(exp(lp), lp)), -1.0));
  }
  Var policy_term = scale(mean(vstack(pg)), -1.0);
  Var value_term = mean(vstack(sq));
  Var entropy = mean(vstack(ent));

  ReinforceLoss out;
  out.total = policy_term + scale(value_term, coefficients.value) + scale(entropy, -coefficients.entropy);
  out.policy_term = policy_term.scalar();
  out.value_term = value_term.scalar();
  out.entropy = entropy.scalar();
  return out;
}

}  // namespace metabayes
