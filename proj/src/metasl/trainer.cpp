#include "metabayes/metasl/trainer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "metabayes/errors.hpp"

namespace metabayes {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEvalStream = 2;
constexpr std::uint64_t kBatchStream = 3;

}  // namespace

void ComplexityConstraint::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("constraint.beta must be finite and >= 0");
  if (!std::isfinite(budget) || budget < 0.0) throw ValidationError("constraint.budget must be finite and >= 0");
  if (kind == ConstraintKind::hidden_units && beta != 0.0) {
    throw ValidationError("constraint.beta is only meaningful for the weight_budget constraint");
  }
}

void SupervisedConfig::validate() const {
  if (hidden_size < 1) throw ValidationError("model.hidden_size must be >= 1");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (steps < 0) throw ValidationError("train.steps must be >= 0");
  if (eval_interval < 1) throw ValidationError("train.eval_interval must be >= 1");
  if (eval_tasks < 1) throw ValidationError("train.eval_tasks must be >= 1");
  if (oracle_bins < 2) throw ValidationError("oracle.eval_bins must be >= 2");
  constraint.validate();
  optimizer.validate();
}

Var weight_penalty(Tape& tape, const MetaParams& params, const ComplexityConstraint& constraint) {
  std::vector<Var> norms;
  norms.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) norms.push_back(sum(square(tape.parameter(params, i))));
  return scale(hinge(add_scalar(sum(vstack(norms)), -constraint.budget)), constraint.beta);
}

namespace {

SupervisedConfig validated(SupervisedConfig config) {
  config.validate();
  return config;
}

std::pair<BatchSource, EvalSet> family_parts(const TaskFamily& family, const SupervisedConfig& config,
                                             std::uint64_t seed) {
  SeededRng eval_rng = SeededRng(seed).substream(kEvalStream);
  EvalSet eval = make_eval_set(family, config.eval_tasks, eval_rng, config.oracle_bins);
  return {BatchSource(family, SeededRng(seed).substream(kBatchStream)), std::move(eval)};
}

std::pair<BatchSource, EvalSet> dataset_parts(std::shared_ptr<const SampleDataset> dataset,
                                              const std::optional<TaskFamily>& oracle_family,
                                              const SupervisedConfig& config, std::uint64_t seed) {
  if (!dataset) throw ContractViolation("null dataset");
  if (dataset->seq_len() < 1) throw ValidationError("dataset sequences need at least two values");
  const SeededRng batch_rng = SeededRng(seed).substream(kBatchStream);
  if (oracle_family) {
    if (seq_len(*oracle_family) != dataset->seq_len()) {
      throw ValidationError("dataset T=" + std::to_string(dataset->seq_len()) +
                            " does not match the oracle family T=" + std::to_string(seq_len(*oracle_family)));
    }
    SeededRng eval_rng = SeededRng(seed).substream(kEvalStream);
    EvalSet eval = make_eval_set(*oracle_family, config.eval_tasks, eval_rng, config.oracle_bins);
    return {BatchSource(std::move(dataset), batch_rng), std::move(eval)};
  }
  const Eigen::Index held = std::min<Eigen::Index>(config.eval_tasks, dataset->count() / 10);
  EvalSet eval;
  eval.observations = dataset->sequences().bottomRows(held).transpose();
  if (held > 0) {
    dataset = std::make_shared<const SampleDataset>(dataset->sequences().topRows(dataset->count() - held),
                                                    dataset->source());
  }
  return {BatchSource(std::move(dataset), batch_rng), std::move(eval)};
}

}  // namespace

SupervisedTrainer::SupervisedTrainer(SupervisedConfig config, std::uint64_t seed,
                                     std::pair<BatchSource, EvalSet> parts)
    : config_(std::move(config)),
      model_([&] {
        SeededRng init = SeededRng(seed).substream(kInitStream);
        return make_amortized_model(config_.hidden_size, init);
      }()),
      optimizer_(OptimizerState::for_params(model_.params, config_.optimizer)),
      source_(std::move(parts.first)),
      eval_(std::move(parts.second)) {}

SupervisedTrainer::SupervisedTrainer(const TaskFamily& family, SupervisedConfig config, std::uint64_t seed)
    : SupervisedTrainer(validated(config), seed, family_parts(family, validated(config), seed)) {}

SupervisedTrainer::SupervisedTrainer(std::shared_ptr<const SampleDataset> dataset,
                                     std::optional<TaskFamily> oracle_family, SupervisedConfig config,
                                     std::uint64_t seed)
    : SupervisedTrainer(validated(config), seed,
                        dataset_parts(std::move(dataset), oracle_family, validated(config), seed)) {}

void SupervisedTrainer::record_row() {
  CurveRow row;
  row.step = step_;
  row.train_nll = interval_count_ > 0 ? interval_loss_ / interval_count_ : kNaN;
  if (eval_.size() > 0) {
    const EvalReport r = evaluate_model(model_, eval_);
    row.eval_nll = r.model_nll;
    row.oracle_nll = r.oracle_nll;
    row.mean_kl = r.mean_kl;
  } else {
    row.eval_nll = row.oracle_nll = row.mean_kl = kNaN;
  }
  if (!curve_.rows.empty()) {
    const double initial = curve_.rows.front().eval_nll;
    if (initial > 0.0 && row.eval_nll > 10.0 * initial) {
      curve_.warnings.push_back("step " + std::to_string(step_) + ": eval NLL " + std::to_string(row.eval_nll) +
                                " exceeds 10x the initial " + std::to_string(initial));
    }
  }
  curve_.rows.push_back(row);
  interval_loss_ = 0.0;
  interval_count_ = 0;
}

void SupervisedTrainer::step_once() {
  const SeededRng before = source_.rng();
  SequenceBatch batch = source_.next_batch(config_.batch_size);
  Tape tape;
  Var nll = batch_nll(tape, model_, model_.params, batch.observations, config_.final_prefix_only);
  Var loss = nll;
  if (config_.constraint.kind == ConstraintKind::weight_budget && config_.constraint.beta > 0.0) {
    loss = nll + weight_penalty(tape, model_.params, config_.constraint);
  }
  if (!std::isfinite(loss.scalar())) {
    source_.set_rng(before);
    throw NumericalError("non-finite training loss at step " + std::to_string(step_ + 1));
  }
  MetaParams grads = tape.backward(loss);
  try {
    optimizer_step(model_.params, grads, optimizer_);
  } catch (const NumericalError&) {
    source_.set_rng(before);
    throw;
  }
  ++step_;
  interval_loss_ += nll.scalar();
  ++interval_count_;
}

void SupervisedTrainer::train_until(int step) {
  if (curve_.rows.empty() && step_ == 0) record_row();
  const int target = std::min(step, config_.steps);
  while (step_ < target) {
    step_once();
    if (step_ % config_.eval_interval == 0 || step_ == config_.steps) record_row();
  }
}

SupervisedState SupervisedTrainer::state() const {
  return {model_.params, optimizer_, source_.rng().state(), step_, curve_, interval_loss_, interval_count_};
}

void SupervisedTrainer::restore(const SupervisedState& state) {
  if (!state.params.same_layout(model_.params)) throw ValidationError("checkpoint parameters do not match the model");
  if (!state.optimizer.first_moment.same_layout(model_.params) ||
      !state.optimizer.second_moment.same_layout(model_.params)) {
    throw ValidationError("checkpoint optimizer state does not match the model");
  }
  if (state.step < 0 || state.step > config_.steps) throw ValidationError("checkpoint step out of range");
  model_.params = state.params;
  optimizer_ = state.optimizer;
  source_.set_rng(SeededRng(state.batch_rng));
  step_ = state.step;
  curve_ = state.curve;
  interval_loss_ = state.interval_loss;
  interval_count_ = state.interval_count;
}

std::vector<CapacityRow> capacity_sweep(const TaskFamily& family, const std::vector<int>& hidden_sizes,
                                        const SupervisedConfig& config, std::uint64_t seed) {
  if (hidden_sizes.empty()) throw ValidationError("capacity sweep needs at least one hidden size");
  std::vector<CapacityRow> out;
  for (int h : hidden_sizes) {
    if (h < 1) throw ValidationError("hidden sizes must be >= 1");
    SupervisedConfig c = config;
    c.hidden_size = h;
    SupervisedTrainer trainer(family, c, seed);
    trainer.train();
    const CurveRow& last = trainer.curve().rows.back();
    out.push_back({h, last.eval_nll, last.mean_kl, last.oracle_nll, trainer.curve()});
  }
  return out;
}

}  // namespace metabayes
