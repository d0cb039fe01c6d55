#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metabayes/metasl/evaluation.hpp"
#include "metabayes/metasl/model.hpp"
#include "metabayes/nncore/optimizer.hpp"
#include "metabayes/tasks/batch.hpp"
#include "metabayes/tasks/dataset.hpp"
#include "metabayes/tasks/families.hpp"

namespace metabayes {

enum class ConstraintKind { hidden_units, weight_budget };

/// hidden_units: capacity set by the hidden size alone. weight_budget: adds
/// beta * max(0, |theta|^2 - budget) to the loss.
struct ComplexityConstraint {
  ConstraintKind kind = ConstraintKind::hidden_units;
  double beta = 0.0;
  double budget = 0.0;
  void validate() const;
};

struct SupervisedConfig {
  int hidden_size = 32;
  int batch_size = 64;
  int steps = 20000;
  int eval_interval = 500;
  int eval_tasks = 1024;
  bool final_prefix_only = false;
  int oracle_bins = 512;
  ComplexityConstraint constraint;
  OptimizerSettings optimizer;
  void validate() const;
};

struct CurveRow {
  int step = 0;
  double train_nll = 0.0;  // mean training NLL since the previous row, NaN at step 0
  double eval_nll = 0.0;
  double oracle_nll = 0.0;
  double mean_kl = 0.0;
};

struct TrainingCurve {
  std::vector<CurveRow> rows;
  std::vector<std::string> warnings;
};

/// Everything needed to continue a run bitwise.
struct SupervisedState {
  MetaParams params;
  OptimizerState optimizer;
  SeededRng::State batch_rng;
  int step = 0;
  TrainingCurve curve;
  double interval_loss = 0.0;
  int interval_count = 0;
};

/// The sample / forward / backward / update loop. Random streams are derived
/// from the root seed: 1 for initialization, 2 for the evaluation set, 3 for
/// training batches.
class SupervisedTrainer {
 public:
  SupervisedTrainer(const TaskFamily& family, SupervisedConfig config, std::uint64_t seed);
  /// Trains from recorded sequences only. With `oracle_family` the model is
  /// scored on fresh tasks from that family; without it, the last
  /// min(eval_tasks, count / 10) sequences are held out and scored without an oracle.
  SupervisedTrainer(std::shared_ptr<const SampleDataset> dataset, std::optional<TaskFamily> oracle_family,
                    SupervisedConfig config, std::uint64_t seed);

  /// Runs until `step` updates have been made (capped at config.steps).
  /// Throws NumericalError on a non-finite loss; the state stays at the last good step.
  void train_until(int step);
  void train() { train_until(config_.steps); }
  bool finished() const { return step_ >= config_.steps; }

  int step() const { return step_; }
  const SupervisedConfig& config() const { return config_; }
  const AmortizedModel& model() const { return model_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const TrainingCurve& curve() const { return curve_; }
  const EvalSet& eval_set() const { return eval_; }

  SupervisedState state() const;
  void restore(const SupervisedState& state);

 private:
  SupervisedTrainer(SupervisedConfig config, std::uint64_t seed, std::pair<BatchSource, EvalSet> parts);
  void step_once();
  void record_row();

  SupervisedConfig config_;
  AmortizedModel model_;
  OptimizerState optimizer_;
  BatchSource source_;
  EvalSet eval_;
  int step_ = 0;
  TrainingCurve curve_;
  double interval_loss_ = 0.0;
  int interval_count_ = 0;
};

/// beta * max(0, |theta|^2 - budget) on the tape.
Var weight_penalty(Tape& tape, const MetaParams& params, const ComplexityConstraint& constraint);

struct CapacityRow {
  int hidden_size = 0;
  double eval_nll = 0.0;
  double mean_kl = 0.0;
  double oracle_nll = 0.0;
  TrainingCurve curve;
};

/// One model per hidden size, same config and seed otherwise.
std::vector<CapacityRow> capacity_sweep(const TaskFamily& family, const std::vector<int>& hidden_sizes,
                                        const SupervisedConfig& config, std::uint64_t seed);

}  // namespace metabayes
