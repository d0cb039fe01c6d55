#pragma once

#include <optional>

#include "metabayes/metasl/model.hpp"
#include "metabayes/tasks/families.hpp"

namespace metabayes {

/// Oracle predictive summaries for every (prefix, task) of an evaluation set,
/// enough to score any Gaussian prediction against it.
struct OracleMoments {
  Matrix mean;      // (T + 1) x M
  Matrix variance;
  Matrix entropy;   // differential entropy of the predictive
  Matrix target_log_density;  // log p(x_{t+1} | x_1..x_t) at the held-out value
};

/// Closed form for the Gaussian family, grid quadrature with `bins` bins otherwise.
OracleMoments oracle_moments(const TaskFamily& family, const Matrix& observations, int bins = 512);

/// Frozen held-out sequences, one per column.
struct EvalSet {
  Matrix observations;
  std::optional<OracleMoments> oracle;
  std::optional<Vector> latents;

  int seq_len() const { return static_cast<int>(observations.rows()) - 1; }
  Eigen::Index size() const { return observations.cols(); }
};

EvalSet make_eval_set(const TaskFamily& family, Eigen::Index count, SeededRng& rng, int oracle_bins = 512);

struct EvalReport {
  Vector per_prefix_kl;   // KL(oracle || model), mean over tasks; NaN without an oracle
  Vector per_prefix_nll;
  double mean_kl = 0.0;
  double model_nll = 0.0;
  double oracle_nll = 0.0;
};

/// Scores arbitrary Gaussian predictions ((T + 1) x M) against the set.
EvalReport evaluate_predictions(const EvalSet& eval, const Matrix& mean, const Matrix& sd);
EvalReport evaluate_model(const AmortizedModel& model, const EvalSet& eval);
EvalReport evaluate_model(const AmortizedModel& model, const TaskFamily& family, Eigen::Index n_tasks,
                          SeededRng& rng, int oracle_bins = 512);

}  // namespace metabayes
