#include "metabayes/metasl/evaluation.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "metabayes/errors.hpp"
#include "metabayes/oracles/conjugate.hpp"
#include "metabayes/oracles/grid.hpp"
#include "metabayes/tasks/batch.hpp"

namespace metabayes {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

OracleMoments allocate(const Matrix& observations) {
  const Eigen::Index r = observations.rows(), c = observations.cols();
  return {Matrix(r, c), Matrix(r, c), Matrix(r, c), Matrix(r, c)};
}

OracleMoments conjugate_moments(const GaussianTaskFamily& family, const Matrix& observations) {
  OracleMoments out = allocate(observations);
  std::vector<double> seq(static_cast<std::size_t>(observations.rows()));
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    for (Eigen::Index k = 0; k < observations.rows(); ++k) seq[static_cast<std::size_t>(k)] = observations(k, j);
    for (Eigen::Index t = 0; t < observations.rows(); ++t) {
      const Gaussian p = conjugate_predictive(family, std::span<const double>(seq).first(static_cast<std::size_t>(t)));
      out.mean(t, j) = p.mean;
      out.variance(t, j) = p.variance();
      out.entropy(t, j) = p.entropy();
      out.target_log_density(t, j) = p.log_density(observations(t, j));
    }
  }
  return out;
}

OracleMoments grid_moments(const TaskFamily& family, const Matrix& observations, int bins) {
  OracleMoments out = allocate(observations);
  const auto log_prior = prior_log_density(family);
  const double sd = likelihood_sd(family);
  const double var = sd * sd;

  // Prefix 0 is the same for every task.
  const GridDensity prior_grid = grid_posterior(log_prior, sd, {}, default_grid(family, {}, bins));
  const GridDensity prior_pred = grid_predictive(prior_grid, sd);
  const double prior_entropy = prior_pred.entropy();

  std::vector<double> seq(static_cast<std::size_t>(observations.rows()));
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    for (Eigen::Index k = 0; k < observations.rows(); ++k) seq[static_cast<std::size_t>(k)] = observations(k, j);
    for (Eigen::Index t = 0; t < observations.rows(); ++t) {
      const auto prefix = std::span<const double>(seq).first(static_cast<std::size_t>(t));
      const GridDensity post = t == 0 ? prior_grid : grid_posterior(log_prior, sd, prefix, default_grid(family, prefix, bins));
      out.mean(t, j) = post.mean();
      out.variance(t, j) = post.variance() + var;
      out.entropy(t, j) = t == 0 ? prior_entropy : grid_predictive(post, sd).entropy();
      out.target_log_density(t, j) = predictive_log_density(post, sd, observations(t, j));
    }
  }
  return out;
}

}  // namespace

OracleMoments oracle_moments(const TaskFamily& family, const Matrix& observations, int bins) {
  validate(family);
  if (const auto* g = std::get_if<GaussianTaskFamily>(&family)) return conjugate_moments(*g, observations);
  return grid_moments(family, observations, bins);
}

EvalSet make_eval_set(const TaskFamily& family, Eigen::Index count, SeededRng& rng, int oracle_bins) {
  if (count < 1) throw ValidationError("evaluation set needs at least one task");
  BatchSource source(family, rng);
  SequenceBatch batch = source.next_batch(count);
  rng = source.rng();
  EvalSet eval;
  eval.oracle = oracle_moments(family, batch.observations, oracle_bins);
  eval.observations = std::move(batch.observations);
  eval.latents = std::move(batch.latents);
  return eval;
}

EvalReport evaluate_predictions(const EvalSet& eval, const Matrix& mean, const Matrix& sd) {
  const Matrix& x = eval.observations;
  if (mean.rows() != x.rows() || mean.cols() != x.cols() || sd.rows() != x.rows() || sd.cols() != x.cols()) {
    throw ContractViolation("predictions do not match the evaluation set shape");
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const Eigen::ArrayXXd s = sd.array();
  const Eigen::ArrayXXd nll = kHalfLog2Pi + s.log() + (x.array() - mean.array()).square() / (2.0 * s.square());

  EvalReport r;
  r.per_prefix_nll = nll.rowwise().mean().matrix();
  r.model_nll = nll.mean();
  if (eval.oracle) {
    const OracleMoments& o = *eval.oracle;
    const Eigen::ArrayXXd kl = -o.entropy.array() + kHalfLog2Pi + s.log() +
                               (o.variance.array() + (o.mean.array() - mean.array()).square()) / (2.0 * s.square());
    r.per_prefix_kl = kl.rowwise().mean().matrix();
    r.mean_kl = r.per_prefix_kl.mean();
    r.oracle_nll = -o.target_log_density.mean();
  } else {
    r.per_prefix_kl = Vector::Constant(x.rows(), kNaN);
    r.mean_kl = kNaN;
    r.oracle_nll = kNaN;
  }
  return r;
}

EvalReport evaluate_model(const AmortizedModel& model, const EvalSet& eval) {
  const Matrix& x = eval.observations;
  // Chunked so the tape stays small for large sets.
  constexpr Eigen::Index kChunk = 1024;
  Matrix mean(x.rows(), x.cols()), sd(x.rows(), x.cols());
  for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.cols() - start);
    Predictions p = predict(model, x.middleCols(start, n).topRows(x.rows() - 1));
    mean.middleCols(start, n) = p.mean;
    sd.middleCols(start, n) = p.sd;
  }
  return evaluate_predictions(eval, mean, sd);
}

EvalReport evaluate_model(const AmortizedModel& model, const TaskFamily& family, Eigen::Index n_tasks,
                          SeededRng& rng, int oracle_bins) {
  return evaluate_model(model, make_eval_set(family, n_tasks, rng, oracle_bins));
}

}  // namespace metabayes
