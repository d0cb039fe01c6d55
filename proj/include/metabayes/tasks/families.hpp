#pragma once

#include <functional>
#include <variant>

#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// mu ~ N(prior_mean, prior_sd), x_k | mu ~ N(mu, likelihood_sd).
struct GaussianTaskFamily {
  double prior_mean = 10.0;
  double prior_sd = 3.0;
  double likelihood_sd = 2.0;
  int seq_len = 10;  // T; each sample carries T + 1 observations

  void validate() const;
};

/// mu ~ Exponential(prior_rate), x_k | mu ~ N(mu, likelihood_sd).
struct ExponentialPriorTaskFamily {
  double prior_rate = 0.1;
  double likelihood_sd = 2.0;
  int seq_len = 10;

  void validate() const;
};

using TaskFamily = std::variant<GaussianTaskFamily, ExponentialPriorTaskFamily>;

/// Latent mean plus T + 1 observations; the last one is the held-out target.
struct TaskSample {
  double latent = 0.0;
  Vector observations;
};

TaskSample sample_task(const GaussianTaskFamily& family, SeededRng& rng);
TaskSample sample_task(const ExponentialPriorTaskFamily& family, SeededRng& rng);
TaskSample sample_task(const TaskFamily& family, SeededRng& rng);

int seq_len(const TaskFamily& family);
double likelihood_sd(const TaskFamily& family);
void validate(const TaskFamily& family);

/// log p(mu) up to nothing: normalized densities, -inf outside the support.
std::function<double(double)> prior_log_density(const TaskFamily& family);

}  // namespace metabayes
