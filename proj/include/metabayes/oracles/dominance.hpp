#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/oracles/gaussian.hpp"
#include "metabayes/tasks/families.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// Any predictive rule mapping an observed prefix to a distribution over the
/// next observation.
using ReferenceRule = std::function<Gaussian(std::span<const double> prefix)>;

namespace reference_rules {
ReferenceRule posterior_predictive(const GaussianTaskFamily& family);
ReferenceRule prior_predictive(const GaussianTaskFamily& family);
ReferenceRule constant(Gaussian g);
/// Posterior predictive with its sd multiplied by `factor`.
ReferenceRule scaled(const GaussianTaskFamily& family, double factor);
/// Posterior predictive with its mean moved by `shift`.
ReferenceRule shifted(const GaussianTaskFamily& family, double shift);
}  // namespace reference_rules

struct DominanceReport {
  std::size_t samples = 0;
  int prefix_length = 0;
  /// Mean of log p(x_{t+1} | x_1..x_t) - log r(x_{t+1} | x_1..x_t) over sampled
  /// (mu, x_1..x_{t+1}), with its standard error and 95% interval.
  double delta_e = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// Mean of KL(p(.|x_1..x_t) || r(.|x_1..x_t)) over the same prefixes.
  double expected_kl = 0.0;
  /// Mean over the same prefixes of the log-ratio integrated against the
  /// posterior predictive, computed from cross-entropies rather than the KL formula.
  double conditional_log_ratio = 0.0;
  /// |expected_kl - conditional_log_ratio|.
  double estimator_gap = 0.0;
};

/// Monte-Carlo check that the posterior predictive beats `reference` in
/// expected log-likelihood of the next observation. Throws ValidationError if
/// the reference emits an invalid distribution.
DominanceReport dominance_test(const GaussianTaskFamily& family, const ReferenceRule& reference, int prefix_length,
                               std::size_t n_mc, SeededRng& rng);

/// Fully discrete model: finite latent values with prior masses, and a
/// likelihood table over a finite alphabet (rows: latents, cols: symbols).
struct DiscreteModel {
  Vector prior;
  Matrix likelihood;
};

struct DiscreteDominance {
  /// sum_mu sum_{x_1..x_{t+1}} log(p/r) p(x_{t+1}|mu) p(x_1..x_t|mu) p(mu)
  double expected_log_ratio = 0.0;
  /// sum_{x_1..x_t} KL(p(.|x_1..x_t) || r(.|x_1..x_t)) p(x_1..x_t)
  double expected_kl = 0.0;
};

/// Posterior predictive of the discrete model after observing `prefix`.
Vector discrete_predictive(const DiscreteModel& model, std::span<const int> prefix);

/// Exact enumeration of both sides of the dominance identity.
DiscreteDominance discrete_dominance(const DiscreteModel& model, int prefix_length,
                                     const std::function<Vector(std::span<const int>)>& reference);

}  // namespace metabayes
