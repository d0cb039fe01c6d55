#include "metabayes/oracles/dominance.hpp"

#include <cmath>
#include <string>

#include "metabayes/errors.hpp"
#include "metabayes/oracles/conjugate.hpp"

namespace metabayes {

namespace reference_rules {

ReferenceRule posterior_predictive(const GaussianTaskFamily& family) {
  return [family](std::span<const double> prefix) { return conjugate_predictive(family, prefix); };
}

ReferenceRule prior_predictive(const GaussianTaskFamily& family) {
  const Gaussian prior = conjugate_predictive(family, {});
  return [prior](std::span<const double>) { return prior; };
}

ReferenceRule constant(Gaussian g) {
  return [g](std::span<const double>) { return g; };
}

ReferenceRule scaled(const GaussianTaskFamily& family, double factor) {
  return [family, factor](std::span<const double> prefix) {
    Gaussian p = conjugate_predictive(family, prefix);
    p.sd *= factor;
    return p;
  };
}

ReferenceRule shifted(const GaussianTaskFamily& family, double shift) {
  return [family, shift](std::span<const double> prefix) {
    Gaussian p = conjugate_predictive(family, prefix);
    p.mean += shift;
    return p;
  };
}

}  // namespace reference_rules

DominanceReport dominance_test(const GaussianTaskFamily& family, const ReferenceRule& reference, int prefix_length,
                               std::size_t n_mc, SeededRng& rng) {
  family.validate();
  if (prefix_length < 0) throw ValidationError("prefix length must be >= 0");
  if (n_mc < 2) throw ValidationError("dominance test needs at least 2 samples");

  std::vector<double> xs(static_cast<std::size_t>(prefix_length) + 1);
  const std::span<const double> prefix(xs.data(), static_cast<std::size_t>(prefix_length));
  double sum = 0.0;
  double sum_sq = 0.0;
  double kl_sum = 0.0;
  double conditional_sum = 0.0;
  for (std::size_t n = 0; n < n_mc; ++n) {
    const double mu = rng.normal(family.prior_mean, family.prior_sd);
    for (double& x : xs) x = rng.normal(mu, family.likelihood_sd);
    const Gaussian p = conjugate_predictive(family, prefix);
    const Gaussian r = reference(prefix);
    if (!r.valid()) {
      throw ValidationError("reference rule emitted an invalid distribution (sd " + std::to_string(r.sd) + ")");
    }
    const double target = xs.back();
    const double log_ratio = p.log_density(target) - r.log_density(target);
    sum += log_ratio;
    sum_sq += log_ratio * log_ratio;
    kl_sum += gaussian_kl(p, r);
    conditional_sum += gaussian_cross_entropy(p, r) - p.entropy();
  }

  const auto n = static_cast<double>(n_mc);
  DominanceReport report;
  report.samples = n_mc;
  report.prefix_length = prefix_length;
  report.delta_e = sum / n;
  const double var = std::max(0.0, (sum_sq - n * report.delta_e * report.delta_e) / (n - 1.0));
  report.std_error = std::sqrt(var / n);
  report.ci_low = report.delta_e - 1.959963984540054 * report.std_error;
  report.ci_high = report.delta_e + 1.959963984540054 * report.std_error;
  report.expected_kl = kl_sum / n;
  report.conditional_log_ratio = conditional_sum / n;
  report.estimator_gap = std::abs(report.expected_kl - report.conditional_log_ratio);
  return report;
}

Vector discrete_predictive(const DiscreteModel& model, std::span<const int> prefix) {
  Vector post = model.prior;
  for (int x : prefix) post = post.cwiseProduct(model.likelihood.col(x));
  post /= post.sum();
  return model.likelihood.transpose() * post;
}

DiscreteDominance discrete_dominance(const DiscreteModel& model, int prefix_length,
                                     const std::function<Vector(std::span<const int>)>& reference) {
  const auto latents = model.prior.size();
  const auto symbols = static_cast<int>(model.likelihood.cols());
  if (model.likelihood.rows() != latents) throw ContractViolation("likelihood rows must match prior size");
  if (prefix_length < 0) throw ValidationError("prefix length must be >= 0");

  DiscreteDominance out;
  std::vector<int> prefix(static_cast<std::size_t>(prefix_length), 0);
  while (true) {
    const Vector p = discrete_predictive(model, prefix);
    const Vector r = reference(prefix);
    // p(x_1..x_t | mu) for every mu.
    Vector joint_given_mu = Vector::Ones(latents);
    for (int x : prefix) joint_given_mu = joint_given_mu.cwiseProduct(model.likelihood.col(x));
    const double evidence = model.prior.dot(joint_given_mu);

    double kl = 0.0;
    for (int y = 0; y < symbols; ++y) {
      if (p[y] > 0.0) kl += p[y] * std::log(p[y] / r[y]);
    }
    out.expected_kl += evidence * kl;

    for (Eigen::Index m = 0; m < latents; ++m) {
      for (int y = 0; y < symbols; ++y) {
        const double weight = model.likelihood(m, y) * joint_given_mu[m] * model.prior[m];
        if (weight > 0.0) out.expected_log_ratio += std::log(p[y] / r[y]) * weight;
      }
    }

    int k = prefix_length - 1;
    while (k >= 0 && prefix[static_cast<std::size_t>(k)] == symbols - 1) prefix[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) break;
    ++prefix[static_cast<std::size_t>(k)];
  }
  return out;
}

}  // namespace metabayes
