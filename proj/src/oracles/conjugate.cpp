#include "metabayes/oracles/conjugate.hpp"

#include <cmath>

namespace metabayes {

Gaussian conjugate_posterior(const GaussianTaskFamily& family, std::span<const double> observations) {
  family.validate();
  const double prior_precision = 1.0 / (family.prior_sd * family.prior_sd);
  const double noise_precision = 1.0 / (family.likelihood_sd * family.likelihood_sd);
  double total = 0.0;
  for (double x : observations) total += x;
  const double precision = prior_precision + static_cast<double>(observations.size()) * noise_precision;
  const double mean = (family.prior_mean * prior_precision + total * noise_precision) / precision;
  return Gaussian{mean, std::sqrt(1.0 / precision)};
}

Gaussian conjugate_predictive(const GaussianTaskFamily& family, std::span<const double> observations) {
  const Gaussian post = conjugate_posterior(family, observations);
  return Gaussian{post.mean, std::sqrt(post.variance() + family.likelihood_sd * family.likelihood_sd)};
}

}  // namespace metabayes
