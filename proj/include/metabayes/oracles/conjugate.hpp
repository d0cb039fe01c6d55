#pragma once

#include <span>

#include "metabayes/oracles/gaussian.hpp"
#include "metabayes/tasks/families.hpp"

namespace metabayes {

/// p(mu | x_1..x_t) for the Normal-Normal model:
/// precision = 1/sd0^2 + t/sd^2, mean = (mu0/sd0^2 + sum(x)/sd^2) / precision.
Gaussian conjugate_posterior(const GaussianTaskFamily& family, std::span<const double> observations);

/// p(x_{t+1} | x_1..x_t): posterior mean, posterior variance + sd^2.
Gaussian conjugate_predictive(const GaussianTaskFamily& family, std::span<const double> observations);

}  // namespace metabayes
