#pragma once

#include <functional>
#include <span>

#include "metabayes/errors.hpp"
#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/oracles/gaussian.hpp"
#include "metabayes/tasks/families.hpp"

namespace metabayes {

class GridTooSmallError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct GridSpec {
  double lower = 0.0;
  double upper = 1.0;
  int bins = 4096;

  void validate() const;
};

/// Piecewise-constant density: probability mass per equal-width bin.
class GridDensity {
 public:
  GridDensity(double lower, double upper, Vector masses);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int bins() const { return static_cast<int>(masses_.size()); }
  double width() const { return (upper_ - lower_) / bins(); }
  double center(int i) const { return lower_ + (i + 0.5) * width(); }
  const Vector& masses() const { return masses_; }

  double mean() const;
  double variance() const;
  /// -sum P_j log(P_j / width): quadrature estimate of the differential entropy.
  double entropy() const;

 private:
  double lower_;
  double upper_;
  Vector masses_;
};

/// Discretized posterior over mu on the grid centers:
/// normalized exp(log prior + sum_k log N(x_k; mu, sd)).
/// Throws GridTooSmallError when either edge bin holds more than
/// `boundary_tolerance` mass, NumericalError on NaN or +inf log densities.
GridDensity grid_posterior(const std::function<double(double)>& prior_log_density, double likelihood_sd,
                           std::span<const double> observations, const GridSpec& spec,
                           double boundary_tolerance = 1e-6);

/// Predictive over x_{t+1}: every posterior point mass mixed with N(mu_i, sd)
/// and integrated over the bins of an x-grid that shares the posterior bin
/// width and spans the predictive mean +- 10 predictive sd.
GridDensity grid_predictive(const GridDensity& posterior, double likelihood_sd, double boundary_tolerance = 1e-6);

GridDensity grid_predictive(const std::function<double(double)>& prior_log_density, double likelihood_sd,
                            std::span<const double> observations, const GridSpec& spec,
                            double boundary_tolerance = 1e-6);

/// log p(x | x_1..x_t) = log sum_i P_i N(x; mu_i, sd).
double predictive_log_density(const GridDensity& posterior, double likelihood_sd, double x);

/// mu-grid spanning +-10 sd around a Gaussian approximation of the posterior:
/// the conjugate posterior for Gaussian priors; for the exponential prior the
/// prior itself when t = 0, otherwise the untruncated likelihood-times-tilt
/// Gaussian N(mean(x) - rate sd^2 / t, sd^2 / t) clamped to the support.
GridSpec default_grid(const TaskFamily& family, std::span<const double> observations, int bins = 4096);

/// Mass of `g` inside each bin of `like`'s grid.
GridDensity discretize(const Gaussian& g, const GridDensity& like);

/// sum_j p_j log(p_j / q_j). Grids must coincide.
double discrete_kl(const GridDensity& p, const GridDensity& q);
double total_variation(const GridDensity& p, const GridDensity& q);

/// Quadrature KL(P || N(m, s)) = -h(P) + 0.5 log(2 pi s^2) + (Var P + (E P - m)^2) / (2 s^2).
double kl_to_gaussian(const GridDensity& p, const Gaussian& q);

}  // namespace metabayes
