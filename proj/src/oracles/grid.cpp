#include "metabayes/oracles/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "metabayes/oracles/conjugate.hpp"

namespace metabayes {

void GridSpec::validate() const {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw ValidationError("grid bounds must be finite with lower < upper");
  }
  if (bins < 2) throw ValidationError("grid needs at least 2 bins");
}

GridDensity::GridDensity(double lower, double upper, Vector masses)
    : lower_(lower), upper_(upper), masses_(std::move(masses)) {
  GridSpec{lower_, upper_, static_cast<int>(masses_.size())}.validate();
  if ((masses_.array() < 0.0).any() || !masses_.allFinite()) {
    throw ValidationError("grid masses must be finite and non-negative");
  }
  if (std::abs(masses_.sum() - 1.0) > 1e-12) throw ValidationError("grid masses do not sum to 1");
}

double GridDensity::mean() const {
  double m = 0.0;
  for (int i = 0; i < bins(); ++i) m += masses_[i] * center(i);
  return m;
}

double GridDensity::variance() const {
  const double m = mean();
  double v = 0.0;
  for (int i = 0; i < bins(); ++i) {
    const double d = center(i) - m;
    v += masses_[i] * d * d;
  }
  return v;
}

double GridDensity::entropy() const {
  const double h = width();
  double e = 0.0;
  for (int i = 0; i < bins(); ++i) {
    if (masses_[i] > 0.0) e -= masses_[i] * std::log(masses_[i] / h);
  }
  return e;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Normalizes log-weights in place into masses.
Vector normalize_log_weights(const Vector& log_w) {
  const double mx = log_w.maxCoeff();
  if (!std::isfinite(mx)) throw NumericalError("grid holds no probability mass");
  Vector w = (log_w.array() - mx).exp();
  return w / w.sum();
}

void check_edges(const Vector& masses, double tolerance, bool check_lower, bool check_upper, const char* what) {
  const double lo = masses[0];
  const double hi = masses[masses.size() - 1];
  if ((check_lower && lo > tolerance) || (check_upper && hi > tolerance)) {
    throw GridTooSmallError(std::string(what) + " grid too small: boundary mass " +
                            std::to_string(std::max(check_lower ? lo : 0.0, check_upper ? hi : 0.0)) + " exceeds " +
                            std::to_string(tolerance));
  }
}

}  // namespace

GridDensity grid_posterior(const std::function<double(double)>& prior_log_density, double likelihood_sd,
                           std::span<const double> observations, const GridSpec& spec, double boundary_tolerance) {
  spec.validate();
  if (!(likelihood_sd > 0.0)) throw ValidationError("likelihood sd must be positive");
  const double h = (spec.upper - spec.lower) / spec.bins;
  const double log_norm = -std::log(likelihood_sd) - 0.5 * std::log(2.0 * std::numbers::pi);

  Vector log_w(spec.bins);
  for (int i = 0; i < spec.bins; ++i) {
    const double mu = spec.lower + (i + 0.5) * h;
    double lw = prior_log_density(mu);
    if (std::isnan(lw) || lw == kInf) {
      throw NumericalError("prior log density not finite at mu = " + std::to_string(mu));
    }
    for (double x : observations) {
      const double z = (x - mu) / likelihood_sd;
      lw += log_norm - 0.5 * z * z;
    }
    if (std::isnan(lw)) throw NumericalError("log posterior is NaN at mu = " + std::to_string(mu));
    log_w[i] = lw;
  }
  Vector masses = normalize_log_weights(log_w);
  // An edge that coincides with the end of the prior's support is not a coverage failure.
  const bool lower_open = std::isfinite(prior_log_density(spec.lower - 0.5 * h));
  const bool upper_open = std::isfinite(prior_log_density(spec.upper + 0.5 * h));
  check_edges(masses, boundary_tolerance, lower_open, upper_open, "posterior");
  return GridDensity(spec.lower, spec.upper, std::move(masses));
}

GridDensity grid_predictive(const GridDensity& posterior, double likelihood_sd, double boundary_tolerance) {
  if (!(likelihood_sd > 0.0)) throw ValidationError("likelihood sd must be positive");
  const double h = posterior.width();
  const double mean = posterior.mean();
  const double sd = std::sqrt(posterior.variance() + likelihood_sd * likelihood_sd);
  const auto offset = static_cast<long>(std::floor((mean - 10.0 * sd - posterior.lower()) / h));
  const double x_lower = posterior.lower() + static_cast<double>(offset) * h;
  const auto n_x = static_cast<long>(std::ceil((mean + 10.0 * sd - x_lower) / h));
  const long n_mu = posterior.bins();

  // kernel[d + n_mu - 1] = mass of N(mu_i, sd) in x-bin i + d.
  std::vector<double> kernel(static_cast<std::size_t>(n_mu + n_x - 1));
  const double reach = 40.0 * likelihood_sd / h;
  for (long d = -(n_mu - 1); d < n_x; ++d) {
    const double lo = (static_cast<double>(offset + d) - 0.5);
    kernel[static_cast<std::size_t>(d + n_mu - 1)] =
        std::abs(lo) > reach + 1.0 ? 0.0 : normal_interval_mass(lo * h / likelihood_sd, (lo + 1.0) * h / likelihood_sd);
  }
  const long d_min = std::max(-(n_mu - 1), static_cast<long>(std::floor(-reach)) - offset - 1);
  const long d_max = std::min(n_x - 1, static_cast<long>(std::ceil(reach)) - offset + 1);

  Vector masses = Vector::Zero(n_x);
  const Vector& w = posterior.masses();
  for (long i = 0; i < n_mu; ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    const long j_lo = std::max(0L, i + d_min);
    const long j_hi = std::min(n_x - 1, i + d_max);
    const double* k = kernel.data() + (n_mu - 1 - i);
    for (long j = j_lo; j <= j_hi; ++j) masses[j] += wi * k[j];
  }
  masses /= masses.sum();
  check_edges(masses, boundary_tolerance, true, true, "predictive");
  return GridDensity(x_lower, x_lower + static_cast<double>(n_x) * h, std::move(masses));
}

GridDensity grid_predictive(const std::function<double(double)>& prior_log_density, double likelihood_sd,
                            std::span<const double> observations, const GridSpec& spec, double boundary_tolerance) {
  return grid_predictive(grid_posterior(prior_log_density, likelihood_sd, observations, spec, boundary_tolerance),
                         likelihood_sd, boundary_tolerance);
}

double predictive_log_density(const GridDensity& posterior, double likelihood_sd, double x) {
  const double log_norm = -std::log(likelihood_sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  double mx = -kInf;
  Vector terms(posterior.bins());
  for (int i = 0; i < posterior.bins(); ++i) {
    const double w = posterior.masses()[i];
    const double z = (x - posterior.center(i)) / likelihood_sd;
    terms[i] = w > 0.0 ? std::log(w) + log_norm - 0.5 * z * z : -kInf;
    mx = std::max(mx, terms[i]);
  }
  if (!std::isfinite(mx)) return -kInf;
  return mx + std::log((terms.array() - mx).exp().sum());
}

GridSpec default_grid(const TaskFamily& family, std::span<const double> observations, int bins) {
  const auto t = static_cast<double>(observations.size());
  if (const auto* g = std::get_if<GaussianTaskFamily>(&family)) {
    const Gaussian post = conjugate_posterior(*g, observations);
    return GridSpec{post.mean - 10.0 * post.sd, post.mean + 10.0 * post.sd, bins};
  }
  const auto& e = std::get<ExponentialPriorTaskFamily>(family);
  double center = 1.0 / e.prior_rate;
  double spread = 1.0 / e.prior_rate;
  if (t > 0) {
    double total = 0.0;
    for (double x : observations) total += x;
    spread = e.likelihood_sd / std::sqrt(t);
    center = std::max(total / t - e.prior_rate * e.likelihood_sd * e.likelihood_sd / t, 0.0);
  }
  return GridSpec{std::max(center - 10.0 * spread, 0.0), center + 10.0 * spread, bins};
}

GridDensity discretize(const Gaussian& g, const GridDensity& like) {
  Vector masses(like.bins());
  const double h = like.width();
  for (int j = 0; j < like.bins(); ++j) {
    const double lo = like.lower() + j * h;
    masses[j] = normal_interval_mass((lo - g.mean) / g.sd, (lo + h - g.mean) / g.sd);
  }
  masses /= masses.sum();
  return GridDensity(like.lower(), like.upper(), std::move(masses));
}

namespace {

void require_same_grid(const GridDensity& p, const GridDensity& q) {
  if (p.bins() != q.bins() || p.lower() != q.lower() || p.upper() != q.upper()) {
    throw ContractViolation("densities live on different grids");
  }
}

}  // namespace

double discrete_kl(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p, q);
  double kl = 0.0;
  for (int j = 0; j < p.bins(); ++j) {
    const double pj = p.masses()[j];
    if (pj == 0.0) continue;
    const double qj = q.masses()[j];
    if (qj == 0.0) return kInf;
    kl += pj * std::log(pj / qj);
  }
  return kl;
}

double total_variation(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p, q);
  return 0.5 * (p.masses() - q.masses()).cwiseAbs().sum();
}

double kl_to_gaussian(const GridDensity& p, const Gaussian& q) {
  const double d = p.mean() - q.mean;
  return -p.entropy() + 0.5 * std::log(2.0 * std::numbers::pi * q.sd * q.sd) +
         (p.variance() + d * d) / (2.0 * q.sd * q.sd);
}

}  // namespace metabayes
