#pragma once

#include <cmath>
#include <numbers>

namespace metabayes {

template <typename Scalar>
struct GaussianDistribution {
  Scalar mean{0};
  Scalar sd{1};

  Scalar variance() const { return sd * sd; }

  Scalar log_density(Scalar x) const {
    using std::log;
    const Scalar z = (x - mean) / sd;
    return -Scalar(0.5) * z * z - log(sd) - Scalar(0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar>);
  }

  /// Differential entropy in nats.
  Scalar entropy() const {
    using std::log;
    return Scalar(0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar> * std::numbers::e_v<Scalar> * sd * sd);
  }

  bool valid() const {
    using std::isfinite;
    return isfinite(mean) && isfinite(sd) && sd > Scalar(0);
  }
};

using Gaussian = GaussianDistribution<double>;

/// KL(p || q) in nats.
template <typename Scalar>
Scalar gaussian_kl(const GaussianDistribution<Scalar>& p, const GaussianDistribution<Scalar>& q) {
  using std::log;
  const Scalar d = p.mean - q.mean;
  return log(q.sd / p.sd) + (p.sd * p.sd + d * d) / (Scalar(2) * q.sd * q.sd) - Scalar(0.5);
}

/// -E_p[log q], the cross-entropy of q relative to p.
template <typename Scalar>
Scalar gaussian_cross_entropy(const GaussianDistribution<Scalar>& p, const GaussianDistribution<Scalar>& q) {
  using std::log;
  const Scalar d = p.mean - q.mean;
  return Scalar(0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar> * q.sd * q.sd) +
         (p.sd * p.sd + d * d) / (Scalar(2) * q.sd * q.sd);
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// P(a < Z < b) for standard normal Z, accurate in both tails.
inline double normal_interval_mass(double a, double b) {
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
  return 1.0 - normal_cdf(a) - 0.5 * std::erfc(b / std::numbers::sqrt2);
}

}  // namespace metabayes
