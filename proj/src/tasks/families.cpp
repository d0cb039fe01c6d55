#include "metabayes/tasks/families.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "metabayes/errors.hpp"

namespace metabayes {

void GaussianTaskFamily::validate() const {
  if (!std::isfinite(prior_mean)) throw ValidationError("family.prior_mean must be finite");
  if (!(prior_sd > 0.0) || !std::isfinite(prior_sd)) throw ValidationError("family.prior_sd must be > 0");
  if (!(likelihood_sd > 0.0) || !std::isfinite(likelihood_sd)) {
    throw ValidationError("family.likelihood_sd must be > 0");
  }
  if (seq_len < 1) throw ValidationError("family.seq_len must be >= 1");
}

void ExponentialPriorTaskFamily::validate() const {
  if (!(prior_rate > 0.0) || !std::isfinite(prior_rate)) throw ValidationError("family.prior_rate must be > 0");
  if (!(likelihood_sd > 0.0) || !std::isfinite(likelihood_sd)) {
    throw ValidationError("family.likelihood_sd must be > 0");
  }
  if (seq_len < 1) throw ValidationError("family.seq_len must be >= 1");
}

namespace {

TaskSample draw_observations(double latent, double sd, int seq_len, SeededRng& rng) {
  TaskSample s;
  s.latent = latent;
  s.observations.resize(seq_len + 1);
  for (int k = 0; k <= seq_len; ++k) s.observations[k] = rng.normal(latent, sd);
  return s;
}

}  // namespace

TaskSample sample_task(const GaussianTaskFamily& family, SeededRng& rng) {
  family.validate();
  const double mu = rng.normal(family.prior_mean, family.prior_sd);
  return draw_observations(mu, family.likelihood_sd, family.seq_len, rng);
}

TaskSample sample_task(const ExponentialPriorTaskFamily& family, SeededRng& rng) {
  family.validate();
  const double mu = rng.exponential(family.prior_rate);
  return draw_observations(mu, family.likelihood_sd, family.seq_len, rng);
}

TaskSample sample_task(const TaskFamily& family, SeededRng& rng) {
  return std::visit([&rng](const auto& f) { return sample_task(f, rng); }, family);
}

int seq_len(const TaskFamily& family) {
  return std::visit([](const auto& f) { return f.seq_len; }, family);
}

double likelihood_sd(const TaskFamily& family) {
  return std::visit([](const auto& f) { return f.likelihood_sd; }, family);
}

void validate(const TaskFamily& family) {
  std::visit([](const auto& f) { f.validate(); }, family);
}

std::function<double(double)> prior_log_density(const TaskFamily& family) {
  struct Visitor {
    std::function<double(double)> operator()(const GaussianTaskFamily& f) const {
      const double m = f.prior_mean;
      const double s = f.prior_sd;
      return [m, s](double mu) {
        const double z = (mu - m) / s;
        return -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
      };
    }
    std::function<double(double)> operator()(const ExponentialPriorTaskFamily& f) const {
      const double rate = f.prior_rate;
      return [rate](double mu) {
        return mu < 0.0 ? -std::numeric_limits<double>::infinity() : std::log(rate) - rate * mu;
      };
    }
  };
  return std::visit(Visitor{}, family);
}

}  // namespace metabayes
