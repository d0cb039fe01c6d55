#include "metabayes/tasks/bandit.hpp"

#include <cmath>
#include <string>

#include "metabayes/errors.hpp"

namespace metabayes {

void BanditTask::validate() const {
  if (success_probabilities.empty()) throw ValidationError("bandit task needs at least one arm");
  for (double p : success_probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("arm probability outside [0, 1]");
  }
  if (horizon < 1) throw ValidationError("bandit horizon must be >= 1");
}

void validate_prior(const BanditPrior<double>& prior) {
  if (prior.empty()) throw ValidationError("bandit prior is empty");
  for (const auto& arm : prior) {
    if (!(arm.alpha > 0.0) || !(arm.beta > 0.0) || !std::isfinite(arm.alpha) || !std::isfinite(arm.beta)) {
      throw ValidationError("Beta prior parameters must be positive and finite");
    }
  }
}

BanditTask sample_bandit_task(const BanditPrior<double>& prior, int arms, int horizon, SeededRng& rng) {
  validate_prior(prior);
  if (arms < 1) throw ValidationError("bandit needs at least one arm");
  if (prior.size() != 1 && prior.size() != static_cast<std::size_t>(arms)) {
    throw ValidationError("bandit prior has " + std::to_string(prior.size()) + " arms, expected 1 or " +
                          std::to_string(arms));
  }
  BanditTask task;
  task.horizon = horizon;
  task.success_probabilities.reserve(static_cast<std::size_t>(arms));
  for (int a = 0; a < arms; ++a) {
    const auto& arm = prior.size() == 1 ? prior.front() : prior[static_cast<std::size_t>(a)];
    task.success_probabilities.push_back(rng.beta(arm.alpha, arm.beta));
  }
  task.validate();
  return task;
}

}  // namespace metabayes
