#pragma once

#include <vector>

#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// Beta(alpha, beta) prior over one arm's success probability.
template <typename Scalar>
struct BetaArm {
  Scalar alpha{1};
  Scalar beta{1};

  friend bool operator==(const BetaArm&, const BetaArm&) = default;
};

template <typename Scalar>
using BanditPrior = std::vector<BetaArm<Scalar>>;

/// One Bernoulli bandit problem. The bandit has a single state, so the
/// transition parameters are degenerate and not stored.
struct BanditTask {
  std::vector<double> success_probabilities;
  int horizon = 1;

  int arms() const { return static_cast<int>(success_probabilities.size()); }
  void validate() const;
};

/// Each arm drawn independently from its Beta prior. `prior` either has K
/// entries or one entry shared by all arms.
BanditTask sample_bandit_task(const BanditPrior<double>& prior, int arms, int horizon, SeededRng& rng);

void validate_prior(const BanditPrior<double>& prior);

}  // namespace metabayes
