#include "metabayes/oracles/bandit_oracle.hpp"

#include <cmath>

namespace metabayes {

RolloutEstimate simulate_belief_agent(const BanditPrior<double>& prior, int arms, int horizon,
                                      const BeliefAgent& agent, std::size_t episodes, SeededRng& rng) {
  if (episodes < 2) throw ValidationError("need at least 2 episodes");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const BanditTask task = sample_bandit_task(prior, arms, horizon, rng);
    BeliefState belief = BeliefState::initial(arms, horizon);
    double ret = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const int a = agent(belief, rng);
      if (a < 0 || a >= arms) throw ContractViolation("agent chose an invalid arm");
      const bool success = rng.bernoulli(task.success_probabilities[static_cast<std::size_t>(a)]);
      ret += success ? 1.0 : 0.0;
      belief.observe(a, success);
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const auto n = static_cast<double>(episodes);
  RolloutEstimate est;
  est.episodes = episodes;
  est.mean = sum / n;
  est.sem = std::sqrt(std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) / n);
  return est;
}

RolloutEstimate simulate_table_policy(const OptimalPolicyTable<double>& table, std::size_t episodes, SeededRng& rng) {
  return simulate_belief_agent(table.prior(), table.arms(), table.horizon(), belief_agents::table(table), episodes,
                               rng);
}

namespace belief_agents {

BeliefAgent uniform(int arms) {
  return [arms](const BeliefState&, SeededRng& rng) {
    return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(arms)));
  };
}

BeliefAgent greedy(const BanditPrior<double>& prior, int arms) {
  BanditPrior<double> full = prior.size() == 1 ? BanditPrior<double>(static_cast<std::size_t>(arms), prior.front())
                                               : prior;
  return [full](const BeliefState& s, SeededRng&) {
    int best = 0;
    double best_mean = -1.0;
    for (std::size_t a = 0; a < full.size(); ++a) {
      const double m = (full[a].alpha + s.successes[a]) / (full[a].alpha + full[a].beta + s.successes[a] + s.failures[a]);
      if (m > best_mean) {
        best_mean = m;
        best = static_cast<int>(a);
      }
    }
    return best;
  };
}

BeliefAgent table(const OptimalPolicyTable<double>& table) {
  return [&table](const BeliefState& s, SeededRng&) { return table.action(s); };
}

}  // namespace belief_agents

}  // namespace metabayes
