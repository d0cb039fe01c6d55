#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "metabayes/errors.hpp"
#include "metabayes/tasks/bandit.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// Per-arm success/failure counts observed so far. For Bernoulli arms with
/// Beta priors this is a sufficient statistic of the interaction history.
struct BeliefState {
  std::vector<int> successes;
  std::vector<int> failures;
  int steps_remaining = 0;

  static BeliefState initial(int arms, int horizon) {
    return BeliefState{std::vector<int>(static_cast<std::size_t>(arms), 0),
                       std::vector<int>(static_cast<std::size_t>(arms), 0), horizon};
  }
  int pulls() const {
    int n = 0;
    for (std::size_t a = 0; a < successes.size(); ++a) n += successes[a] + failures[a];
    return n;
  }
  void observe(int arm, bool success) {
    auto& c = success ? successes : failures;
    ++c[static_cast<std::size_t>(arm)];
    --steps_remaining;
  }
};

/// Bayes-optimal action and value for every reachable belief state, stored
/// densely. Counts are packed in base (H + 1), two digits per arm.
template <typename Scalar>
class OptimalPolicyTable {
 public:
  OptimalPolicyTable(BanditPrior<Scalar> prior, int horizon) : prior_(std::move(prior)), horizon_(horizon) {}

  int arms() const { return static_cast<int>(prior_.size()); }
  int horizon() const { return horizon_; }
  const BanditPrior<Scalar>& prior() const { return prior_; }
  std::size_t states() const { return values_.size(); }

  std::size_t index(const BeliefState& s) const {
    check(s);
    std::size_t idx = 0;
    for (int a = arms(); a-- > 0;) {
      idx = idx * base() + static_cast<std::size_t>(s.failures[a]);
      idx = idx * base() + static_cast<std::size_t>(s.successes[a]);
    }
    return idx;
  }

  Scalar value(const BeliefState& s) const { return values_[index(s)]; }
  int action(const BeliefState& s) const { return actions_[index(s)]; }
  /// True when another arm's value equals the optimum (to 1e-12 for floating point).
  bool tie(const BeliefState& s) const { return ties_[index(s)] != 0; }
  Scalar root_value() const { return values_[0]; }
  const std::vector<Scalar>& values() const { return values_; }
  const std::vector<std::int8_t>& actions() const { return actions_; }

  /// Posterior mean of arm a in state s.
  Scalar posterior_mean(const BeliefState& s, int a) const {
    const auto& arm = prior_[static_cast<std::size_t>(a)];
    return (arm.alpha + Scalar(s.successes[a])) /
           (arm.alpha + arm.beta + Scalar(s.successes[a]) + Scalar(s.failures[a]));
  }

 private:
  template <typename S>
  friend OptimalPolicyTable<S> bayes_optimal_bandit(const BanditPrior<S>&, int, int, std::size_t);

  std::size_t base() const { return static_cast<std::size_t>(horizon_) + 1; }

  void check(const BeliefState& s) const {
    if (static_cast<int>(s.successes.size()) != arms() || static_cast<int>(s.failures.size()) != arms()) {
      throw ContractViolation("belief state has the wrong number of arms");
    }
    if (s.pulls() + s.steps_remaining != horizon_ || s.steps_remaining < 0) {
      throw ContractViolation("belief state violates pulls + steps_remaining = horizon");
    }
  }

  BanditPrior<Scalar> prior_;
  int horizon_;
  std::vector<Scalar> values_;
  std::vector<std::int8_t> actions_;
  std::vector<std::uint8_t> ties_;
};

/// Backward induction over belief states:
///   V(s) = 0 when no steps remain,
///   V(s) = max_a [ p_a + p_a V(s + success_a) + (1 - p_a) V(s + failure_a) ],
/// p_a the posterior mean of arm a. Ties go to the lowest arm index.
/// `prior` has one entry per arm or a single entry shared by all arms.
template <typename Scalar>
OptimalPolicyTable<Scalar> bayes_optimal_bandit(const BanditPrior<Scalar>& prior, int arms, int horizon,
                                                std::size_t max_states = std::size_t{1} << 26) {
  if (arms < 1 || arms > 127) throw ValidationError("bandit oracle supports 1..127 arms");
  if (horizon < 1) throw ValidationError("bandit horizon must be >= 1");
  if (prior.size() != 1 && prior.size() != static_cast<std::size_t>(arms)) {
    throw ValidationError("bandit prior must have 1 or K entries");
  }
  for (const auto& arm : prior) {
    if (!(arm.alpha > Scalar(0)) || !(arm.beta > Scalar(0))) throw ValidationError("Beta parameters must be > 0");
  }
  BanditPrior<Scalar> full = prior.size() == 1 ? BanditPrior<Scalar>(static_cast<std::size_t>(arms), prior.front())
                                               : prior;
  OptimalPolicyTable<Scalar> table(std::move(full), horizon);

  const std::size_t base = static_cast<std::size_t>(horizon) + 1;
  double dense = 1.0;
  for (int k = 0; k < 2 * arms; ++k) dense *= static_cast<double>(base);
  if (dense > static_cast<double>(max_states)) {
    throw CapacityError("bandit oracle needs " + std::to_string(dense) + " states, cap is " +
                        std::to_string(max_states));
  }
  const auto n_states = static_cast<std::size_t>(dense);
  const auto digits = static_cast<std::size_t>(2 * arms);

  std::vector<std::vector<std::size_t>> by_level(base);
  for (std::size_t idx = 0; idx < n_states; ++idx) {
    std::size_t rest = idx;
    int total = 0;
    for (std::size_t k = 0; k < digits; ++k) {
      total += static_cast<int>(rest % base);
      rest /= base;
    }
    if (total <= horizon) by_level[static_cast<std::size_t>(total)].push_back(idx);
  }

  table.values_.assign(n_states, Scalar(0));
  table.actions_.assign(n_states, -1);
  table.ties_.assign(n_states, 0);
  std::vector<std::size_t> stride(digits);
  stride[0] = 1;
  for (std::size_t k = 1; k < digits; ++k) stride[k] = stride[k - 1] * base;

  for (int level = horizon - 1; level >= 0; --level) {
    for (std::size_t idx : by_level[static_cast<std::size_t>(level)]) {
      Scalar best{};
      std::vector<Scalar> q(static_cast<std::size_t>(arms));
      int best_arm = -1;
      for (int a = 0; a < arms; ++a) {
        const std::size_t s_digit = static_cast<std::size_t>(2 * a);
        const auto succ = static_cast<int>((idx / stride[s_digit]) % base);
        const auto fail = static_cast<int>((idx / stride[s_digit + 1]) % base);
        const auto& arm = table.prior_[static_cast<std::size_t>(a)];
        const Scalar p = (arm.alpha + Scalar(succ)) / (arm.alpha + arm.beta + Scalar(succ) + Scalar(fail));
        const Scalar v_succ = table.values_[idx + stride[s_digit]];
        const Scalar v_fail = table.values_[idx + stride[s_digit + 1]];
        q[static_cast<std::size_t>(a)] = p + p * v_succ + (Scalar(1) - p) * v_fail;
        if (best_arm < 0 || q[static_cast<std::size_t>(a)] > best) {
          best = q[static_cast<std::size_t>(a)];
          best_arm = a;
        }
      }
      bool tie = false;
      for (int a = 0; a < arms; ++a) {
        if (a == best_arm) continue;
        const Scalar gap = best - q[static_cast<std::size_t>(a)];
        if constexpr (std::is_floating_point_v<Scalar>) {
          tie = tie || gap <= Scalar(1e-12) * (Scalar(1) + std::abs(best));
        } else {
          tie = tie || gap == Scalar(0);
        }
      }
      table.values_[idx] = best;
      table.actions_[idx] = static_cast<std::int8_t>(best_arm);
      table.ties_[idx] = tie ? 1 : 0;
    }
  }
  return table;
}

/// Expected total reward of the Bayes-optimal policy (root value). Throws
/// ValidationError if the table was built for a different prior.
template <typename Scalar>
Scalar optimal_bandit_value(const OptimalPolicyTable<Scalar>& table, const BanditPrior<Scalar>& prior) {
  const bool shared = prior.size() == 1;
  if (!shared && prior.size() != table.prior().size()) throw ValidationError("prior does not match policy table");
  for (std::size_t a = 0; a < table.prior().size(); ++a) {
    if (!(table.prior()[a] == (shared ? prior.front() : prior[a]))) {
      throw ValidationError("prior does not match policy table");
    }
  }
  return table.root_value();
}

/// Decision rule that sees only the belief state.
using BeliefAgent = std::function<int(const BeliefState&, SeededRng&)>;

struct RolloutEstimate {
  double mean = 0.0;
  double sem = 0.0;
  std::size_t episodes = 0;
};

/// Mean total reward of `agent` on tasks drawn from `prior`.
RolloutEstimate simulate_belief_agent(const BanditPrior<double>& prior, int arms, int horizon,
                                      const BeliefAgent& agent, std::size_t episodes, SeededRng& rng);

/// Monte-Carlo value of the table's own policy, for planner/simulator consistency.
RolloutEstimate simulate_table_policy(const OptimalPolicyTable<double>& table, std::size_t episodes, SeededRng& rng);

namespace belief_agents {
BeliefAgent uniform(int arms);
/// Highest posterior mean, ties to the lowest index.
BeliefAgent greedy(const BanditPrior<double>& prior, int arms);
BeliefAgent table(const OptimalPolicyTable<double>& table);
}  // namespace belief_agents

}  // namespace metabayes
