#include <boost/rational.hpp>
#include <cmath>
#include <cstring>
#include <functional>

#include "doctest.h"
#include "metabayes/errors.hpp"
#include "metabayes/oracles/bandit_oracle.hpp"
#include "metabayes/oracles/conjugate.hpp"
#include "metabayes/oracles/dominance.hpp"
#include "metabayes/oracles/gaussian.hpp"
#include "metabayes/oracles/grid.hpp"

using namespace metabayes;

namespace {

const std::vector<double> kThreeObs{16.0, 12.0, 15.0};

// Exhaustive expectimax over raw histories, no state sharing or indexing.
double brute_force_value(const std::vector<BetaArm<double>>& prior, std::vector<int> s, std::vector<int> f,
                         int remaining) {
  if (remaining == 0) return 0.0;
  double best = -1.0;
  for (std::size_t a = 0; a < prior.size(); ++a) {
    const double p = (prior[a].alpha + s[a]) / (prior[a].alpha + prior[a].beta + s[a] + f[a]);
    ++s[a];
    const double win = brute_force_value(prior, s, f, remaining - 1);
    --s[a];
    ++f[a];
    const double lose = brute_force_value(prior, s, f, remaining - 1);
    --f[a];
    best = std::max(best, p * (1.0 + win) + (1.0 - p) * lose);
  }
  return best;
}

}  // namespace

TEST_CASE("conjugate posterior and predictive on obs (16, 12, 15)") {
  // Hand derivation: precision = 1/9 + 3/4 = 31/36, mean = (10/9 + 43/4) * 36/31 = 427/31.
  const GaussianTaskFamily f;
  const Gaussian post = conjugate_posterior(f, kThreeObs);
  const Gaussian pred = conjugate_predictive(f, kThreeObs);
  CHECK(std::abs(post.mean - 427.0 / 31.0) < 1e-9);
  CHECK(std::abs(post.sd - std::sqrt(36.0 / 31.0)) < 1e-9);
  CHECK(std::abs(pred.mean - 427.0 / 31.0) < 1e-9);
  CHECK(std::abs(pred.sd - std::sqrt(36.0 / 31.0 + 4.0)) < 1e-9);
  CHECK(post.mean == doctest::Approx(13.7742).epsilon(1e-5));
  CHECK(post.sd == doctest::Approx(1.0776).epsilon(1e-4));
  CHECK(pred.sd == doctest::Approx(2.2718).epsilon(1e-4));
}

TEST_CASE("conjugate edge cases") {
  const GaussianTaskFamily f;
  const Gaussian prior = conjugate_posterior(f, {});
  CHECK(prior.mean == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(prior.sd == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(conjugate_predictive(f, {}).sd == doctest::Approx(std::sqrt(13.0)).epsilon(1e-15));
  const std::vector<double> ten{10.0};
  CHECK(conjugate_predictive(f, ten).mean == 10.0);
  const Gaussian flat = conjugate_posterior(GaussianTaskFamily{.prior_sd = 1e9}, kThreeObs);
  CHECK(flat.mean == doctest::Approx(43.0 / 3.0).epsilon(1e-9));
  CHECK(flat.sd == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-9));
}

TEST_CASE("predictive variance never drops below the likelihood variance") {
  SeededRng rng(12);
  for (int i = 0; i < 1000; ++i) {
    GaussianTaskFamily f{.prior_mean = rng.normal(0, 10), .prior_sd = 0.1 + 5 * rng.uniform(),
                         .likelihood_sd = 0.1 + 5 * rng.uniform()};
    std::vector<double> obs(rng.uniform_index(30));
    for (double& x : obs) x = rng.normal(0, 20);
    CHECK(conjugate_predictive(f, obs).variance() >= f.likelihood_sd * f.likelihood_sd);
  }
}

TEST_CASE("gaussian_kl") {
  CHECK(gaussian_kl(Gaussian{3, 2}, Gaussian{3, 2}) == 0.0);
  CHECK(gaussian_kl(Gaussian{1, 1}, Gaussian{0, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  SeededRng rng(0);
  for (int i = 0; i < 10000; ++i) {
    Gaussian p{rng.normal(0, 5), 0.01 + 3 * rng.uniform()};
    Gaussian q{rng.normal(0, 5), 0.01 + 3 * rng.uniform()};
    CHECK(gaussian_kl(p, q) >= 0.0);
  }
}

TEST_CASE("grid predictive agrees with the conjugate predictive") {
  const GaussianTaskFamily f;
  auto check_instance = [](const GaussianTaskFamily& fam, std::span<const double> obs) {
    const GridDensity pred =
        grid_predictive(prior_log_density(fam), fam.likelihood_sd, obs, default_grid(fam, obs, 4096));
    const Gaussian exact = conjugate_predictive(fam, obs);
    const double kl = discrete_kl(discretize(exact, pred), pred);
    CHECK(kl >= -1e-12);
    CHECK(kl < 1e-4);
    CHECK(kl_to_gaussian(pred, exact) < 1e-4);
  };
  check_instance(f, kThreeObs);
  SeededRng rng(21);
  for (int i = 0; i < 100; ++i) {
    GaussianTaskFamily fam{.prior_mean = rng.normal(10, 5), .prior_sd = 0.5 + 5 * rng.uniform(),
                           .likelihood_sd = 0.5 + 3 * rng.uniform()};
    std::vector<double> obs(rng.uniform_index(11));
    const double mu = rng.normal(fam.prior_mean, fam.prior_sd);
    for (double& x : obs) x = rng.normal(mu, fam.likelihood_sd);
    check_instance(fam, obs);
  }
}

TEST_CASE("grid oracle edge cases") {
  SUBCASE("exponential prior, no data: predictive mean is the prior mean") {
    const ExponentialPriorTaskFamily f;
    const GridDensity pred = grid_predictive(prior_log_density(f), f.likelihood_sd, {}, default_grid(f, {}, 4096));
    CHECK(std::abs(pred.mean() - 10.0) < 0.1);
  }
  SUBCASE("gaussian prior, no data: grid posterior is the prior") {
    const GaussianTaskFamily f;
    const GridSpec spec = default_grid(f, {}, 4096);
    const GridDensity post = grid_posterior(prior_log_density(f), f.likelihood_sd, {}, spec);
    // Reference: the prior density at the same bin centres, normalized.
    Vector ref(post.bins());
    for (int i = 0; i < post.bins(); ++i) ref(i) = std::exp(Gaussian{10, 3}.log_density(post.center(i)));
    ref /= ref.sum();
    CHECK(total_variation(post, GridDensity(post.lower(), post.upper(), ref)) < 1e-6);
  }
  SUBCASE("narrow grid is rejected") {
    const GaussianTaskFamily f;
    CHECK_THROWS_AS(grid_posterior(prior_log_density(f), 2.0, kThreeObs, GridSpec{12.0, 15.0, 256}),
                    GridTooSmallError);
  }
  SUBCASE("NaN log prior is rejected") {
    auto bad = [](double) { return std::nan(""); };
    CHECK_THROWS_AS(grid_posterior(bad, 2.0, kThreeObs, GridSpec{0.0, 30.0, 256}), NumericalError);
  }
  SUBCASE("grid density invariants") {
    CHECK_THROWS_AS(GridDensity(0.0, 1.0, Vector::Constant(4, 0.3)), ValidationError);
    CHECK_THROWS_AS(GridDensity(1.0, 1.0, Vector::Constant(4, 0.25)), ValidationError);
    CHECK_NOTHROW(GridDensity(0.0, 1.0, Vector::Constant(4, 0.25)));
  }
  SUBCASE("predictive log density matches the conjugate one") {
    const GaussianTaskFamily f;
    const GridDensity post =
        grid_posterior(prior_log_density(f), 2.0, kThreeObs, default_grid(f, kThreeObs, 4096));
    const Gaussian exact = conjugate_predictive(f, kThreeObs);
    for (double x : {5.0, 13.0, 20.0}) CHECK(predictive_log_density(post, 2.0, x) == doctest::Approx(exact.log_density(x)).epsilon(1e-6));
  }
}

TEST_CASE("dominance test") {
  const GaussianTaskFamily f;
  SUBCASE("self comparison is exactly zero") {
    SeededRng rng(0);
    DominanceReport r = dominance_test(f, reference_rules::posterior_predictive(f), 3, 1000, rng);
    CHECK(r.delta_e == 0.0);
    CHECK(r.expected_kl == 0.0);
  }
  SUBCASE("prior predictive at t = 3") {
    SeededRng rng(0);
    DominanceReport r = dominance_test(f, reference_rules::prior_predictive(f), 3, 100000, rng);
    CHECK(r.ci_low > 0.0);
    CHECK(r.estimator_gap <= 1e-12);
    CHECK(std::abs(r.delta_e - r.expected_kl) < 4 * r.std_error);
  }
  SUBCASE("gross mismatch") {
    SeededRng rng(0);
    DominanceReport r = dominance_test(f, reference_rules::constant({0, 1}), 3, 1000, rng);
    CHECK(r.ci_low > 10.0);
  }
  SUBCASE("every shipped reference loses") {
    const std::vector<ReferenceRule> rules{reference_rules::prior_predictive(f), reference_rules::scaled(f, 0.7),
                                           reference_rules::scaled(f, 1.5), reference_rules::shifted(f, 0.5),
                                           reference_rules::constant({10, 4})};
    for (int t : {0, 1, 5}) {
      for (const auto& rule : rules) {
        SeededRng rng(static_cast<std::uint64_t>(t));
        DominanceReport r = dominance_test(f, rule, t, 20000, rng);
        CHECK(r.delta_e >= -3 * r.std_error);
        CHECK(r.expected_kl >= 0.0);
        CHECK(r.estimator_gap <= 1e-12);
      }
    }
  }
  SUBCASE("invalid reference") {
    SeededRng rng(0);
    CHECK_THROWS_AS(dominance_test(f, reference_rules::constant({0, -1}), 2, 10, rng), ValidationError);
  }
}

TEST_CASE("discrete dominance identity holds exactly") {
  DiscreteModel m;
  m.prior = (Vector(3) << 0.2, 0.5, 0.3).finished();
  m.likelihood = (Matrix(3, 3) << 0.7, 0.2, 0.1, 0.3, 0.4, 0.3, 0.05, 0.15, 0.8).finished();
  auto marginal = [&](std::span<const int>) { return Vector(m.prior.transpose() * m.likelihood); };
  for (int t : {0, 1, 2, 4}) {
    DiscreteDominance d = discrete_dominance(m, t, marginal);
    CHECK(d.expected_kl >= 0.0);
    CHECK(d.expected_log_ratio == doctest::Approx(d.expected_kl).epsilon(1e-12));
  }
  const std::vector<int> prefix{2, 2};
  Vector pred = discrete_predictive(m, prefix);
  CHECK(pred.sum() == doctest::Approx(1.0));
  CHECK(pred(2) > (m.prior.transpose() * m.likelihood)(2));
}

TEST_CASE("bandit oracle, exact rational values") {
  using Q = boost::rational<long long>;
  const BanditPrior<Q> prior{{Q(1), Q(1)}};
  auto h1 = bayes_optimal_bandit(prior, 2, 1);
  CHECK(h1.root_value() == Q(1, 2));
  CHECK(h1.action(BeliefState::initial(2, 1)) == 0);
  CHECK(h1.tie(BeliefState::initial(2, 1)));
  auto h2 = bayes_optimal_bandit(prior, 2, 2);
  CHECK(h2.root_value() == Q(13, 12));
  CHECK(optimal_bandit_value(h2, prior) == Q(13, 12));
  CHECK_THROWS_AS(optimal_bandit_value(h2, BanditPrior<Q>{{Q(2), Q(1)}}), ValidationError);
}

TEST_CASE("bandit oracle, dominated arm") {
  const BanditPrior<double> prior{{100.0, 1.0}, {1.0, 1.0}};
  auto table = bayes_optimal_bandit(prior, 2, 2);
  CHECK(table.action(BeliefState::initial(2, 2)) == 0);
  CHECK(std::abs(table.root_value() - 2.0 * 100.0 / 101.0) < 1e-6);
  CHECK(std::abs(table.root_value() - brute_force_value(prior, {0, 0}, {0, 0}, 2)) < 1e-12);
}

TEST_CASE("bandit oracle matches brute-force enumeration") {
  const std::vector<BanditPrior<double>> priors{{{1, 1}, {1, 1}}, {{2, 1}, {1, 3}}, {{0.5, 0.5}, {3, 2}}};
  for (const auto& prior : priors) {
    for (int h = 1; h <= 6; ++h) {
      auto table = bayes_optimal_bandit(prior, 2, h);
      CHECK(table.root_value() == doctest::Approx(brute_force_value(prior, {0, 0}, {0, 0}, h)).epsilon(1e-12));
    }
  }
  // Three arms as well.
  const BanditPrior<double> three{{1, 1}, {2, 2}, {1, 3}};
  CHECK(bayes_optimal_bandit(three, 3, 4).root_value() ==
        doctest::Approx(brute_force_value(three, {0, 0, 0}, {0, 0, 0}, 4)).epsilon(1e-12));
}

TEST_CASE("bandit oracle properties") {
  const BanditPrior<double> prior{{1.0, 1.0}};
  double previous = 0.0;
  for (int h = 1; h <= 12; ++h) {
    auto table = bayes_optimal_bandit(prior, 2, h);
    CHECK(table.root_value() >= previous);
    previous = table.root_value();
    BeliefState terminal = BeliefState::initial(2, h);
    terminal.observe(1, true);
    for (int k = 1; k < h; ++k) terminal.observe(0, k % 2 == 0);
    CHECK(terminal.steps_remaining == 0);
    CHECK(table.value(terminal) == 0.0);
  }
  auto a = bayes_optimal_bandit(prior, 2, 8);
  auto b = bayes_optimal_bandit(prior, 2, 8);
  for (std::size_t i = 0; i < a.states(); ++i) CHECK(std::memcmp(&a.values()[i], &b.values()[i], sizeof(double)) == 0);
  CHECK_THROWS_AS(bayes_optimal_bandit(prior, 2, 200, 1 << 20), CapacityError);
  CHECK_THROWS_AS(a.value(BeliefState::initial(2, 3)), ContractViolation);
}

TEST_CASE("table policy rollout matches its planned value") {
  auto table = bayes_optimal_bandit(BanditPrior<double>{{1.0, 1.0}}, 2, 10);
  SeededRng rng(0);
  RolloutEstimate est = simulate_table_policy(table, 100000, rng);
  CHECK(std::abs(est.mean - table.root_value()) < 3 * est.sem);
  SeededRng rng2(0);
  RolloutEstimate uni = simulate_belief_agent({{1.0, 1.0}}, 2, 10, belief_agents::uniform(2), 100000, rng2);
  CHECK(uni.mean == doctest::Approx(5.0).epsilon(0.01));
  CHECK(uni.mean < est.mean);
}
