#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include <evc/errors.hpp>
#include <evc/mdp.hpp>

#include "support/rollout.hpp"

using namespace evc;

namespace {

// 2 states, 1 action: state 0 loops on itself w.p. 1/2, otherwise falls
// into the terminal state. Closed form V(0) = 1 / (1 - gamma/2).
TabularMdp loop_mdp() {
  TabularMdp m = TabularMdp::zeros(2, 1);
  m.transition(0, 0, 0) = 0.5;
  m.transition(0, 0, 1) = 0.5;
  m.transition(1, 0, 1) = 1.0;
  m.reward(0, 0) = 1.0;
  m.initial_dist = {1.0, 0.0};
  m.terminal[1] = true;
  m.validate();
  return m;
}

TabularMdp random_mdp(std::size_t S, std::size_t A, uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  TabularMdp m = TabularMdp::zeros(S, A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double total = 0.0;
      std::vector<double> w(S);
      for (std::size_t s2 = 0; s2 < S; ++s2) total += (w[s2] = expo(eng));
      for (std::size_t s2 = 0; s2 < S; ++s2) m.transition(s, a, s2) = w[s2] / total;
      m.reward(s, a) = unif(eng);
    }
  for (std::size_t s = 0; s < S; ++s) m.initial_dist[s] = 1.0 / double(S);
  m.validate();
  return m;
}

// Reference evaluator: plain value iteration run far past the test
// tolerance, sharing no code with policy_evaluation.
std::vector<double> vi_reference(const TabularMdp& m, const Policy& pi, double gamma) {
  std::vector<double> v(m.n_states, 0.0), next(m.n_states);
  for (int sweep = 0; sweep < 4000; ++sweep) {
    for (std::size_t s = 0; s < m.n_states; ++s) {
      double acc = 0.0;
      for (std::size_t a = 0; a < m.n_actions; ++a) {
        double w = pi.action_prob(s, a);
        if (w == 0.0) continue;
        double q = m.reward(s, a);
        for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
          q += gamma * m.transition(s, a, s2) * v[s2];
        acc += w * q;
      }
      next[s] = acc;
    }
    v = next;
  }
  return v;
}

} // namespace

TEST_CASE("validate rejects malformed models", "[mdp]") {
  TabularMdp m = loop_mdp();

  SECTION("row sum broken") {
    m.transition(0, 0, 0) = 0.7;
    REQUIRE_THROWS_AS(m.validate(), InvalidInputError);
  }
  SECTION("negative probability") {
    m.transition(0, 0, 0) = -0.1;
    m.transition(0, 0, 1) = 1.1;
    REQUIRE_THROWS_AS(m.validate(), InvalidInputError);
  }
  SECTION("initial distribution broken") {
    m.initial_dist = {0.4, 0.4};
    REQUIRE_THROWS_AS(m.validate(), InvalidInputError);
  }
  SECTION("terminal state that leaks") {
    m.terminal[0] = true;
    REQUIRE_THROWS_AS(m.validate(), InvalidInputError);
  }
  SECTION("terminal state that pays") {
    m.reward(1, 0) = 0.5;
    REQUIRE_THROWS_AS(m.validate(), InvalidInputError);
  }
  SECTION("wrong tensor size") {
    m.transitions.pop_back();
    REQUIRE_THROWS_AS(m.validate(), InvalidInputError);
  }
}

TEST_CASE("policy construction and behavior comparison", "[mdp]") {
  Policy det = Policy::deterministic({1, 0}, 2);
  REQUIRE(det.action_prob(0, 1) == 1.0);
  REQUIRE(det.action_prob(0, 0) == 0.0);

  Policy stoch = Policy::stochastic({0.0, 1.0, 1.0, 0.0}, 2, 2);
  REQUIRE(stoch.action_prob(1, 0) == 1.0);

  // same action distribution, different representation
  REQUIRE(det.same_behavior(stoch));
  REQUIRE(stoch.same_behavior(det));

  Policy other = Policy::deterministic({1, 1}, 2);
  REQUIRE_FALSE(det.same_behavior(other));

  REQUIRE_THROWS_AS(Policy::deterministic({2, 0}, 2), InvalidInputError);
  REQUIRE_THROWS_AS(Policy::stochastic({0.5, 0.4, 1.0, 0.0}, 2, 2), InvalidInputError);
  REQUIRE_THROWS_AS(Policy::stochastic({0.5, 0.5}, 2, 2), InvalidInputError);
}

TEST_CASE("policy evaluation matches the closed form", "[mdp]") {
  TabularMdp m = loop_mdp();
  Policy pi = Policy::deterministic({0, 0}, 1);
  double gamma = 0.8;
  double expected = 1.0 / (1.0 - gamma / 2.0);

  ValueVector direct = policy_evaluation(m, pi, gamma, {.method = EvalMethod::direct});
  REQUIRE(direct.values[0] == Catch::Approx(expected).epsilon(1e-12));
  REQUIRE(direct.values[1] == Catch::Approx(0.0).margin(1e-12));

  ValueVector iter = policy_evaluation(m, pi, gamma, {.method = EvalMethod::iterative});
  REQUIRE(iter.values[0] == Catch::Approx(expected).epsilon(1e-8));

  REQUIRE(performance(m, pi, gamma) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("direct and iterative evaluation agree with a reference solver", "[mdp]") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    TabularMdp m = random_mdp(6, 3, seed);
    std::vector<double> probs(6 * 3, 1.0 / 3.0);
    Policy pi = Policy::stochastic(probs, 6, 3);

    std::vector<double> ref = vi_reference(m, pi, 0.9);
    ValueVector direct = policy_evaluation(m, pi, 0.9, {.method = EvalMethod::direct});
    ValueVector iter = policy_evaluation(m, pi, 0.9, {.method = EvalMethod::iterative});
    for (std::size_t s = 0; s < 6; ++s) {
      REQUIRE(direct.values[s] == Catch::Approx(ref[s]).margin(1e-8));
      REQUIRE(iter.values[s] == Catch::Approx(ref[s]).margin(1e-8));
    }
  }
}

TEST_CASE("evaluation rejects bad inputs and hopeless sweep caps", "[mdp]") {
  TabularMdp m = loop_mdp();
  Policy pi = Policy::deterministic({0, 0}, 1);
  REQUIRE_THROWS_AS(policy_evaluation(m, pi, 1.0), InvalidInputError);
  REQUIRE_THROWS_AS(policy_evaluation(m, pi, -0.1), InvalidInputError);
  REQUIRE_THROWS_AS(policy_evaluation(m, pi, std::nan("")), InvalidInputError);

  Policy wrong = Policy::deterministic({0, 0, 0}, 1);
  REQUIRE_THROWS_AS(policy_evaluation(m, wrong, 0.9), InvalidInputError);

  EvalOptions tight{.method = EvalMethod::iterative, .residual_tol = 1e-12, .max_sweeps = 2};
  REQUIRE_THROWS_AS(policy_evaluation(m, pi, 0.99, tight), SolverFailureError);
}

TEST_CASE("policy iteration finds the enumerated optimum", "[mdp]") {
  for (uint64_t seed : {11u, 12u, 13u, 14u}) {
    TabularMdp m = random_mdp(4, 3, seed);
    Policy best = policy_iteration(m, 0.9);
    std::vector<std::size_t> brute = testsupport::enumerate_best_policy(m, 0.9);
    double perf_pi = performance(m, best, 0.9);
    double perf_brute =
        performance(m, Policy::deterministic(brute, m.n_actions), 0.9);
    REQUIRE(perf_pi == Catch::Approx(perf_brute).margin(1e-9));
  }
}

TEST_CASE("policy iteration breaks ties toward the lowest action", "[mdp]") {
  // both actions identical everywhere, so the all-zeros policy is optimal
  TabularMdp m = TabularMdp::zeros(2, 2);
  for (std::size_t a = 0; a < 2; ++a) {
    m.transition(0, a, 1) = 1.0;
    m.transition(1, a, 1) = 1.0;
    m.reward(0, a) = 1.0;
  }
  m.initial_dist = {1.0, 0.0};
  m.terminal[1] = true;
  m.validate();

  Policy best = policy_iteration(m, 0.9);
  REQUIRE(best.det_actions == std::vector<std::size_t>{0, 0});
}

TEST_CASE("evaluation agrees with plain rollouts", "[mdp]") {
  TabularMdp m = random_mdp(5, 2, 99);
  Policy pi = Policy::deterministic({0, 1, 0, 1, 0}, 2);
  double exact = performance(m, pi, 0.8);
  // horizon long enough that truncation bias is far below the tolerance
  double mc = testsupport::mc_performance(m, pi, 0.8, 200, 200000, 7);
  REQUIRE(std::abs(exact - mc) < 0.02);
}
