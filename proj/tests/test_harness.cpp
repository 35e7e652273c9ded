#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include <evc/envs.hpp>
#include <evc/errors.hpp>
#include <evc/harness.hpp>
#include <evc/mdp.hpp>

using namespace evc;

namespace {

TabularMdp single_state() {
  TabularMdp m = TabularMdp::zeros(1, 1);
  m.transition(0, 0, 0) = 1.0;
  m.reward(0, 0) = 1.0;
  m.initial_dist = {1.0};
  m.validate();
  return m;
}

TabularMdp fall_through() {
  // state 0 drops into the terminal state on any action
  TabularMdp m = TabularMdp::zeros(2, 2);
  for (std::size_t a = 0; a < 2; ++a) {
    m.transition(0, a, 1) = 1.0;
    m.transition(1, a, 1) = 1.0;
    m.reward(0, a) = 3.0;
  }
  m.initial_dist = {1.0, 0.0};
  m.terminal[1] = true;
  m.validate();
  return m;
}

} // namespace

TEST_CASE("uniform policy spreads mass evenly", "[harness]") {
  Policy u = uniform_policy(3, 4);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 4; ++a)
      REQUIRE(u.action_prob(s, a) == 0.25);
}

TEST_CASE("smallest possible batch", "[harness]") {
  TransitionBatch batch = collect_batch(single_state(), 1, 1, 99);
  REQUIRE(batch.trajectories.size() == 1);
  REQUIRE(batch.steps_per_episode == 1);
  const TransitionStep& step = batch.trajectories[0].steps[0];
  REQUIRE(step.s == 0);
  REQUIRE(step.s_next == 0);
  REQUIRE(step.a == 0);
  REQUIRE(step.r == 1.0);
}

TEST_CASE("chain batch shape and contents", "[harness]") {
  TabularMdp m = chain();
  TransitionBatch batch = collect_batch(m, 3, 8, 5);
  REQUIRE(batch.n_transitions() == 24);
  batch.check(5, 2);
  for (const Trajectory& traj : batch.trajectories) {
    REQUIRE(traj.steps.size() == 8);
    REQUIRE(traj.steps[0].s == 0); // point-mass initial distribution
    for (const TransitionStep& step : traj.steps) {
      REQUIRE(step.s < 5);
      REQUIRE(step.a < 2);
      // logged reward is the realized payout of that transition
      REQUIRE(step.r == m.realized_reward(step.s, step.a, step.s_next));
      bool labelled = step.r == 0.0 || step.r == 2.0 || step.r == 10.0;
      REQUIRE(labelled);
    }
  }
}

TEST_CASE("collected actions are uniform", "[harness]") {
  TabularMdp m = chain();
  TransitionBatch batch = collect_batch(m, 12500, 8, 31);
  std::size_t count0 = 0;
  for (const Trajectory& traj : batch.trajectories)
    for (const TransitionStep& step : traj.steps)
      if (step.a == 0) ++count0;
  double freq = double(count0) / 100000.0;
  // 4 sigma for a fair coin over 1e5 draws
  REQUIRE(std::abs(freq - 0.5) < 4.0 * std::sqrt(0.25 / 100000.0));
}

TEST_CASE("collection is reproducible and prefix stable", "[harness]") {
  TabularMdp m = ring();
  TransitionBatch a = collect_batch(m, 5, 8, 77);
  TransitionBatch b = collect_batch(m, 5, 8, 77);
  TransitionBatch c = collect_batch(m, 5, 8, 78);

  auto equal_traj = [](const Trajectory& x, const Trajectory& y) {
    if (x.steps.size() != y.steps.size()) return false;
    for (std::size_t t = 0; t < x.steps.size(); ++t) {
      const TransitionStep &p = x.steps[t], &q = y.steps[t];
      if (p.s != q.s || p.a != q.a || p.r != q.r || p.s_next != q.s_next) return false;
    }
    return true;
  };

  bool identical = true, differs = false;
  for (std::size_t i = 0; i < 5; ++i) {
    identical = identical && equal_traj(a.trajectories[i], b.trajectories[i]);
    differs = differs || !equal_traj(a.trajectories[i], c.trajectories[i]);
  }
  REQUIRE(identical);
  REQUIRE(differs);

  // episodes are seeded individually, so a shorter collection is a
  // strict prefix of a longer one
  TransitionBatch prefix = collect_batch(m, 3, 8, 77);
  for (std::size_t i = 0; i < 3; ++i)
    REQUIRE(equal_traj(prefix.trajectories[i], a.trajectories[i]));
}

TEST_CASE("absorbing states keep logging self-loops", "[harness]") {
  TransitionBatch batch = collect_batch(fall_through(), 4, 6, 13);
  for (const Trajectory& traj : batch.trajectories) {
    REQUIRE(traj.steps[0].s == 0);
    REQUIRE(traj.steps[0].s_next == 1);
    REQUIRE(traj.steps[0].r == 3.0);
    for (std::size_t t = 1; t < 6; ++t) {
      REQUIRE(traj.steps[t].s == 1);
      REQUIRE(traj.steps[t].s_next == 1);
      REQUIRE(traj.steps[t].r == 0.0);
    }
  }
}

TEST_CASE("collect_batch rejects empty dimensions", "[harness]") {
  TabularMdp m = single_state();
  REQUIRE_THROWS_AS(collect_batch(m, 0, 5, 1), InvalidInputError);
  REQUIRE_THROWS_AS(collect_batch(m, 5, 0, 1), InvalidInputError);
}

TEST_CASE("delta_u basics", "[harness]") {
  TabularMdp m = chain();
  Policy all_advance = Policy::deterministic({0, 0, 0, 0, 0}, 2);
  Policy all_retreat = Policy::deterministic({1, 1, 1, 1, 1}, 2);

  REQUIRE(delta_u(all_retreat, all_retreat, m, 0.9) == 0.0);

  // the optimum against a weak baseline: positive, at most 1
  double gap = delta_u(all_advance, all_retreat, m, 0.9);
  REQUIRE(gap > 0.0);
  REQUIRE(gap <= 1.0);
  // antisymmetric in the pair
  REQUIRE(delta_u(all_retreat, all_advance, m, 0.9) == Catch::Approx(-gap));
}

TEST_CASE("delta_u refuses a vanishing optimum", "[harness]") {
  TabularMdp m = single_state();
  m.reward(0, 0) = 0.0;
  Policy p = Policy::deterministic({0}, 1);
  REQUIRE_THROWS_AS(delta_u(p, p, m, 0.9), InvalidInputError);
}
