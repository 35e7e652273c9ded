#pragma once

#include <cstdint>
#include <vector>

#include "evc/batch.hpp"
#include "evc/errors.hpp"
#include "evc/mdp.hpp"
#include "evc/rng.hpp"

namespace evc {

/// The uniform random behavior policy used for data collection.
inline Policy uniform_policy(std::size_t n_states, std::size_t n_actions) {
    return Policy::stochastic(
        std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions)),
        n_states, n_actions, "uniform");
}

/// Simulates m episodes of exactly n steps under uniform i.i.d.
/// actions, restarting from the initial distribution each episode.
/// Absorbing states keep logging self-loop steps until the horizon so
/// all episodes share the same length. Episode i draws from
/// derive_seed(seed, stream::kTrajectory, i), so the batch content is
/// independent of episode evaluation order.
inline TransitionBatch collect_batch(const TabularMdp& mdp, std::size_t m, std::size_t n,
                                     std::uint64_t seed) {
    if (m < 1 || n < 1) throw InvalidInputError("collect_batch: m and n must be >= 1");
    TransitionBatch batch;
    batch.steps_per_episode = n;
    batch.trajectories.resize(m);
    std::vector<double> row(mdp.n_states);
    for (std::size_t i = 0; i < m; ++i) {
        Rng rng(derive_seed(seed, stream::kTrajectory, i));
        Trajectory& traj = batch.trajectories[i];
        traj.steps.reserve(n);
        std::size_t s = rng.categorical(mdp.initial_dist);
        for (std::size_t t = 0; t < n; ++t) {
            std::size_t a = static_cast<std::size_t>(rng.uniform_below(mdp.n_actions));
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) row[s2] = mdp.transition(s, a, s2);
            std::size_t s_next = rng.categorical(row);
            traj.steps.push_back({s, a, mdp.realized_reward(s, a, s_next), s_next});
            s = s_next;
        }
    }
    return batch;
}

/// Performance gap of a policy over the baseline, normalized by the
/// optimum, all evaluated on the known true model under gamma_ev. The
/// optimum is recomputed by policy_iteration on the true model. Throws
/// InvalidInputError when the optimal performance is zero (or closer to
/// it than fp noise allows), since the normalization is then undefined.
inline double delta_u(const Policy& policy, const Policy& baseline,
                      const TabularMdp& true_mdp, double gamma_ev) {
    Policy optimal = policy_iteration(true_mdp, gamma_ev);
    double u_best = performance(true_mdp, optimal, gamma_ev);
    if (std::abs(u_best) < 1e-12)
        throw InvalidInputError("delta_u: optimal performance is zero, cannot normalize");
    double u_policy = performance(true_mdp, policy, gamma_ev);
    double u_baseline = performance(true_mdp, baseline, gamma_ev);
    return (u_policy - u_baseline) / u_best;
}

} // namespace evc
