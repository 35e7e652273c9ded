#pragma once

#include <cstddef>
#include <vector>

#include "evc/errors.hpp"

namespace evc {

/// One logged transition: state, action taken, realized reward, landing
/// state.
struct TransitionStep {
    std::size_t s = 0;
    std::size_t a = 0;
    double r = 0.0;
    std::size_t s_next = 0;
};

/// Steps of one episode in order. Consecutive steps must chain:
/// steps[t].s_next == steps[t+1].s.
struct Trajectory {
    std::vector<TransitionStep> steps;

    void check_chained() const {
        for (std::size_t t = 0; t + 1 < steps.size(); ++t)
            if (steps[t].s_next != steps[t + 1].s)
                throw InvalidInputError("trajectory: steps do not chain");
    }
};

/// A dataset of fixed-length episodes collected under one behavior
/// policy. steps_per_episode is the common length n; the total
/// transition count is trajectories.size() * steps_per_episode.
struct TransitionBatch {
    std::vector<Trajectory> trajectories;
    std::size_t steps_per_episode = 0;

    std::size_t n_transitions() const {
        return trajectories.size() * steps_per_episode;
    }

    void check(std::size_t n_states, std::size_t n_actions) const {
        for (const Trajectory& traj : trajectories) {
            if (traj.steps.size() != steps_per_episode)
                throw InvalidInputError("batch: episode length mismatch");
            traj.check_chained();
            for (const TransitionStep& step : traj.steps) {
                if (step.s >= n_states || step.s_next >= n_states)
                    throw InvalidInputError("batch: state index out of range");
                if (step.a >= n_actions)
                    throw InvalidInputError("batch: action index out of range");
            }
        }
    }
};

} // namespace evc
