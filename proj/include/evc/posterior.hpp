#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "evc/batch.hpp"
#include "evc/errors.hpp"
#include "evc/mdp.hpp"
#include "evc/rng.hpp"

namespace evc {

/// Transition visit counts n(s, a, s').
struct TransitionCounts {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::int64_t> counts; // n_states * n_actions * n_states

    std::int64_t at(std::size_t s, std::size_t a, std::size_t s2) const {
        return counts[(s * n_actions + a) * n_states + s2];
    }
    std::int64_t& at(std::size_t s, std::size_t a, std::size_t s2) {
        return counts[(s * n_actions + a) * n_states + s2];
    }

    static TransitionCounts zeros(std::size_t n_states, std::size_t n_actions) {
        TransitionCounts c;
        c.n_states = n_states;
        c.n_actions = n_actions;
        c.counts.assign(n_states * n_actions * n_states, 0);
        return c;
    }
};

inline TransitionCounts counts_from_batch(const TransitionBatch& batch,
                                          std::size_t n_states, std::size_t n_actions) {
    batch.check(n_states, n_actions);
    TransitionCounts counts = TransitionCounts::zeros(n_states, n_actions);
    for (const Trajectory& traj : batch.trajectories)
        for (const TransitionStep& step : traj.steps)
            ++counts.at(step.s, step.a, step.s_next);
    return counts;
}

/// Independent per-row Dirichlet belief over transition kernels, with
/// flat prior: row (s, a) has concentration n(s,a,.) + 1. Rewards,
/// initial distribution, and the terminal mask are treated as known
/// structure, so every model produced here shares them and keeps
/// terminal states absorbing regardless of the counts.
struct DirichletPosterior {
    TransitionCounts counts;
    std::vector<double> rewards;            // n_states * n_actions, expected convention
    std::vector<double> initial_dist;       // n_states
    std::vector<bool> terminal;             // n_states
    std::vector<double> transition_rewards; // empty, or full per-transition table

    std::size_t n_states() const { return counts.n_states; }
    std::size_t n_actions() const { return counts.n_actions; }

    static DirichletPosterior from_batch(const TransitionBatch& batch,
                                         const TabularMdp& known_structure) {
        DirichletPosterior post;
        post.counts = counts_from_batch(batch, known_structure.n_states,
                                        known_structure.n_actions);
        post.rewards = known_structure.rewards;
        post.initial_dist = known_structure.initial_dist;
        post.terminal = known_structure.terminal;
        post.transition_rewards = known_structure.transition_rewards;
        return post;
    }

  private:
    TabularMdp shell() const {
        TabularMdp m = TabularMdp::zeros(n_states(), n_actions());
        m.rewards = rewards;
        m.initial_dist = initial_dist;
        m.terminal = terminal;
        m.transition_rewards = transition_rewards;
        return m;
    }

    void fix_terminal_row(TabularMdp& m, std::size_t s, std::size_t a) const {
        for (std::size_t s2 = 0; s2 < n_states(); ++s2) m.transition(s, a, s2) = 0.0;
        m.transition(s, a, s) = 1.0;
    }

  public:
    /// Most likely kernel under the posterior: empirical frequencies
    /// (Dirichlet mode). Unvisited rows have a flat mode; the uniform
    /// row is the deterministic representative.
    TabularMdp mode_model() const {
        TabularMdp m = shell();
        for (std::size_t s = 0; s < n_states(); ++s) {
            for (std::size_t a = 0; a < n_actions(); ++a) {
                if (terminal[s]) {
                    fix_terminal_row(m, s, a);
                    continue;
                }
                std::int64_t total = 0;
                for (std::size_t s2 = 0; s2 < n_states(); ++s2)
                    total += counts.at(s, a, s2);
                if (total == 0) {
                    double u = 1.0 / static_cast<double>(n_states());
                    for (std::size_t s2 = 0; s2 < n_states(); ++s2)
                        m.transition(s, a, s2) = u;
                } else {
                    for (std::size_t s2 = 0; s2 < n_states(); ++s2)
                        m.transition(s, a, s2) =
                            static_cast<double>(counts.at(s, a, s2)) /
                            static_cast<double>(total);
                }
            }
        }
        m.refresh_expected_rewards();
        return m;
    }

    /// Posterior expectation of the kernel: row (s,a), entry s2 is
    /// (n(s,a,s2) + 1) / (total + n_states).
    TabularMdp mean_model() const {
        TabularMdp m = shell();
        for (std::size_t s = 0; s < n_states(); ++s) {
            for (std::size_t a = 0; a < n_actions(); ++a) {
                if (terminal[s]) {
                    fix_terminal_row(m, s, a);
                    continue;
                }
                std::int64_t total = 0;
                for (std::size_t s2 = 0; s2 < n_states(); ++s2)
                    total += counts.at(s, a, s2);
                double denom = static_cast<double>(total) + static_cast<double>(n_states());
                for (std::size_t s2 = 0; s2 < n_states(); ++s2)
                    m.transition(s, a, s2) =
                        (static_cast<double>(counts.at(s, a, s2)) + 1.0) / denom;
            }
        }
        m.refresh_expected_rewards();
        return m;
    }

    /// One Dirichlet row draw into out[0 .. n_states). Keyed by (seed,
    /// s, a) so the same row sampled lazily or as part of a full model
    /// gives identical values.
    void sample_row(std::uint64_t model_seed, std::size_t s, std::size_t a,
                    double* out) const {
        Rng rng(derive_seed(model_seed, stream::kRow, s * n_actions() + a));
        double total = 0.0;
        for (std::size_t s2 = 0; s2 < n_states(); ++s2) {
            double g = rng.gamma(counts.at(s, a, s2) + 1);
            out[s2] = g;
            total += g;
        }
        if (total <= 0.0) { // possible only via degenerate fp underflow
            double u = 1.0 / static_cast<double>(n_states());
            for (std::size_t s2 = 0; s2 < n_states(); ++s2) out[s2] = u;
            return;
        }
        for (std::size_t s2 = 0; s2 < n_states(); ++s2) out[s2] /= total;
    }

    /// A full kernel draw. Use derive_seed(seed, stream::kModel, j) as
    /// model_seed to place draws on per-index streams.
    TabularMdp sample_model(std::uint64_t model_seed) const {
        TabularMdp m = shell();
        for (std::size_t s = 0; s < n_states(); ++s) {
            for (std::size_t a = 0; a < n_actions(); ++a) {
                if (terminal[s]) {
                    fix_terminal_row(m, s, a);
                    continue;
                }
                sample_row(model_seed, s, a,
                           m.transitions.data() + (s * n_actions() + a) * n_states());
            }
        }
        m.refresh_expected_rewards();
        return m;
    }

    /// Performance of a deterministic policy on the model draw keyed by
    /// model_seed, sampling only the rows the policy visits. Rows are
    /// independent across (s, a) and sample_row reseeds per row, so
    /// skipping unused rows changes neither the joint law nor the
    /// realized values; the solve mirrors policy_evaluation's direct
    /// branch so the result matches performance(sample_model(model_seed),
    /// policy, gamma) exactly. Falls back to the full draw for
    /// stochastic policies.
    double sampled_performance(std::uint64_t model_seed, const Policy& policy,
                               double gamma, const EvalOptions& options = {}) const {
        if (policy.kind != PolicyKind::deterministic) {
            TabularMdp m = sample_model(model_seed);
            return performance(m, policy, gamma, options);
        }
        if (policy.n_states != n_states() || policy.n_actions != n_actions())
            throw InvalidInputError("sampled_performance: policy shape mismatch");
        const auto S = static_cast<Eigen::Index>(n_states());
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
        Eigen::VectorXd r(S);
        std::vector<double> row(n_states());
        for (std::size_t s = 0; s < n_states(); ++s) {
            std::size_t a = policy.det_actions[s];
            auto i = static_cast<Eigen::Index>(s);
            std::fill(row.begin(), row.end(), 0.0);
            if (terminal[s]) {
                row[s] = 1.0;
            } else {
                sample_row(model_seed, s, a, row.data());
            }
            for (std::size_t s2 = 0; s2 < n_states(); ++s2)
                P(i, static_cast<Eigen::Index>(s2)) = row[s2];
            if (!transition_rewards.empty()) {
                // same accumulation order as refresh_expected_rewards,
                // keeping the lazy result bitwise equal to the full draw
                double acc = 0.0;
                const double* tr =
                    transition_rewards.data() + (s * n_actions() + a) * n_states();
                for (std::size_t s2 = 0; s2 < n_states(); ++s2) acc += row[s2] * tr[s2];
                r(i) = acc;
            } else {
                r(i) = rewards[s * n_actions() + a];
            }
        }
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - gamma * P;
        Eigen::VectorXd v = A.partialPivLu().solve(r);
        double total = 0.0;
        for (std::size_t s = 0; s < n_states(); ++s)
            total += initial_dist[s] * v(static_cast<Eigen::Index>(s));
        return total;
    }
};

} // namespace evc
