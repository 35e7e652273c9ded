#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evc/errors.hpp"

namespace evc {

/// Finite MDP with known reward table and initial distribution.
///
/// Transition probabilities are stored flat, row-major over
/// (state, action, next state). Rewards follow the expected-per-pair
/// convention r(s,a) = E[r | s,a]; when the reward actually paid out
/// depends on the landing state, the optional per-transition table
/// carries r(s,a,s') and r(s,a) must equal sum_s' T(s,a,s') r(s,a,s').
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> transitions;         // n_states * n_actions * n_states
    std::vector<double> rewards;             // n_states * n_actions
    std::vector<double> initial_dist;        // n_states
    std::vector<bool> terminal;              // n_states; absorbing, zero reward onward
    std::vector<double> transition_rewards;  // empty, or n_states * n_actions * n_states

    double transition(std::size_t s, std::size_t a, std::size_t s2) const {
        return transitions[(s * n_actions + a) * n_states + s2];
    }
    double& transition(std::size_t s, std::size_t a, std::size_t s2) {
        return transitions[(s * n_actions + a) * n_states + s2];
    }
    double reward(std::size_t s, std::size_t a) const { return rewards[s * n_actions + a]; }
    double& reward(std::size_t s, std::size_t a) { return rewards[s * n_actions + a]; }

    bool has_transition_rewards() const { return !transition_rewards.empty(); }

    /// Recomputes r(s,a) from the per-transition payouts under this
    /// model's own kernel. Required after swapping in a new kernel,
    /// otherwise the expected table still reflects the old dynamics.
    void refresh_expected_rewards() {
        if (transition_rewards.empty()) return;
        for (std::size_t s = 0; s < n_states; ++s) {
            for (std::size_t a = 0; a < n_actions; ++a) {
                double acc = 0.0;
                const double* tr =
                    transition_rewards.data() + (s * n_actions + a) * n_states;
                for (std::size_t s2 = 0; s2 < n_states; ++s2)
                    acc += transition(s, a, s2) * tr[s2];
                reward(s, a) = acc;
            }
        }
    }

    /// Realized reward for one transition. Falls back to the expected
    /// table when no per-transition payouts were provided.
    double realized_reward(std::size_t s, std::size_t a, std::size_t s2) const {
        if (transition_rewards.empty()) return reward(s, a);
        return transition_rewards[(s * n_actions + a) * n_states + s2];
    }

    const double* row(std::size_t s, std::size_t a) const {
        return transitions.data() + (s * n_actions + a) * n_states;
    }

    static TabularMdp zeros(std::size_t n_states, std::size_t n_actions) {
        TabularMdp m;
        m.n_states = n_states;
        m.n_actions = n_actions;
        m.transitions.assign(n_states * n_actions * n_states, 0.0);
        m.rewards.assign(n_states * n_actions, 0.0);
        m.initial_dist.assign(n_states, 0.0);
        m.terminal.assign(n_states, false);
        return m;
    }

    /// Throws InvalidInputError unless every stochastic row sums to one,
    /// the initial distribution is a distribution, and terminal states
    /// self-loop with zero reward.
    void validate(double tol = 1e-9) const;
};

inline void TabularMdp::validate(double tol) const {
    if (n_states == 0 || n_actions == 0)
        throw InvalidInputError("mdp: empty state or action set");
    if (transitions.size() != n_states * n_actions * n_states)
        throw InvalidInputError("mdp: transition tensor has wrong size");
    if (rewards.size() != n_states * n_actions)
        throw InvalidInputError("mdp: reward table has wrong size");
    if (initial_dist.size() != n_states)
        throw InvalidInputError("mdp: initial distribution has wrong size");
    if (terminal.size() != n_states)
        throw InvalidInputError("mdp: terminal mask has wrong size");
    if (!transition_rewards.empty() &&
        transition_rewards.size() != n_states * n_actions * n_states)
        throw InvalidInputError("mdp: per-transition reward table has wrong size");

    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            double total = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                double p = transition(s, a, s2);
                if (p < -tol || p > 1.0 + tol)
                    throw InvalidInputError("mdp: transition probability out of range");
                total += p;
            }
            if (std::abs(total - 1.0) > tol)
                throw InvalidInputError("mdp: transition row does not sum to one");
            if (terminal[s]) {
                if (std::abs(transition(s, a, s) - 1.0) > tol)
                    throw InvalidInputError("mdp: terminal state must self-loop");
                if (std::abs(reward(s, a)) > tol)
                    throw InvalidInputError("mdp: terminal state must pay zero reward");
            }
        }
    }

    double mass = 0.0;
    for (double p : initial_dist) {
        if (p < -tol || p > 1.0 + tol)
            throw InvalidInputError("mdp: initial probability out of range");
        mass += p;
    }
    if (std::abs(mass - 1.0) > tol)
        throw InvalidInputError("mdp: initial distribution does not sum to one");
}

enum class PolicyKind { deterministic, stochastic };

/// Stationary Markov policy. Deterministic policies store one action per
/// state; stochastic ones a full state-by-action probability table. The
/// provenance tag records where a candidate came from (model index,
/// discount, external import) and travels through selection reports.
struct Policy {
    PolicyKind kind = PolicyKind::deterministic;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::size_t> det_actions;  // deterministic only
    std::vector<double> action_probs;      // stochastic only, n_states * n_actions
    std::string provenance_tag;

    static Policy deterministic(std::vector<std::size_t> actions, std::size_t n_actions,
                                std::string tag = "") {
        Policy p;
        p.kind = PolicyKind::deterministic;
        p.n_states = actions.size();
        p.n_actions = n_actions;
        p.det_actions = std::move(actions);
        p.provenance_tag = std::move(tag);
        for (std::size_t a : p.det_actions)
            if (a >= n_actions) throw InvalidInputError("policy: action index out of range");
        return p;
    }

    static Policy stochastic(std::vector<double> probs, std::size_t n_states,
                             std::size_t n_actions, std::string tag = "",
                             double tol = 1e-9) {
        if (probs.size() != n_states * n_actions)
            throw InvalidInputError("policy: probability table has wrong size");
        Policy p;
        p.kind = PolicyKind::stochastic;
        p.n_states = n_states;
        p.n_actions = n_actions;
        p.action_probs = std::move(probs);
        p.provenance_tag = std::move(tag);
        for (std::size_t s = 0; s < n_states; ++s) {
            double total = 0.0;
            for (std::size_t a = 0; a < n_actions; ++a) {
                double v = p.action_probs[s * n_actions + a];
                if (v < -tol || v > 1.0 + tol)
                    throw InvalidInputError("policy: action probability out of range");
                total += v;
            }
            if (std::abs(total - 1.0) > tol)
                throw InvalidInputError("policy: action probabilities do not sum to one");
        }
        return p;
    }

    double action_prob(std::size_t s, std::size_t a) const {
        if (kind == PolicyKind::deterministic) return det_actions[s] == a ? 1.0 : 0.0;
        return action_probs[s * n_actions + a];
    }

    /// True when both policies induce the same action distribution in
    /// every state. Provenance tags are ignored.
    bool same_behavior(const Policy& other, double tol = 1e-12) const {
        if (n_states != other.n_states || n_actions != other.n_actions) return false;
        if (kind == PolicyKind::deterministic && other.kind == PolicyKind::deterministic)
            return det_actions == other.det_actions;
        for (std::size_t s = 0; s < n_states; ++s)
            for (std::size_t a = 0; a < n_actions; ++a)
                if (std::abs(action_prob(s, a) - other.action_prob(s, a)) > tol) return false;
        return true;
    }
};

/// State values together with the discount they were computed under.
struct ValueVector {
    std::vector<double> values;
    double discount = 0.0;
};

enum class EvalMethod { automatic, direct, iterative };

struct EvalOptions {
    EvalMethod method = EvalMethod::automatic;
    double residual_tol = 1e-10;     // iterative stop: max-norm Bellman residual
    std::size_t max_sweeps = 100000; // iterative iteration cap
    std::size_t direct_state_cap = 1000; // automatic: direct solve up to this size
};

namespace detail {

/// Policy-averaged transition matrix and reward vector.
inline void induced_chain(const TabularMdp& mdp, const Policy& policy,
                          Eigen::MatrixXd& P, Eigen::VectorXd& r) {
    const auto S = static_cast<Eigen::Index>(mdp.n_states);
    P.setZero(S, S);
    r.setZero(S);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (policy.kind == PolicyKind::deterministic) {
            std::size_t a = policy.det_actions[s];
            const double* row = mdp.row(s, a);
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
                P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) = row[s2];
            r(static_cast<Eigen::Index>(s)) = mdp.reward(s, a);
        } else {
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                double w = policy.action_prob(s, a);
                if (w == 0.0) continue;
                const double* row = mdp.row(s, a);
                for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
                    P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) +=
                        w * row[s2];
                r(static_cast<Eigen::Index>(s)) += w * mdp.reward(s, a);
            }
        }
    }
}

} // namespace detail

/// Exact discounted state values of a fixed policy.
///
/// Direct mode solves (I - gamma P_pi) v = r_pi by LU factorization,
/// which is well posed for gamma < 1 because the matrix is strictly
/// diagonally dominant. Iterative mode applies Bellman sweeps until the
/// max-norm residual drops below residual_tol and throws
/// SolverFailureError at the sweep cap. Automatic picks direct for
/// state counts up to direct_state_cap.
inline ValueVector policy_evaluation(const TabularMdp& mdp, const Policy& policy,
                                     double gamma, const EvalOptions& options = {}) {
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw InvalidInputError("policy_evaluation: discount must lie in [0, 1)");
    if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
        throw InvalidInputError("policy_evaluation: policy shape does not match model");

    EvalMethod method = options.method;
    if (method == EvalMethod::automatic)
        method = mdp.n_states <= options.direct_state_cap ? EvalMethod::direct
                                                          : EvalMethod::iterative;

    Eigen::MatrixXd P;
    Eigen::VectorXd r;
    detail::induced_chain(mdp, policy, P, r);
    const auto S = static_cast<Eigen::Index>(mdp.n_states);

    ValueVector out;
    out.discount = gamma;
    out.values.resize(mdp.n_states);

    if (method == EvalMethod::direct) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - gamma * P;
        Eigen::VectorXd v = A.partialPivLu().solve(r);
        for (Eigen::Index i = 0; i < S; ++i) out.values[static_cast<std::size_t>(i)] = v(i);
        return out;
    }

    Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
    for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
        Eigen::VectorXd next = r + gamma * (P * v);
        double residual = (next - v).lpNorm<Eigen::Infinity>();
        v = next;
        if (residual <= options.residual_tol) {
            for (Eigen::Index i = 0; i < S; ++i)
                out.values[static_cast<std::size_t>(i)] = v(i);
            return out;
        }
    }
    throw SolverFailureError("policy_evaluation: sweep cap reached before residual_tol");
}

/// Scalar performance: initial-distribution-weighted value.
inline double performance(const TabularMdp& mdp, const ValueVector& values) {
    if (values.values.size() != mdp.n_states)
        throw InvalidInputError("performance: value vector has wrong size");
    double total = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        total += mdp.initial_dist[s] * values.values[s];
    return total;
}

inline double performance(const TabularMdp& mdp, const Policy& policy, double gamma,
                          const EvalOptions& options = {}) {
    return performance(mdp, policy_evaluation(mdp, policy, gamma, options));
}

/// Howard policy iteration from the all-zeros policy. Greedy
/// improvement breaks ties toward the lowest action index, so the
/// returned optimum is unique for a given model. Throws
/// SolverFailureError if the improvement loop fails to settle within
/// max_iterations (which cannot happen for exact evaluation, but guards
/// against NaN-poisoned inputs).
inline Policy policy_iteration(const TabularMdp& mdp, double gamma,
                               std::size_t max_iterations = 1000,
                               const EvalOptions& options = {}) {
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw InvalidInputError("policy_iteration: discount must lie in [0, 1)");
    Policy current = Policy::deterministic(std::vector<std::size_t>(mdp.n_states, 0),
                                           mdp.n_actions);
    std::vector<double> q(mdp.n_actions);
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        ValueVector values = policy_evaluation(mdp, current, gamma, options);
        bool changed = false;
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                double acc = mdp.reward(s, a);
                const double* row = mdp.row(s, a);
                for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
                    acc += gamma * row[s2] * values.values[s2];
                q[a] = acc;
            }
            // Greedy action, exact ties to the lowest index. The switch
            // itself needs strict improvement so fp noise cannot cycle.
            std::size_t greedy = 0;
            for (std::size_t a = 1; a < mdp.n_actions; ++a)
                if (q[a] > q[greedy]) greedy = a;
            if (q[greedy] > q[current.det_actions[s]] + 1e-12) {
                current.det_actions[s] = greedy;
                changed = true;
            }
        }
        if (!changed) return current;
    }
    throw SolverFailureError("policy_iteration: no fixed point within iteration cap");
}

} // namespace evc
