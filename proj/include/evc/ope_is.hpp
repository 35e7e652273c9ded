#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "evc/batch.hpp"
#include "evc/errors.hpp"
#include "evc/mdp.hpp"
#include "evc/risk.hpp"

namespace evc {

/// Trajectory importance ratio prod_t pi(s_t, a_t) / pi_beta(s_t, a_t).
/// Throws InvalidInputError if the behavior policy assigns zero
/// probability to any logged action: such data cannot have come from
/// pi_beta and every reweighting built on it is meaningless. For a
/// deterministic target under uniform behavior the product collapses
/// to |A|^n on a trajectory the target would replay exactly, and 0
/// otherwise.
inline double importance_ratio(const Trajectory& trajectory, const Policy& target,
                               const Policy& behavior) {
    double ratio = 1.0;
    for (const TransitionStep& step : trajectory.steps) {
        double b = behavior.action_prob(step.s, step.a);
        if (b <= 0.0)
            throw InvalidInputError(
                "importance_ratio: behavior policy excludes a logged action");
        ratio *= target.action_prob(step.s, step.a) / b;
    }
    return ratio;
}

inline double discounted_return(const Trajectory& trajectory, double gamma) {
    double total = 0.0;
    double weight = 1.0;
    for (const TransitionStep& step : trajectory.steps) {
        total += weight * step.r;
        weight *= gamma;
    }
    return total;
}

/// Off-policy risk estimate from importance-weighted returns.
struct OffPolicyEstimate {
    double value = 0.0;
    bool degenerate = false; // no trajectory carried positive weight
};

/// Self-normalized importance-sampling estimate of a return quantile
/// (or its lower-tail mean) for a target policy from logged data.
///
/// Builds the weighted empirical CDF over per-trajectory discounted
/// returns: VaR_q is the smallest return whose cumulative normalized
/// weight reaches q; CVaR_q averages the returns at or below VaR_q
/// under the same weights. With a deterministic target, weights are
/// nonzero only on trajectories the target reproduces, and short
/// batches often have none; the estimate then falls back to the
/// pessimistic value floor_reward / (1 - gamma) and is flagged
/// degenerate. floor_reward defaults to the smallest reward observed
/// in the batch.
inline OffPolicyEstimate off_policy_risk(const TransitionBatch& batch, const Policy& target,
                                         const Policy& behavior, double gamma, double q,
                                         RiskMeasure measure,
                                         std::optional<double> floor_reward = std::nullopt) {
    if (batch.trajectories.empty())
        throw InvalidInputError("off_policy_risk: empty batch");
    if (!(q > 0.0) || !(q < 1.0))
        throw InvalidInputError("off_policy_risk: q must lie in (0, 1)");
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw InvalidInputError("off_policy_risk: discount must lie in [0, 1)");

    std::vector<double> returns;
    std::vector<double> weights;
    returns.reserve(batch.trajectories.size());
    weights.reserve(batch.trajectories.size());
    double total_weight = 0.0;
    double min_reward = std::numeric_limits<double>::infinity();
    for (const Trajectory& trajectory : batch.trajectories) {
        returns.push_back(discounted_return(trajectory, gamma));
        weights.push_back(importance_ratio(trajectory, target, behavior));
        total_weight += weights.back();
        for (const TransitionStep& step : trajectory.steps)
            min_reward = std::min(min_reward, step.r);
    }

    OffPolicyEstimate out;
    if (total_weight <= 0.0) {
        double floor = floor_reward.value_or(min_reward);
        out.value = floor / (1.0 - gamma);
        out.degenerate = true;
        return out;
    }

    std::vector<std::size_t> order(returns.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return returns[a] < returns[b]; });

    double var = returns[order.back()];
    double acc = 0.0;
    for (std::size_t i : order) {
        acc += weights[i] / total_weight;
        if (acc >= q - 1e-12) {
            var = returns[i];
            break;
        }
    }
    if (measure == RiskMeasure::var) {
        out.value = var;
        return out;
    }
    double tail_mass = 0.0;
    double tail_total = 0.0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        if (returns[i] <= var && weights[i] > 0.0) {
            tail_mass += weights[i];
            tail_total += weights[i] * returns[i];
        }
    }
    out.value = tail_total / tail_mass;
    return out;
}

/// Result of picking the best candidate by off-policy risk.
struct OffPolicySelection {
    std::size_t winner_index = 0;
    std::vector<OffPolicyEstimate> estimates;
    bool all_degenerate = false;
};

/// Ranks candidates by their off-policy risk estimate, highest value
/// first. Degenerate estimates compete with their fallback value.
/// Whenever the maximum is not unique (which includes the everything-
/// degenerate case, since all fallbacks coincide) the selection drops
/// to the first candidate: the data cannot separate the leaders, and
/// the candidate list is ordered so that index 0 carries the most
/// direct evidence.
inline OffPolicySelection off_policy_select(const std::vector<Policy>& candidates,
                                            const TransitionBatch& batch,
                                            const Policy& behavior, double gamma, double q,
                                            RiskMeasure measure) {
    if (candidates.empty())
        throw InvalidInputError("off_policy_select: no candidates");
    OffPolicySelection out;
    out.estimates.reserve(candidates.size());
    for (const Policy& candidate : candidates)
        out.estimates.push_back(
            off_policy_risk(batch, candidate, behavior, gamma, q, measure));

    out.all_degenerate = true;
    for (const OffPolicyEstimate& est : out.estimates)
        if (!est.degenerate) out.all_degenerate = false;

    std::size_t best = 0;
    std::size_t ties = 0;
    for (std::size_t i = 0; i < out.estimates.size(); ++i) {
        if (out.estimates[i].value > out.estimates[best].value) {
            best = i;
            ties = 1;
        } else if (out.estimates[i].value == out.estimates[best].value) {
            ++ties;
        }
    }
    out.winner_index = ties > 1 ? 0 : best;
    return out;
}

} // namespace evc
