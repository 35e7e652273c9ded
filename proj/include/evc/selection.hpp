#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

#include "evc/errors.hpp"
#include "evc/mdp.hpp"
#include "evc/posterior.hpp"
#include "evc/risk.hpp"
#include "evc/rng.hpp"

namespace evc {

/// Ordered, duplicate-free list of candidate policies. Two candidates
/// are duplicates when they induce the same action distribution in
/// every state (deterministic: identical action maps; stochastic:
/// elementwise within 1e-12). Insertion keeps the first occurrence, so
/// provenance tags record the earliest origin of each behavior.
class CandidateSet {
  public:
    /// Appends unless an equivalent policy is already present. Returns
    /// true when the policy was added.
    bool add(Policy policy) {
        for (const Policy& existing : policies_)
            if (existing.same_behavior(policy)) return false;
        policies_.push_back(std::move(policy));
        return true;
    }

    /// Wraps a raw list without dedup. Exists so callers can study how
    /// duplicates behave downstream; normal construction goes through
    /// add().
    static CandidateSet unchecked(std::vector<Policy> policies) {
        CandidateSet set;
        set.policies_ = std::move(policies);
        return set;
    }

    const std::vector<Policy>& policies() const { return policies_; }
    std::size_t size() const { return policies_.size(); }
    bool empty() const { return policies_.empty(); }
    const Policy& operator[](std::size_t i) const { return policies_[i]; }

  private:
    std::vector<Policy> policies_;
};

namespace detail {

inline std::string format_double_tag(double value) {
    char buffer[32];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc())
        throw InvalidInputError("format_double_tag: value not representable");
    return std::string(buffer, end);
}

} // namespace detail

/// Provenance tag vocabulary: candidate 0 is always tagged "mle"; the
/// discount-sweep candidates are "gamma=<g>/model=<j>" with j = "mle"
/// for the count-frequency model or the 1-based sample index;
/// externally supplied policies get "imported:<tag>".
inline bool is_imported_tag(const std::string& tag) {
    return tag.rfind("imported:", 0) == 0;
}

/// Builds the candidate set: the most-likely-model policy under the
/// evaluation discount first (the baseline every report is anchored
/// to), then the policy of each model in {count-frequency model,
/// l posterior draws} under each discount in G, then the external
/// imports, all deduplicated in that order.
///
/// Discounts above gamma_ev are rejected: candidates must stay
/// comparable under the evaluation discount, and a sweep discount
/// beyond it would not be a conservative shortening of the horizon.
/// Model draw j uses derive_seed(seed, stream::kModel, j), matching the
/// keying used everywhere else for posterior draws.
inline CandidateSet generate_policies(const DirichletPosterior& posterior,
                                      std::vector<double> G, std::size_t l,
                                      const std::vector<Policy>& external,
                                      double gamma_ev, std::uint64_t seed) {
    if (!(gamma_ev > 0.0) || gamma_ev >= 1.0)
        throw InvalidInputError("generate_policies: gamma_ev must lie in (0, 1)");
    std::sort(G.begin(), G.end());
    G.erase(std::unique(G.begin(), G.end()), G.end());
    for (double gamma : G) {
        if (!(gamma > 0.0) || gamma >= 1.0)
            throw InvalidInputError("generate_policies: discounts must lie in (0, 1)");
        if (gamma > gamma_ev)
            throw InvalidInputError(
                "generate_policies: sweep discount exceeds evaluation discount");
    }

    CandidateSet candidates;

    std::vector<TabularMdp> models;
    models.reserve(l + 1);
    models.push_back(posterior.mode_model());
    for (std::size_t j = 1; j <= l; ++j)
        models.push_back(posterior.sample_model(derive_seed(seed, stream::kModel, j)));

    {
        Policy baseline = policy_iteration(models[0], gamma_ev);
        baseline.provenance_tag = "mle";
        candidates.add(std::move(baseline));
    }
    for (std::size_t j = 0; j < models.size(); ++j) {
        for (double gamma : G) {
            if (j == 0 && gamma == gamma_ev) continue; // already in as the baseline
            Policy policy = policy_iteration(models[j], gamma);
            policy.provenance_tag = "gamma=" + detail::format_double_tag(gamma) +
                                    "/model=" + (j == 0 ? "mle" : std::to_string(j));
            candidates.add(std::move(policy));
        }
    }
    for (const Policy& ext : external) {
        Policy copy = ext;
        if (!is_imported_tag(copy.provenance_tag))
            copy.provenance_tag = "imported:" +
                                  (copy.provenance_tag.empty() ? std::string("external")
                                                               : copy.provenance_tag);
        candidates.add(std::move(copy));
    }
    return candidates;
}

/// Outcome of risk-ranked policy selection.
struct SelectionReport {
    std::vector<Policy> policies;       // candidate order preserved
    std::vector<RiskEstimate> estimates; // aligned with policies
    std::size_t winner_index = 0;
    std::size_t total_models_sampled = 0; // sum of per-policy L
    std::size_t n_nonconverged = 0;

    const Policy& winner() const { return policies[winner_index]; }
};

/// Evaluates every candidate's risk functional under the posterior and
/// returns the maximizer; ties break toward the earliest candidate.
/// Candidates whose estimate hit the sample budget before the bracket
/// narrowed still compete with their best-effort value, and the report
/// counts them. Per-candidate seeds derive from (seed, candidate
/// index), so growing the candidate list never perturbs earlier
/// estimates.
inline SelectionReport select_policy(const CandidateSet& candidates,
                                     const DirichletPosterior& posterior, double gamma_ev,
                                     const RiskSpec& spec, std::uint64_t seed,
                                     std::size_t n_threads = 1) {
    if (candidates.empty())
        throw InvalidInputError("select_policy: empty candidate set");
    SelectionReport report;
    report.policies = candidates.policies();
    report.estimates.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        report.estimates.push_back(risk_evaluation(
            candidates[i], posterior, gamma_ev, spec,
            derive_seed(seed, stream::kPolicy, i), n_threads));
        report.total_models_sampled += report.estimates.back().L;
        if (!report.estimates.back().converged) ++report.n_nonconverged;
    }
    for (std::size_t i = 1; i < report.estimates.size(); ++i)
        if (report.estimates[i].utility > report.estimates[report.winner_index].utility)
            report.winner_index = i;
    return report;
}

/// Full offline pipeline: transition counts from the batch, posterior
/// with the environment's known reward/start/terminal structure,
/// candidate generation, then risk-ranked selection. Deterministic
/// given (batch, spec, seed).
inline SelectionReport select_from_batch(const TransitionBatch& batch,
                                         const TabularMdp& known_structure,
                                         const std::vector<double>& G, std::size_t l,
                                         const std::vector<Policy>& external,
                                         const RiskSpec& spec, double gamma_ev,
                                         std::uint64_t seed, std::size_t n_threads = 1) {
    DirichletPosterior posterior = DirichletPosterior::from_batch(batch, known_structure);
    CandidateSet candidates =
        generate_policies(posterior, G, l, external, gamma_ev, seed);
    return select_policy(candidates, posterior, gamma_ev, spec, seed, n_threads);
}

} // namespace evc
