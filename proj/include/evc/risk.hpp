#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "evc/errors.hpp"
#include "evc/parallel.hpp"
#include "evc/posterior.hpp"
#include "evc/rng.hpp"

namespace evc {

enum class RiskMeasure { var, cvar };

/// Knobs for the confident quantile estimator.
struct RiskSpec {
    double q = 0.25;         // quantile level in (0, 1)
    double alpha = 0.01;     // bracket miss probability in (0, 1)
    double eps_rel = 0.01;   // stop when bracket width < eps_rel * sample range
    std::size_t k = 100;     // samples added per refinement round
    std::size_t max_samples = 10000; // bail-out budget
    RiskMeasure measure = RiskMeasure::var;

    void validate() const {
        if (!(q > 0.0) || !(q < 1.0))
            throw InvalidInputError("risk: q must lie in (0, 1)");
        if (!(alpha > 0.0) || !(alpha < 1.0))
            throw InvalidInputError("risk: alpha must lie in (0, 1)");
        if (!(eps_rel >= 0.0))
            throw InvalidInputError("risk: eps_rel must be nonnegative");
        if (k < 1) throw InvalidInputError("risk: k must be at least 1");
        if (max_samples < std::max<std::size_t>(k, 2))
            throw InvalidInputError("risk: max_samples must be >= max(k, 2)");
    }
};

/// Order-statistic bracket [g, h]: with probability > 1 - alpha the true
/// q-quantile lies in [u_(g), u_(h)). One-based ranks, 1 <= g < h <= L.
struct Bracket {
    std::size_t g = 0;
    std::size_t h = 0;
};

/// One-based rank of the empirical q-quantile, clamped into [1, L].
/// The small slack absorbs products like 0.1 * 500 landing a hair above
/// their exact value.
inline std::size_t quantile_rank(std::size_t L, double q) {
    double raw = std::ceil(q * static_cast<double>(L) - 1e-9);
    if (raw < 1.0) return 1;
    if (raw > static_cast<double>(L)) return L;
    return static_cast<std::size_t>(raw);
}

namespace detail {

/// Extends cache so cache[i] == lgamma(i + 1) for i <= n.
inline void grow_lgamma_cache(std::vector<double>& cache, std::size_t n) {
    if (cache.empty()) cache.push_back(0.0); // lgamma(1)
    while (cache.size() <= n)
        cache.push_back(std::lgamma(static_cast<double>(cache.size()) + 1.0));
}

} // namespace detail

/// Narrowest pair of order-statistic ranks (g, h) whose Binomial(L, q)
/// mass sum_{i=g}^{h-1} C(L,i) q^i (1-q)^{L-i} exceeds 1 - alpha, which
/// makes [u_(g), u_(h)) a confidence bracket for the q-quantile.
/// Returns nullopt when even the full range 1..L-1 lacks the mass (the
/// sum excludes i = 0 and i = L by construction). Ties on width prefer
/// the window centred closest to the empirical quantile rank, then the
/// smaller g. The caller may reuse lgamma_cache across growing L.
inline std::optional<Bracket> binomial_bracket(std::size_t L, double q, double alpha,
                                               std::vector<double>& lgamma_cache) {
    if (L < 2) return std::nullopt;
    if (!(q > 0.0) || !(q < 1.0) || !(alpha > 0.0) || !(alpha < 1.0))
        throw InvalidInputError("binomial_bracket: q and alpha must lie in (0, 1)");
    detail::grow_lgamma_cache(lgamma_cache, L);

    const double log_q = std::log(q);
    const double log_1mq = std::log1p(-q);
    const double lg_L = lgamma_cache[L];
    // prefix[i] = sum of pmf over 1..i; pmf computed in log space so
    // tails of large L do not flush to zero before the window region.
    std::vector<double> prefix(L, 0.0); // index 0..L-1, prefix[0] = 0
    for (std::size_t i = 1; i <= L - 1; ++i) {
        double d = static_cast<double>(i);
        double log_pmf = lg_L - lgamma_cache[i] - lgamma_cache[L - i] + d * log_q +
                         (static_cast<double>(L) - d) * log_1mq;
        prefix[i] = prefix[i - 1] + std::exp(log_pmf);
    }

    const double need = 1.0 - alpha;
    auto window_mass = [&](std::size_t g, std::size_t h) {
        return prefix[h - 1] - prefix[g - 1];
    };

    // Two-pointer pass for the minimal width; window is ranks g..h-1.
    std::size_t best_width = 0;
    bool found = false;
    {
        std::size_t h = 1;
        for (std::size_t g = 1; g <= L - 1; ++g) {
            if (h < g + 1) h = g + 1;
            while (h <= L && !(window_mass(g, h) > need)) ++h;
            if (h > L) break; // wider windows from later g cannot help
            if (!found || h - g < best_width) {
                found = true;
                best_width = h - g;
            }
        }
    }
    if (!found) return std::nullopt;

    // Re-scan all windows of the winning width for the tie-break.
    const std::size_t centre = 2 * quantile_rank(L, q);
    std::optional<Bracket> best;
    std::size_t best_dist = 0;
    for (std::size_t g = 1; g + best_width <= L; ++g) {
        std::size_t h = g + best_width;
        if (!(window_mass(g, h) > need)) continue;
        std::size_t span = g + h;
        std::size_t dist = span > centre ? span - centre : centre - span;
        if (!best || dist < best_dist) {
            best = Bracket{g, h};
            best_dist = dist;
        }
    }
    return best;
}

inline std::optional<Bracket> binomial_bracket(std::size_t L, double q, double alpha) {
    std::vector<double> cache;
    return binomial_bracket(L, q, alpha, cache);
}

/// Outcome of one confident quantile estimation run.
struct RiskEstimate {
    double utility = 0.0;    // the risk functional estimate itself
    std::size_t g = 0;       // bracket ranks at the final sample size
    std::size_t h = 0;
    std::size_t L = 0;       // utilities drawn
    bool converged = false;  // bracket narrow enough before the budget ran out
    std::vector<double> sorted_utilities; // ascending, size L
    RiskSpec spec;           // the knobs this estimate was produced under
};

/// q-quantile of a finite distribution given explicitly by atoms and
/// probabilities: the smallest atom whose cumulative mass reaches q.
inline double exact_var(std::vector<double> atoms, std::vector<double> probs, double q) {
    if (atoms.empty() || atoms.size() != probs.size())
        throw InvalidInputError("exact_var: atoms and probs must match and be nonempty");
    if (!(q > 0.0) || !(q < 1.0))
        throw InvalidInputError("exact_var: q must lie in (0, 1)");
    std::vector<std::size_t> order(atoms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
    double acc = 0.0;
    for (std::size_t i : order) {
        acc += probs[i];
        if (acc >= q - 1e-12) return atoms[i];
    }
    return atoms[order.back()]; // fp slack in the final cumulative
}

/// Tail mean E[u | u <= VaR_q(u)]. The atom sitting at the quantile is
/// included whole and the average renormalized by the realized tail
/// mass, which is the natural discrete reading of the conditional
/// expectation.
inline double exact_cvar(std::vector<double> atoms, std::vector<double> probs, double q) {
    double var = exact_var(atoms, probs, q);
    double mass = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i] <= var) {
            mass += probs[i];
            total += probs[i] * atoms[i];
        }
    }
    return total / mass;
}

/// Lower-tail mean of the g smallest sorted utilities.
inline double cvar_from_sorted(const std::vector<double>& sorted_utilities, std::size_t g) {
    if (g < 1 || g > sorted_utilities.size())
        throw InvalidInputError("cvar_from_sorted: rank out of range");
    double total = 0.0;
    for (std::size_t i = 0; i < g; ++i) total += sorted_utilities[i];
    return total / static_cast<double>(g);
}

/// Confident quantile estimation over an indexed sampler.
///
/// Draws utilities in rounds of spec.k (sampler(j) must be a pure
/// function of the index j so rounds can run across threads), keeps the
/// pool sorted, and after each round computes the binomial bracket at
/// the current pool size L. Stops once the bracket value width
/// u_(h) - u_(g) drops below eps_rel * (u_(L) - u_(1)), or at
/// max_samples with converged = false. If the budget runs out before
/// any bracket exists, a width-one window at the empirical quantile
/// rank is reported so downstream consumers always see valid ranks.
///
/// The reported utility is u_(g) for VaR (the conservative bracket
/// edge backed by the coverage guarantee) and the mean of the g
/// smallest utilities for CVaR.
template <typename Sampler>
RiskEstimate confident_quantile(Sampler&& sampler, const RiskSpec& spec,
                                std::size_t n_threads = 1) {
    spec.validate();

    RiskEstimate est;
    est.spec = spec;
    std::vector<double>& pool = est.sorted_utilities;
    pool.reserve(spec.max_samples);
    std::vector<double> fresh;
    std::vector<double> lgamma_cache;
    std::optional<Bracket> bracket;

    while (pool.size() < spec.max_samples) {
        std::size_t next_size = std::min(pool.size() + spec.k, spec.max_samples);
        std::size_t begin = pool.size();
        fresh.resize(next_size - begin);
        parallel_for(fresh.size(), n_threads,
                     [&](std::size_t i) { fresh[i] = sampler(begin + i); });
        std::sort(fresh.begin(), fresh.end());
        std::size_t mid = pool.size();
        pool.insert(pool.end(), fresh.begin(), fresh.end());
        std::inplace_merge(pool.begin(),
                           pool.begin() + static_cast<std::ptrdiff_t>(mid), pool.end());

        std::size_t L = pool.size();
        bracket = binomial_bracket(L, spec.q, spec.alpha, lgamma_cache);
        if (bracket) {
            double range = pool.back() - pool.front();
            double width = pool[bracket->h - 1] - pool[bracket->g - 1];
            if (range == 0.0 || width < spec.eps_rel * range) {
                est.converged = true;
                break;
            }
        }
    }

    est.L = pool.size();
    if (!bracket) {
        std::size_t g = std::min(quantile_rank(est.L, spec.q), est.L - 1);
        bracket = Bracket{g, g + 1};
    }
    est.g = bracket->g;
    est.h = bracket->h;
    est.utility = spec.measure == RiskMeasure::var ? pool[est.g - 1]
                                                   : cvar_from_sorted(pool, est.g);
    return est;
}

/// Risk functional of a policy's performance under the posterior.
/// Model draws are keyed by (policy_seed, model index), so the utility
/// sequence for a policy is reproducible regardless of threading.
inline RiskEstimate risk_evaluation(const Policy& policy, const DirichletPosterior& posterior,
                                    double gamma_ev, const RiskSpec& spec,
                                    std::uint64_t policy_seed, std::size_t n_threads = 1) {
    return confident_quantile(
        [&](std::size_t j) {
            return posterior.sampled_performance(
                derive_seed(policy_seed, stream::kModel, j), policy, gamma_ev);
        },
        spec, n_threads);
}

/// Sharpened lower-tail mean: rejection-sample models until n_keep
/// performances land at or below var_threshold and average them. The
/// acceptance region has posterior mass about q when var_threshold
/// estimates the q-quantile, so the default budget of 50 draws per kept
/// sample is far beyond the expected 1/q. Throws EstimationFailureError
/// when the budget runs out, which signals var_threshold sits in a
/// near-empty tail.
template <typename Sampler>
double refine_tail_mean(Sampler&& sampler, double var_threshold, std::size_t n_keep,
                        std::size_t max_attempts = 0) {
    if (n_keep < 1) throw InvalidInputError("refine_tail_mean: n_keep must be >= 1");
    if (max_attempts == 0) max_attempts = 50 * n_keep;
    double total = 0.0;
    std::size_t kept = 0;
    for (std::size_t j = 0; j < max_attempts && kept < n_keep; ++j) {
        double u = sampler(j);
        if (u <= var_threshold) {
            total += u;
            ++kept;
        }
    }
    if (kept < n_keep)
        throw EstimationFailureError("refine_tail_mean: attempt budget exhausted");
    return total / static_cast<double>(n_keep);
}

inline double cvar_refine(const Policy& policy, const DirichletPosterior& posterior,
                          double gamma_ev, double var_threshold, std::size_t n_keep,
                          std::uint64_t seed, std::size_t max_attempts = 0) {
    return refine_tail_mean(
        [&](std::size_t j) {
            return posterior.sampled_performance(
                derive_seed(seed, stream::kRefine, j), policy, gamma_ev);
        },
        var_threshold, n_keep, max_attempts);
}

} // namespace evc
