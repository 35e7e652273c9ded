#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evc/batch.hpp"
#include "evc/envs.hpp"
#include "evc/errors.hpp"
#include "evc/harness.hpp"
#include "evc/io.hpp"
#include "evc/ope_is.hpp"
#include "evc/parallel.hpp"
#include "evc/posterior.hpp"
#include "evc/risk.hpp"
#include "evc/selection.hpp"

namespace evc {

/// The policy-selection strategies the sweep can compare.
/// posterior_* rank candidates by the risk functional of their
/// performance under the model posterior; is_* rank them by the
/// importance-sampling off-policy estimate; mle always keeps the
/// baseline candidate.
enum class SelectorKind { posterior_var, posterior_cvar, is_var, is_cvar, mle };

inline std::string selector_to_string(SelectorKind kind) {
    switch (kind) {
        case SelectorKind::posterior_var: return "posterior_var";
        case SelectorKind::posterior_cvar: return "posterior_cvar";
        case SelectorKind::is_var: return "is_var";
        case SelectorKind::is_cvar: return "is_cvar";
        case SelectorKind::mle: return "mle";
    }
    throw InvalidInputError("selector_to_string: unknown selector");
}

inline SelectorKind selector_from_string(const std::string& text) {
    if (text == "posterior_var") return SelectorKind::posterior_var;
    if (text == "posterior_cvar") return SelectorKind::posterior_cvar;
    if (text == "is_var") return SelectorKind::is_var;
    if (text == "is_cvar") return SelectorKind::is_cvar;
    if (text == "mle") return SelectorKind::mle;
    throw InvalidInputError("unknown selector: " + text);
}

/// Full sweep description. Defaults depend on the environment; see
/// default_experiment_config.
struct ExperimentConfig {
    EnvSpec env;
    std::vector<std::size_t> batch_sizes; // total transitions N per batch
    std::size_t traj_len = 8;             // steps per episode n; N = n * m
    std::size_t batches_per_size = 100;
    RiskSpec risk;                        // measure field ignored (per-selector)
    std::vector<double> G;
    std::size_t l = 3;
    double gamma_ev = 0.9;
    std::vector<std::string> external_policy_paths;
    std::vector<SelectorKind> selectors;
    std::uint64_t seed = 0;
    std::size_t n_threads = 1;

    void validate() const {
        env.validate();
        risk.validate();
        if (batch_sizes.empty())
            throw InvalidInputError("experiment: batch_sizes must be nonempty");
        if (traj_len < 1) throw InvalidInputError("experiment: traj_len must be >= 1");
        for (std::size_t N : batch_sizes)
            if (N == 0 || N % traj_len != 0)
                throw InvalidInputError(
                    "experiment: every batch size must be a positive multiple of traj_len");
        if (batches_per_size < 1)
            throw InvalidInputError("experiment: batches_per_size must be >= 1");
        if (!(gamma_ev > 0.0) || gamma_ev >= 1.0)
            throw InvalidInputError("experiment: gamma_ev must lie in (0, 1)");
        if (G.empty()) throw InvalidInputError("experiment: G must be nonempty");
        if (selectors.empty())
            throw InvalidInputError("experiment: selectors must be nonempty");
    }
};

/// Benchmark defaults: episodes of 8 steps for the two 5-state
/// environments (batch sizes 8..56, 100 replicates), 15 for the lake
/// (15..135, 50 replicates); sweep discounts {0.2, 0.4, 0.6, 0.8, 0.9}
/// with 3 or 10 sampled models; risk level 0.25 at confidence 0.99.
inline ExperimentConfig default_experiment_config(const EnvSpec& env) {
    ExperimentConfig config;
    config.env = env;
    config.G = {0.2, 0.4, 0.6, 0.8, 0.9};
    config.gamma_ev = 0.9;
    config.risk.q = 0.25;
    config.risk.alpha = 0.01;
    config.risk.eps_rel = 0.01;
    config.risk.k = 100;
    config.risk.max_samples = 10000;
    config.selectors = {SelectorKind::posterior_var, SelectorKind::posterior_cvar,
                        SelectorKind::is_var, SelectorKind::is_cvar, SelectorKind::mle};
    if (env.name == EnvName::rfl) {
        config.traj_len = 15;
        config.l = 10;
        config.batches_per_size = 50;
        config.batch_sizes = {15, 30, 45, 60, 75, 90, 105, 120, 135};
    } else {
        config.traj_len = 8;
        config.l = 3;
        config.batches_per_size = 100;
        config.batch_sizes = {8, 16, 24, 32, 40, 48, 56};
    }
    return config;
}

inline EnvSpec env_spec_from_kv(const KeyValueConfig& kv) {
    EnvSpec env;
    env.name = env_name_from_string(kv.get_string("env", "ring"));
    env.grid_size = static_cast<std::size_t>(kv.get_u64("grid_size", env.grid_size));
    env.slip_prob = kv.get_double("slip_prob", env.slip_prob);
    env.map_seed = kv.get_u64("map_seed", env.map_seed);
    env.reward_seed = kv.get_u64("reward_seed", env.reward_seed);
    return env;
}

/// Builds a config from flat key-value text, starting from the
/// environment's defaults. Recognized keys: env, grid_size, slip_prob,
/// map_seed, reward_seed, batch_sizes, traj_len, batches_per_size, q,
/// alpha, eps_rel, k, max_samples, G, l, gamma_ev, external_policies,
/// selectors, seed, threads.
inline ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv) {
    EnvSpec env = env_spec_from_kv(kv);
    ExperimentConfig defaults = default_experiment_config(env);

    ExperimentConfig config = defaults;
    config.env = env;
    std::vector<std::uint64_t> sizes;
    for (std::size_t N : defaults.batch_sizes) sizes.push_back(N);
    sizes = kv.get_u64_list("batch_sizes", sizes);
    config.batch_sizes.clear();
    for (std::uint64_t N : sizes) config.batch_sizes.push_back(static_cast<std::size_t>(N));
    config.traj_len = static_cast<std::size_t>(kv.get_u64("traj_len", defaults.traj_len));
    config.batches_per_size = static_cast<std::size_t>(
        kv.get_u64("batches_per_size", defaults.batches_per_size));
    config.risk.q = kv.get_double("q", defaults.risk.q);
    config.risk.alpha = kv.get_double("alpha", defaults.risk.alpha);
    config.risk.eps_rel = kv.get_double("eps_rel", defaults.risk.eps_rel);
    config.risk.k = static_cast<std::size_t>(kv.get_u64("k", defaults.risk.k));
    config.risk.max_samples = static_cast<std::size_t>(
        kv.get_u64("max_samples", defaults.risk.max_samples));
    config.G = kv.get_double_list("G", defaults.G);
    config.l = static_cast<std::size_t>(kv.get_u64("l", defaults.l));
    config.gamma_ev = kv.get_double("gamma_ev", defaults.gamma_ev);
    config.external_policy_paths = kv.get_string_list("external_policies", {});
    config.selectors.clear();
    std::vector<std::string> selector_names;
    for (SelectorKind kind : defaults.selectors)
        selector_names.push_back(selector_to_string(kind));
    for (const std::string& name : kv.get_string_list("selectors", selector_names))
        config.selectors.push_back(selector_from_string(name));
    config.seed = kv.get_u64("seed", defaults.seed);
    config.n_threads = static_cast<std::size_t>(kv.get_u64("threads", defaults.n_threads));
    return config;
}

/// Aggregated sweep results for one (selector, batch size) pair;
/// batch size 0 pools every cell of that selector.
struct MetricsRow {
    std::string selector;
    std::size_t N = 0; // 0 = pooled over all sizes
    std::size_t n_cells = 0;
    std::size_t n_failed = 0;
    double du_max = 0.0;
    double du_mean = 0.0;
    double du_median = 0.0;
    double du_min = 0.0;
    double share_mle = 0.0;
    double share_gamma_sweep = 0.0;
    double share_imported = 0.0;
};

namespace detail {

enum class ProvenanceClass { mle, gamma_sweep, imported };

inline ProvenanceClass classify_tag(const std::string& tag) {
    if (tag == "mle") return ProvenanceClass::mle;
    if (is_imported_tag(tag)) return ProvenanceClass::imported;
    return ProvenanceClass::gamma_sweep;
}

struct CellOutcome {
    bool failed = false;
    // per configured selector, in config order:
    std::vector<double> delta_u;
    std::vector<ProvenanceClass> winner_class;
};

inline MetricsRow summarize(const std::string& selector, std::size_t N,
                            std::vector<double> deltas,
                            const std::vector<ProvenanceClass>& classes,
                            std::size_t n_failed) {
    MetricsRow row;
    row.selector = selector;
    row.N = N;
    row.n_cells = deltas.size() + n_failed;
    row.n_failed = n_failed;
    if (!deltas.empty()) {
        std::sort(deltas.begin(), deltas.end());
        row.du_min = deltas.front();
        row.du_max = deltas.back();
        double total = 0.0;
        for (double d : deltas) total += d;
        row.du_mean = total / static_cast<double>(deltas.size());
        std::size_t mid = deltas.size() / 2;
        row.du_median = deltas.size() % 2 == 1
                            ? deltas[mid]
                            : 0.5 * (deltas[mid - 1] + deltas[mid]);
        double n = static_cast<double>(classes.size());
        std::size_t mle_count = 0, sweep_count = 0, imported_count = 0;
        for (ProvenanceClass c : classes) {
            if (c == ProvenanceClass::mle) ++mle_count;
            else if (c == ProvenanceClass::gamma_sweep) ++sweep_count;
            else ++imported_count;
        }
        row.share_mle = static_cast<double>(mle_count) / n;
        row.share_gamma_sweep = static_cast<double>(sweep_count) / n;
        row.share_imported = static_cast<double>(imported_count) / n;
    }
    return row;
}

} // namespace detail

struct ExperimentResult {
    std::vector<MetricsRow> rows; // per-(selector, N) first, then pooled per selector
};

/// Runs the full sweep: for every (batch size, replicate) cell, collect
/// a batch, build the posterior and candidate set once, apply every
/// configured selector, and score each winner's performance gap on the
/// true model. Cells run via parallel_for with per-cell derived seeds,
/// so the result is identical for any thread count. A cell that throws
/// is marked failed and excluded from the statistics without stopping
/// the sweep.
inline ExperimentResult run_experiment(
    const ExperimentConfig& config, const std::vector<Policy>& external,
    const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    config.validate();
    TabularMdp true_mdp = make_env(config.env);
    Policy optimal = policy_iteration(true_mdp, config.gamma_ev);
    double u_opt = performance(true_mdp, optimal, config.gamma_ev);
    if (std::abs(u_opt) < 1e-12)
        throw InvalidInputError("experiment: optimal performance is zero");
    Policy behavior = uniform_policy(true_mdp.n_states, true_mdp.n_actions);

    const std::size_t n_sizes = config.batch_sizes.size();
    const std::size_t reps = config.batches_per_size;
    const std::size_t n_cells = n_sizes * reps;
    std::vector<detail::CellOutcome> outcomes(n_cells);

    std::atomic<std::size_t> n_done{0};
    parallel_for(n_cells, config.n_threads, [&](std::size_t cell) {
        std::size_t size_idx = cell / reps;
        std::size_t rep = cell % reps;
        detail::CellOutcome& outcome = outcomes[cell];
        try {
            std::size_t N = config.batch_sizes[size_idx];
            std::size_t m = N / config.traj_len;
            std::uint64_t cell_seed =
                derive_seed(config.seed, stream::kCell, size_idx, rep);
            TransitionBatch batch =
                collect_batch(true_mdp, m, config.traj_len, cell_seed);
            DirichletPosterior posterior =
                DirichletPosterior::from_batch(batch, true_mdp);
            CandidateSet candidates = generate_policies(
                posterior, config.G, config.l, external, config.gamma_ev, cell_seed);

            // The risk evaluation is shared between the var and cvar
            // selectors: both stop on the same bracket, they just read
            // a different functional off the sorted pool.
            bool need_posterior =
                std::any_of(config.selectors.begin(), config.selectors.end(),
                            [](SelectorKind kind) {
                                return kind == SelectorKind::posterior_var ||
                                       kind == SelectorKind::posterior_cvar;
                            });
            std::vector<RiskEstimate> estimates;
            if (need_posterior) {
                RiskSpec spec = config.risk;
                spec.measure = RiskMeasure::var;
                estimates.reserve(candidates.size());
                for (std::size_t i = 0; i < candidates.size(); ++i)
                    estimates.push_back(risk_evaluation(
                        candidates[i], posterior, config.gamma_ev, spec,
                        derive_seed(cell_seed, stream::kPolicy, i)));
            }
            auto argmax_utility = [&](RiskMeasure measure) {
                std::size_t best = 0;
                double best_value = 0.0;
                for (std::size_t i = 0; i < estimates.size(); ++i) {
                    double value = measure == RiskMeasure::var
                                       ? estimates[i].utility
                                       : cvar_from_sorted(estimates[i].sorted_utilities,
                                                          estimates[i].g);
                    if (i == 0 || value > best_value) {
                        best = i;
                        best_value = value;
                    }
                }
                return best;
            };

            double u_mle =
                performance(true_mdp, candidates[0], config.gamma_ev);
            for (SelectorKind kind : config.selectors) {
                std::size_t winner = 0;
                switch (kind) {
                    case SelectorKind::posterior_var:
                        winner = argmax_utility(RiskMeasure::var);
                        break;
                    case SelectorKind::posterior_cvar:
                        winner = argmax_utility(RiskMeasure::cvar);
                        break;
                    case SelectorKind::is_var:
                    case SelectorKind::is_cvar: {
                        OffPolicySelection sel = off_policy_select(
                            candidates.policies(), batch, behavior, config.gamma_ev,
                            config.risk.q,
                            kind == SelectorKind::is_var ? RiskMeasure::var
                                                         : RiskMeasure::cvar);
                        winner = sel.winner_index;
                        break;
                    }
                    case SelectorKind::mle:
                        winner = 0;
                        break;
                }
                double u_winner =
                    performance(true_mdp, candidates[winner], config.gamma_ev);
                outcome.delta_u.push_back((u_winner - u_mle) / u_opt);
                outcome.winner_class.push_back(
                    detail::classify_tag(candidates[winner].provenance_tag));
            }
        } catch (const std::exception&) {
            outcome.failed = true;
            outcome.delta_u.clear();
            outcome.winner_class.clear();
        }
        if (progress) progress(++n_done, n_cells);
    });

    ExperimentResult result;
    for (std::size_t sel = 0; sel < config.selectors.size(); ++sel) {
        std::string name = selector_to_string(config.selectors[sel]);
        std::vector<double> pooled_deltas;
        std::vector<detail::ProvenanceClass> pooled_classes;
        std::size_t pooled_failed = 0;
        for (std::size_t size_idx = 0; size_idx < n_sizes; ++size_idx) {
            std::vector<double> deltas;
            std::vector<detail::ProvenanceClass> classes;
            std::size_t failed = 0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                const detail::CellOutcome& outcome = outcomes[size_idx * reps + rep];
                if (outcome.failed) {
                    ++failed;
                    continue;
                }
                deltas.push_back(outcome.delta_u[sel]);
                classes.push_back(outcome.winner_class[sel]);
            }
            pooled_deltas.insert(pooled_deltas.end(), deltas.begin(), deltas.end());
            pooled_classes.insert(pooled_classes.end(), classes.begin(), classes.end());
            pooled_failed += failed;
            result.rows.push_back(detail::summarize(name, config.batch_sizes[size_idx],
                                                    std::move(deltas), classes, failed));
        }
        result.rows.push_back(
            detail::summarize(name, 0, std::move(pooled_deltas), pooled_classes,
                              pooled_failed));
    }
    return result;
}

/// Byte-stable CSV; the pooled rows print N as "all".
inline std::string metrics_to_csv(const ExperimentResult& result) {
    std::string out =
        "selector,N,n_cells,n_failed,du_max,du_mean,du_median,du_min,"
        "share_mle,share_gamma_sweep,share_imported\n";
    for (const MetricsRow& row : result.rows) {
        out += row.selector + ",";
        out += row.N == 0 ? std::string("all") : std::to_string(row.N);
        out += "," + std::to_string(row.n_cells) + "," + std::to_string(row.n_failed) +
               "," + format_double(row.du_max) + "," + format_double(row.du_mean) + "," +
               format_double(row.du_median) + "," + format_double(row.du_min) + "," +
               format_double(row.share_mle) + "," + format_double(row.share_gamma_sweep) +
               "," + format_double(row.share_imported) + "\n";
    }
    return out;
}

/// Parses rows back from metrics_to_csv output.
inline ExperimentResult metrics_from_csv(const std::string& text) {
    ExperimentResult result;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> fields;
        std::size_t begin = 0;
        while (begin <= line.size()) {
            auto comma = line.find(',', begin);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(begin));
                break;
            }
            fields.push_back(line.substr(begin, comma - begin));
            begin = comma + 1;
        }
        if (fields.size() != 11) throw IoError("metrics: row does not have 11 fields");
        MetricsRow row;
        row.selector = fields[0];
        row.N = fields[1] == "all" ? 0 : static_cast<std::size_t>(parse_u64(fields[1]));
        row.n_cells = static_cast<std::size_t>(parse_u64(fields[2]));
        row.n_failed = static_cast<std::size_t>(parse_u64(fields[3]));
        row.du_max = parse_double(fields[4]);
        row.du_mean = parse_double(fields[5]);
        row.du_median = parse_double(fields[6]);
        row.du_min = parse_double(fields[7]);
        row.share_mle = parse_double(fields[8]);
        row.share_gamma_sweep = parse_double(fields[9]);
        row.share_imported = parse_double(fields[10]);
        result.rows.push_back(std::move(row));
    }
    return result;
}

} // namespace evc
