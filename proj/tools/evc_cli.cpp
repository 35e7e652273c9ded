// Command-line frontend: batch collection, baseline solving, offline
// policy selection, the full sweep, and chart export. Every config key
// of the flat "key = value" format has a matching flag; flags win over
// the config file. All output files are byte-identical across re-runs
// with identical inputs.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evc/envs.hpp"
#include "evc/experiment.hpp"
#include "evc/harness.hpp"
#include "evc/io.hpp"
#include "evc/posterior.hpp"
#include "evc/selection.hpp"
#include "evc/svg.hpp"

namespace {

/// One --flag per config key ("--grid-size" overrides "grid_size").
class ConfigFlags {
  public:
    void attach(CLI::App* cmd, const std::vector<std::string>& keys) {
        for (const std::string& key : keys) {
            keys_.push_back(key);
            std::string flag = "--" + key;
            for (char& ch : flag)
                if (ch == '_') ch = '-';
            options_[key] =
                cmd->add_option(flag, values_[key], "override config key '" + key + "'");
        }
    }

    void apply(evc::KeyValueConfig& kv) const {
        for (const std::string& key : keys_)
            if (options_.at(key)->count() > 0) kv.set(key, values_.at(key));
    }

  private:
    std::vector<std::string> keys_;
    std::map<std::string, std::string> values_;
    std::map<std::string, CLI::Option*> options_;
};

const std::vector<std::string> kEnvKeys = {"env", "grid_size", "slip_prob", "map_seed",
                                           "reward_seed"};
const std::vector<std::string> kSelectKeys = {
    "q",  "alpha",    "eps_rel",           "k",         "max_samples", "measure",
    "G",  "l",        "external_policies", "gamma_ev",  "seed",        "threads"};
const std::vector<std::string> kExperimentKeys = {
    "batch_sizes", "traj_len", "batches_per_size", "q",        "alpha",
    "eps_rel",     "k",        "max_samples",      "G",        "l",
    "gamma_ev",    "external_policies",            "selectors", "seed",
    "threads"};

std::vector<evc::Policy> load_external_policies(const std::vector<std::string>& paths) {
    std::vector<evc::Policy> policies;
    policies.reserve(paths.size());
    for (const std::string& path : paths) policies.push_back(evc::read_policy_file(path));
    return policies;
}

evc::KeyValueConfig load_config(const std::string& config_path, const ConfigFlags& flags) {
    evc::KeyValueConfig kv;
    if (!config_path.empty()) kv = evc::KeyValueConfig::parse_file(config_path);
    flags.apply(kv);
    return kv;
}

int run_collect(const std::string& config_path, const ConfigFlags& flags, std::size_t m,
                std::size_t n, std::uint64_t seed, const std::string& out_path,
                const std::string& map_out) {
    evc::KeyValueConfig kv = load_config(config_path, flags);
    evc::StoredBatch stored;
    stored.env = evc::env_spec_from_kv(kv);
    stored.m = m;
    stored.n = n;
    stored.seed = seed;
    evc::TabularMdp mdp = evc::make_env(stored.env);
    stored.batch = evc::collect_batch(mdp, m, n, seed);
    evc::write_batch_file(out_path, stored);
    if (!map_out.empty()) {
        if (stored.env.name != evc::EnvName::rfl)
            throw evc::InvalidInputError("--map-out only applies to the rfl environment");
        evc::write_text_file(map_out, evc::generate_lake_map(stored.env).to_text());
    }
    return 0;
}

int run_solve_trivial(const std::string& batch_path, double gamma,
                      const std::string& out_path, const std::string& counts_out) {
    evc::StoredBatch stored = evc::read_batch_file(batch_path);
    evc::TabularMdp structure = evc::make_env(stored.env);
    evc::DirichletPosterior posterior =
        evc::DirichletPosterior::from_batch(stored.batch, structure);
    if (!counts_out.empty()) {
        nlohmann::json j = evc::counts_to_json(posterior.counts);
        j["env"] = evc::env_name_string(stored.env.name);
        j["grid_size"] = stored.env.grid_size;
        j["slip_prob"] = stored.env.slip_prob;
        j["map_seed"] = stored.env.map_seed;
        j["reward_seed"] = stored.env.reward_seed;
        j["m"] = stored.m;
        j["n"] = stored.n;
        j["seed"] = stored.seed;
        evc::write_text_file(counts_out, j.dump(2) + "\n");
    }
    evc::Policy policy = evc::policy_iteration(posterior.mode_model(), gamma);
    policy.provenance_tag = "mle";
    evc::write_policy_file(out_path, policy);
    return 0;
}

int run_select(const std::string& batch_path, const std::string& config_path,
               const ConfigFlags& flags, const std::string& report_out,
               const std::string& csv_out) {
    evc::StoredBatch stored = evc::read_batch_file(batch_path);
    evc::KeyValueConfig kv = load_config(config_path, flags);
    // The batch knows which environment produced it; the config only
    // contributes algorithm knobs.
    kv.set("env", evc::env_name_string(stored.env.name));
    kv.set("grid_size", std::to_string(stored.env.grid_size));
    kv.set("slip_prob", evc::format_double(stored.env.slip_prob));
    kv.set("map_seed", std::to_string(stored.env.map_seed));
    kv.set("reward_seed", std::to_string(stored.env.reward_seed));
    evc::ExperimentConfig config = evc::experiment_config_from_kv(kv);
    evc::RiskSpec spec = config.risk;
    spec.measure = evc::measure_from_string(kv.get_string("measure", "var"));

    evc::TabularMdp structure = evc::make_env(config.env);
    std::vector<evc::Policy> external =
        load_external_policies(config.external_policy_paths);
    evc::SelectionReport report =
        evc::select_from_batch(stored.batch, structure, config.G, config.l, external,
                               spec, config.gamma_ev, config.seed, config.n_threads);
    if (!report_out.empty())
        evc::write_text_file(report_out,
                             evc::report_to_json(report, config.gamma_ev, spec).dump(2) +
                                 "\n");
    if (!csv_out.empty())
        evc::write_text_file(csv_out, evc::report_to_csv(report, spec));
    std::printf("winner %zu %s\n", report.winner_index,
                report.winner().provenance_tag.c_str());
    return 0;
}

int run_experiment_cmd(const evc::KeyValueConfig& kv, const std::string& out_dir) {
    evc::ExperimentConfig config = evc::experiment_config_from_kv(kv);
    std::vector<evc::Policy> external =
        load_external_policies(config.external_policy_paths);

    std::filesystem::create_directories(out_dir);
    std::string resolved;
    for (const auto& [key, value] : kv.values()) resolved += key + " = " + value + "\n";
    evc::write_text_file(out_dir + "/config_resolved.txt", resolved);

    evc::ExperimentResult result = evc::run_experiment(
        config, external, [](std::size_t done, std::size_t total) {
            std::size_t step = total / 20 == 0 ? 1 : total / 20;
            if (done % step == 0 || done == total)
                std::fprintf(stderr, "cells %zu/%zu\n", done, total);
        });
    evc::write_text_file(out_dir + "/metrics.csv", evc::metrics_to_csv(result));

    std::string summary = "performance gap over baseline, pooled over batch sizes\n";
    summary += "selector          max       mean      median    min\n";
    for (const evc::MetricsRow& row : result.rows) {
        if (row.N != 0) continue;
        auto pad = [](std::string s, std::size_t width) {
            if (s.size() < width) s.append(width - s.size(), ' ');
            return s;
        };
        summary += pad(row.selector, 18) + pad(evc::format_double(row.du_max), 10) +
                   pad(evc::format_double(row.du_mean), 10) +
                   pad(evc::format_double(row.du_median), 10) +
                   evc::format_double(row.du_min) + "\n";
    }
    summary += "\nwinner shares per batch size (mle / gamma-sweep / imported)\n";
    for (const evc::MetricsRow& row : result.rows) {
        if (row.N == 0) continue;
        summary += row.selector + " N=" + std::to_string(row.N) + ": " +
                   evc::format_double(row.share_mle) + " / " +
                   evc::format_double(row.share_gamma_sweep) + " / " +
                   evc::format_double(row.share_imported) + "\n";
    }
    evc::write_text_file(out_dir + "/summary.txt", summary);

    if (config.env.name == evc::EnvName::rfl)
        evc::write_text_file(out_dir + "/map.txt",
                             evc::generate_lake_map(config.env).to_text());
    return 0;
}

int run_plot(const std::string& metrics_path, const std::string& out_dir) {
    evc::ExperimentResult result =
        evc::metrics_from_csv(evc::read_text_file(metrics_path));
    std::filesystem::create_directories(out_dir);

    std::vector<evc::MetricsRow> pooled;
    std::vector<std::string> selector_order;
    std::map<std::string, std::vector<evc::MetricsRow>> per_selector;
    for (const evc::MetricsRow& row : result.rows) {
        if (row.N == 0) {
            pooled.push_back(row);
            continue;
        }
        if (per_selector.find(row.selector) == per_selector.end())
            selector_order.push_back(row.selector);
        per_selector[row.selector].push_back(row);
    }
    evc::write_text_file(out_dir + "/delta_u_table.svg", evc::delta_u_table_svg(pooled));
    for (const std::string& selector : selector_order)
        evc::write_text_file(out_dir + "/selection_rate_" + selector + ".svg",
                             evc::selection_rate_svg(selector, per_selector[selector]));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline risk-aware policy selection on tabular models"};
    app.require_subcommand(1);

    // collect
    auto* collect = app.add_subcommand("collect", "simulate a batch of episodes");
    std::string collect_config;
    collect->add_option("--config", collect_config, "config file with env keys");
    ConfigFlags collect_flags;
    collect_flags.attach(collect, kEnvKeys);
    std::size_t collect_m = 1, collect_n = 8;
    std::uint64_t collect_seed = 0;
    std::string collect_out, collect_map_out;
    collect->add_option("--m", collect_m, "episodes to collect")->required();
    collect->add_option("--n", collect_n, "steps per episode")->required();
    collect->add_option("--seed", collect_seed, "collection seed");
    collect->add_option("--out", collect_out, "batch CSV path")->required();
    collect->add_option("--map-out", collect_map_out, "grid text path (rfl only)");

    // solve-trivial
    auto* solve = app.add_subcommand(
        "solve-trivial", "solve the count-frequency model of a batch");
    std::string solve_batch, solve_out, solve_counts_out;
    double solve_gamma = 0.9;
    solve->add_option("--batch", solve_batch, "batch CSV path")->required();
    solve->add_option("--gamma", solve_gamma, "discount for the solve");
    solve->add_option("--out", solve_out, "policy JSON path")->required();
    solve->add_option("--counts-out", solve_counts_out, "transition counts JSON path");

    // select
    auto* select = app.add_subcommand("select", "risk-ranked policy selection");
    std::string select_batch, select_config, select_report_out, select_csv_out;
    select->add_option("--batch", select_batch, "batch CSV path")->required();
    select->add_option("--config", select_config, "config file");
    ConfigFlags select_flags;
    select_flags.attach(select, kSelectKeys);
    select->add_option("--report-out", select_report_out, "report JSON path");
    select->add_option("--csv-out", select_csv_out, "per-candidate CSV path");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "full comparison sweep");
    std::string experiment_config, experiment_out_dir;
    experiment->add_option("--config", experiment_config, "config file");
    ConfigFlags experiment_flags;
    experiment_flags.attach(experiment, kEnvKeys);
    ConfigFlags experiment_flags2;
    experiment_flags2.attach(experiment, kExperimentKeys);
    experiment->add_option("--out-dir", experiment_out_dir, "output directory")
        ->required();

    // plot
    auto* plot = app.add_subcommand("plot", "charts from a metrics CSV");
    std::string plot_metrics, plot_out_dir;
    plot->add_option("--metrics", plot_metrics, "metrics CSV path")->required();
    plot->add_option("--out-dir", plot_out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect->parsed())
            return run_collect(collect_config, collect_flags, collect_m, collect_n,
                               collect_seed, collect_out, collect_map_out);
        if (solve->parsed())
            return run_solve_trivial(solve_batch, solve_gamma, solve_out,
                                     solve_counts_out);
        if (select->parsed())
            return run_select(select_batch, select_config, select_flags,
                              select_report_out, select_csv_out);
        if (experiment->parsed()) {
            evc::KeyValueConfig kv = load_config(experiment_config, experiment_flags);
            experiment_flags2.apply(kv);
            return run_experiment_cmd(kv, experiment_out_dir);
        }
        if (plot->parsed()) return run_plot(plot_metrics, plot_out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
