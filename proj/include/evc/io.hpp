#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evc/batch.hpp"
#include "evc/envs.hpp"
#include "evc/errors.hpp"
#include "evc/mdp.hpp"
#include "evc/posterior.hpp"
#include "evc/risk.hpp"
#include "evc/selection.hpp"

namespace evc {

/// Shortest round-trip decimal form of a double. All text output goes
/// through this (or the JSON library's equivalent) so re-runs are
/// byte-identical.
inline std::string format_double(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc()) throw IoError("format_double: value not representable");
    return std::string(buffer, end);
}

inline double parse_double(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw IoError("parse_double: bad number '" + text + "'");
    return value;
}

inline std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw IoError("parse_u64: bad integer '" + text + "'");
    return value;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

inline std::string measure_to_string(RiskMeasure measure) {
    return measure == RiskMeasure::var ? "var" : "cvar";
}

inline RiskMeasure measure_from_string(const std::string& text) {
    if (text == "var") return RiskMeasure::var;
    if (text == "cvar") return RiskMeasure::cvar;
    throw IoError("unknown risk measure: " + text);
}

// ---------------------------------------------------------------- policies

inline nlohmann::json policy_to_json(const Policy& policy) {
    nlohmann::json j;
    j["kind"] = policy.kind == PolicyKind::deterministic ? "deterministic" : "stochastic";
    j["n_states"] = policy.n_states;
    j["n_actions"] = policy.n_actions;
    j["provenance_tag"] = policy.provenance_tag;
    if (policy.kind == PolicyKind::deterministic) {
        j["det_actions"] = policy.det_actions;
    } else {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t s = 0; s < policy.n_states; ++s) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t a = 0; a < policy.n_actions; ++a)
                row.push_back(policy.action_probs[s * policy.n_actions + a]);
            rows.push_back(std::move(row));
        }
        j["action_probs"] = std::move(rows);
    }
    return j;
}

inline Policy policy_from_json(const nlohmann::json& j) {
    try {
        std::string kind = j.at("kind").get<std::string>();
        auto n_states = j.at("n_states").get<std::size_t>();
        auto n_actions = j.at("n_actions").get<std::size_t>();
        std::string tag = j.value("provenance_tag", std::string());
        if (kind == "deterministic") {
            auto actions = j.at("det_actions").get<std::vector<std::size_t>>();
            if (actions.size() != n_states)
                throw IoError("policy: det_actions length mismatch");
            return Policy::deterministic(std::move(actions), n_actions, tag);
        }
        if (kind == "stochastic") {
            const nlohmann::json& rows = j.at("action_probs");
            if (rows.size() != n_states) throw IoError("policy: action_probs row count");
            std::vector<double> probs;
            probs.reserve(n_states * n_actions);
            for (const auto& row : rows) {
                if (row.size() != n_actions) throw IoError("policy: action_probs row width");
                for (const auto& v : row) probs.push_back(v.get<double>());
            }
            return Policy::stochastic(std::move(probs), n_states, n_actions, tag);
        }
        throw IoError("policy: unknown kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("policy: malformed document: ") + e.what());
    }
}

inline void write_policy_file(const std::string& path, const Policy& policy) {
    write_text_file(path, policy_to_json(policy).dump(2) + "\n");
}

inline Policy read_policy_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("policy: cannot parse " + path + ": " + e.what());
    }
    return policy_from_json(j);
}

// ------------------------------------------------------------------ batches

/// A batch together with where it came from: enough to rebuild the
/// environment's known structure (rewards, starts, terminal mask)
/// without guessing.
struct StoredBatch {
    EnvSpec env;
    std::size_t m = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string collector = "uniform";
    TransitionBatch batch;
};

/// CSV with '#'-prefixed metadata preamble, then one row per logged
/// transition. The reward column stores the realized transition
/// reward.
inline std::string batch_to_csv(const StoredBatch& stored) {
    std::string out;
    out += "# env = " + env_name_string(stored.env.name) + "\n";
    out += "# grid_size = " + std::to_string(stored.env.grid_size) + "\n";
    out += "# slip_prob = " + format_double(stored.env.slip_prob) + "\n";
    out += "# map_seed = " + std::to_string(stored.env.map_seed) + "\n";
    out += "# reward_seed = " + std::to_string(stored.env.reward_seed) + "\n";
    out += "# m = " + std::to_string(stored.m) + "\n";
    out += "# n = " + std::to_string(stored.n) + "\n";
    out += "# seed = " + std::to_string(stored.seed) + "\n";
    out += "# collector = " + stored.collector + "\n";
    out += "episode_id,t,s,a,r,s_next\n";
    for (std::size_t i = 0; i < stored.batch.trajectories.size(); ++i) {
        const Trajectory& traj = stored.batch.trajectories[i];
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            const TransitionStep& step = traj.steps[t];
            out += std::to_string(i) + "," + std::to_string(t) + "," +
                   std::to_string(step.s) + "," + std::to_string(step.a) + "," +
                   format_double(step.r) + "," + std::to_string(step.s_next) + "\n";
        }
    }
    return out;
}

inline StoredBatch batch_from_csv(const std::string& text) {
    StoredBatch stored;
    std::map<std::string, std::string> meta;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw IoError("batch: malformed metadata line");
            auto trim = [](std::string s) {
                auto b = s.find_first_not_of(" \t#");
                auto e = s.find_last_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                return s.substr(b, e - b + 1);
            };
            meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
            continue;
        }
        if (!header_seen) {
            if (line != "episode_id,t,s,a,r,s_next" &&
                line != "episode_id,t,s,a,r,s_next\r")
                throw IoError("batch: missing column header");
            header_seen = true;
            continue;
        }
        if (line.back() == '\r') line.pop_back();
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
        if (fields.size() != 6) throw IoError("batch: row does not have 6 fields");
        auto episode = static_cast<std::size_t>(parse_u64(fields[0]));
        if (episode >= stored.batch.trajectories.size())
            stored.batch.trajectories.resize(episode + 1);
        TransitionStep step;
        step.s = static_cast<std::size_t>(parse_u64(fields[2]));
        step.a = static_cast<std::size_t>(parse_u64(fields[3]));
        step.r = parse_double(fields[4]);
        step.s_next = static_cast<std::size_t>(parse_u64(fields[5]));
        stored.batch.trajectories[episode].steps.push_back(step);
    }
    auto require = [&](const std::string& key) {
        auto it = meta.find(key);
        if (it == meta.end()) throw IoError("batch: missing metadata key '" + key + "'");
        return it->second;
    };
    stored.env.name = env_name_from_string(require("env"));
    stored.env.grid_size = static_cast<std::size_t>(parse_u64(require("grid_size")));
    stored.env.slip_prob = parse_double(require("slip_prob"));
    stored.env.map_seed = parse_u64(require("map_seed"));
    stored.env.reward_seed = parse_u64(require("reward_seed"));
    stored.m = static_cast<std::size_t>(parse_u64(require("m")));
    stored.n = static_cast<std::size_t>(parse_u64(require("n")));
    stored.seed = parse_u64(require("seed"));
    stored.collector = require("collector");
    stored.batch.steps_per_episode = stored.n;
    if (stored.batch.trajectories.size() != stored.m)
        throw IoError("batch: episode count disagrees with metadata");
    for (const Trajectory& traj : stored.batch.trajectories)
        if (traj.steps.size() != stored.n)
            throw IoError("batch: episode length disagrees with metadata");
    return stored;
}

inline void write_batch_file(const std::string& path, const StoredBatch& stored) {
    write_text_file(path, batch_to_csv(stored));
}

inline StoredBatch read_batch_file(const std::string& path) {
    return batch_from_csv(read_text_file(path));
}

// ------------------------------------------------------------------- counts

inline nlohmann::json counts_to_json(const TransitionCounts& counts) {
    nlohmann::json j;
    j["n_states"] = counts.n_states;
    j["n_actions"] = counts.n_actions;
    nlohmann::json tensor = nlohmann::json::array();
    for (std::size_t s = 0; s < counts.n_states; ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (std::size_t a = 0; a < counts.n_actions; ++a) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t s2 = 0; s2 < counts.n_states; ++s2)
                row.push_back(counts.at(s, a, s2));
            per_action.push_back(std::move(row));
        }
        tensor.push_back(std::move(per_action));
    }
    j["counts"] = std::move(tensor);
    return j;
}

inline TransitionCounts counts_from_json(const nlohmann::json& j) {
    try {
        auto n_states = j.at("n_states").get<std::size_t>();
        auto n_actions = j.at("n_actions").get<std::size_t>();
        TransitionCounts counts = TransitionCounts::zeros(n_states, n_actions);
        const nlohmann::json& tensor = j.at("counts");
        if (tensor.size() != n_states) throw IoError("counts: state dimension mismatch");
        for (std::size_t s = 0; s < n_states; ++s) {
            if (tensor[s].size() != n_actions)
                throw IoError("counts: action dimension mismatch");
            for (std::size_t a = 0; a < n_actions; ++a) {
                if (tensor[s][a].size() != n_states)
                    throw IoError("counts: next-state dimension mismatch");
                for (std::size_t s2 = 0; s2 < n_states; ++s2)
                    counts.at(s, a, s2) = tensor[s][a][s2].get<std::int64_t>();
            }
        }
        return counts;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("counts: malformed document: ") + e.what());
    }
}

// ------------------------------------------------------------------ reports

inline nlohmann::json report_to_json(const SelectionReport& report, double gamma_ev,
                                     const RiskSpec& spec) {
    nlohmann::json j;
    j["gamma_ev"] = gamma_ev;
    j["q"] = spec.q;
    j["alpha"] = spec.alpha;
    j["eps_rel"] = spec.eps_rel;
    j["k"] = spec.k;
    j["max_samples"] = spec.max_samples;
    j["measure"] = measure_to_string(spec.measure);
    j["winner_index"] = report.winner_index;
    j["total_models_sampled"] = report.total_models_sampled;
    j["n_nonconverged"] = report.n_nonconverged;
    nlohmann::json policies = nlohmann::json::array();
    for (std::size_t i = 0; i < report.policies.size(); ++i) {
        nlohmann::json entry = policy_to_json(report.policies[i]);
        const RiskEstimate& est = report.estimates[i];
        entry["utility"] = est.utility;
        entry["g"] = est.g;
        entry["h"] = est.h;
        entry["L"] = est.L;
        entry["converged"] = est.converged;
        policies.push_back(std::move(entry));
    }
    j["policies"] = std::move(policies);
    return j;
}

/// One row per candidate, aligned with the report order.
inline std::string report_to_csv(const SelectionReport& report, const RiskSpec& spec) {
    std::string out = "index,provenance,measure,q,utility,g,h,L,converged\n";
    for (std::size_t i = 0; i < report.policies.size(); ++i) {
        const RiskEstimate& est = report.estimates[i];
        out += std::to_string(i) + "," + report.policies[i].provenance_tag + "," +
               measure_to_string(spec.measure) + "," + format_double(spec.q) + "," +
               format_double(est.utility) + "," + std::to_string(est.g) + "," +
               std::to_string(est.h) + "," + std::to_string(est.L) + "," +
               (est.converged ? "true" : "false") + "\n";
    }
    return out;
}

// ------------------------------------------------------------------- config

/// Flat "key = value" text config. '#' starts a comment; values keep
/// internal spaces; list values are comma-separated.
class KeyValueConfig {
  public:
    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig config;
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](const std::string& s) {
                auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            std::string stripped = trim(line);
            if (stripped.empty()) continue;
            auto eq = stripped.find('=');
            if (eq == std::string::npos)
                throw IoError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
            std::string key = trim(stripped.substr(0, eq));
            std::string value = trim(stripped.substr(eq + 1));
            if (key.empty())
                throw IoError("config line " + std::to_string(line_no) + ": empty key");
            config.values_[key] = value;
        }
        return config;
    }

    static KeyValueConfig parse_file(const std::string& path) {
        return parse(read_text_file(path));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_double(it->second);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_u64(it->second);
    }

    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return split_list(it->second);
    }

    std::vector<double> get_double_list(const std::string& key,
                                        std::vector<double> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        for (const std::string& item : split_list(it->second))
            out.push_back(parse_double(item));
        return out;
    }

    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            std::vector<std::uint64_t> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::uint64_t> out;
        for (const std::string& item : split_list(it->second))
            out.push_back(parse_u64(item));
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    static std::vector<std::string> split_list(const std::string& text) {
        std::vector<std::string> out;
        std::size_t begin = 0;
        while (begin <= text.size()) {
            auto comma = text.find(',', begin);
            std::string item = comma == std::string::npos
                                   ? text.substr(begin)
                                   : text.substr(begin, comma - begin);
            auto b = item.find_first_not_of(" \t");
            if (b != std::string::npos) {
                auto e = item.find_last_not_of(" \t");
                out.push_back(item.substr(b, e - b + 1));
            }
            if (comma == std::string::npos) break;
            begin = comma + 1;
        }
        return out;
    }

    std::map<std::string, std::string> values_;
};

} // namespace evc
