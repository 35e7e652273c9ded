#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "evc/errors.hpp"
#include "evc/mdp.hpp"
#include "evc/rng.hpp"

namespace evc {

enum class EnvName { ring, chain, rfl };

/// Benchmark environment selector. The last four fields only matter for
/// the random frozen lake.
struct EnvSpec {
    EnvName name = EnvName::ring;
    std::size_t grid_size = 8;
    double slip_prob = 1.0 / 3.0;
    std::uint64_t map_seed = 0;
    std::uint64_t reward_seed = 0;

    void validate() const {
        if (name == EnvName::rfl) {
            if (grid_size < 2) throw InvalidInputError("env: grid_size must be >= 2");
            if (!(slip_prob >= 0.0) || slip_prob >= 1.0)
                throw InvalidInputError("env: slip_prob must lie in [0, 1)");
        }
    }
};

/// Five states on a loop, three actions, start in state 0. Rewards sit
/// on the transitions 2->3 and 4->3 (0.5) and 3->3 (1.0); the agent
/// wants to hover around state 3. In states {0, 1, 3} action 0 steps
/// left surely, action 1 mostly stays, action 2 mostly steps right; in
/// the remaining states every action acts with probability 1/2:
/// action 0 left-or-stay, action 1 left-or-right, action 2
/// right-or-stay.
inline TabularMdp ring() {
    constexpr std::size_t S = 5;
    TabularMdp m = TabularMdp::zeros(S, 3);
    m.initial_dist[0] = 1.0;
    m.transition_rewards.assign(S * 3 * S, 0.0);

    auto left = [](std::size_t s) { return (s + S - 1) % S; };
    auto right = [](std::size_t s) { return (s + 1) % S; };

    for (std::size_t s = 0; s < S; ++s) {
        bool sharp = s == 0 || s == 1 || s == 3;
        if (sharp) {
            m.transition(s, 0, left(s)) = 1.0;
            m.transition(s, 1, s) = 0.8;
            m.transition(s, 1, left(s)) = 0.1;
            m.transition(s, 1, right(s)) = 0.1;
            m.transition(s, 2, right(s)) = 0.9;
            m.transition(s, 2, s) = 0.1;
        } else {
            m.transition(s, 0, left(s)) = 0.5;
            m.transition(s, 0, s) = 0.5;
            m.transition(s, 1, left(s)) = 0.5;
            m.transition(s, 1, right(s)) = 0.5;
            m.transition(s, 2, right(s)) = 0.5;
            m.transition(s, 2, s) = 0.5;
        }
    }

    for (std::size_t a = 0; a < 3; ++a) {
        m.transition_rewards[(2 * 3 + a) * S + 3] = 0.5;
        m.transition_rewards[(4 * 3 + a) * S + 3] = 0.5;
        m.transition_rewards[(3 * 3 + a) * S + 3] = 1.0;
    }
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < 3; ++a) {
            double expected = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2)
                expected += m.transition(s, a, s2) *
                            m.transition_rewards[(s * 3 + a) * S + s2];
            m.reward(s, a) = expected;
        }
    m.validate();
    return m;
}

/// Five-state open chain, two actions, start at the origin. Action 0
/// advances right with probability 0.8 (reward 0; 10 in the rightmost
/// state, which then stays put) and slips back to the origin otherwise
/// (reward 2). Action 1 returns to the origin with probability 0.8
/// (reward 2) and drifts right otherwise (reward 0). The discounted
/// optimum plays action 1 at the origin and action 0 elsewhere.
inline TabularMdp chain() {
    constexpr std::size_t S = 5;
    TabularMdp m = TabularMdp::zeros(S, 2);
    m.initial_dist[0] = 1.0;
    m.transition_rewards.assign(S * 2 * S, 0.0);

    auto set = [&](std::size_t s, std::size_t a, std::size_t s2, double p, double r) {
        m.transition(s, a, s2) += p;
        m.transition_rewards[(s * 2 + a) * S + s2] = r;
    };
    for (std::size_t s = 0; s < S; ++s) {
        std::size_t right = s + 1 < S ? s + 1 : S - 1;
        if (s + 1 < S) {
            set(s, 0, right, 0.8, 0.0);
            set(s, 0, 0, 0.2, 2.0);
        } else {
            set(s, 0, s, 0.8, 10.0);
            set(s, 0, 0, 0.2, 2.0);
        }
        set(s, 1, 0, 0.8, 2.0);
        set(s, 1, right, 0.2, 0.0);
    }

    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < 2; ++a) {
            double expected = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2)
                expected += m.transition(s, a, s2) *
                            m.transition_rewards[(s * 2 + a) * S + s2];
            m.reward(s, a) = expected;
        }
    m.validate();
    return m;
}

/// Grid layout of a generated lake, row-major: '.' frozen, 'H' hole,
/// 'S' start, 'G' goal.
struct LakeMap {
    std::size_t grid_size = 0;
    std::vector<bool> hole; // grid_size * grid_size

    std::string to_text() const {
        std::string out;
        for (std::size_t row = 0; row < grid_size; ++row) {
            for (std::size_t col = 0; col < grid_size; ++col) {
                std::size_t cell = row * grid_size + col;
                if (cell == 0) out += 'S';
                else if (cell == grid_size * grid_size - 1) out += 'G';
                else out += hole[cell] ? 'H' : '.';
            }
            out += '\n';
        }
        return out;
    }
};

namespace detail {

/// Breadth-first reachability from start over non-hole cells.
inline bool path_exists(const LakeMap& map) {
    std::size_t n = map.grid_size;
    std::size_t goal = n * n - 1;
    std::vector<bool> seen(n * n, false);
    std::deque<std::size_t> frontier{0};
    seen[0] = true;
    while (!frontier.empty()) {
        std::size_t cell = frontier.front();
        frontier.pop_front();
        if (cell == goal) return true;
        std::size_t row = cell / n;
        std::size_t col = cell % n;
        auto try_visit = [&](std::size_t next) {
            if (!seen[next] && !map.hole[next]) {
                seen[next] = true;
                frontier.push_back(next);
            }
        };
        if (row > 0) try_visit(cell - n);
        if (row + 1 < n) try_visit(cell + n);
        if (col > 0) try_visit(cell - 1);
        if (col + 1 < n) try_visit(cell + 1);
    }
    return false;
}

} // namespace detail

/// Samples hole layouts (each interior cell a hole w.p. 1/4) until one
/// admits a hole-free start-to-goal path. Attempt t draws from
/// derive_seed(map_seed, stream::kMap, t), so the result depends only
/// on the spec. Throws GenerationFailureError after the attempt cap.
inline LakeMap generate_lake_map(const EnvSpec& spec, std::size_t max_attempts = 1000) {
    spec.validate();
    std::size_t n = spec.grid_size;
    LakeMap map;
    map.grid_size = n;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        Rng rng(derive_seed(spec.map_seed, stream::kMap, attempt));
        map.hole.assign(n * n, false);
        for (std::size_t cell = 1; cell + 1 < n * n; ++cell)
            map.hole[cell] = rng.uniform01() <= 0.25;
        if (detail::path_exists(map)) return map;
    }
    throw GenerationFailureError("generate_lake_map: no connected layout found");
}

/// Slippery grid world. Actions 0..3 aim up, down, left, right; the
/// move goes as intended with probability 1-p and perpendicular (p/2
/// each way) otherwise, with off-grid moves staying put. The goal
/// (bottom-right, "distant" from the start at the top-left) pays 1 on
/// entry; holes and the goal are absorbing and pay nothing afterwards.
/// Every other (state, action) pays a base reward drawn once from
/// (0, 0.8), also on slips, keyed by reward_seed.
inline TabularMdp random_frozen_lake(const EnvSpec& spec) {
    spec.validate();
    if (spec.name != EnvName::rfl)
        throw InvalidInputError("random_frozen_lake: spec does not name rfl");
    LakeMap map = generate_lake_map(spec);
    const std::size_t n = spec.grid_size;
    const std::size_t S = n * n;
    const std::size_t goal = S - 1;
    constexpr std::size_t A = 4;

    TabularMdp m = TabularMdp::zeros(S, A);
    m.initial_dist[0] = 1.0;
    m.transition_rewards.assign(S * A * S, 0.0);
    for (std::size_t cell = 0; cell < S; ++cell)
        m.terminal[cell] = map.hole[cell] || cell == goal;

    // row/col deltas per action: up, down, left, right
    const int dr[A] = {-1, 1, 0, 0};
    const int dc[A] = {0, 0, -1, 1};
    auto destination = [&](std::size_t cell, std::size_t dir) {
        int row = static_cast<int>(cell / n) + dr[dir];
        int col = static_cast<int>(cell % n) + dc[dir];
        if (row < 0 || col < 0 || row >= static_cast<int>(n) || col >= static_cast<int>(n))
            return cell;
        return static_cast<std::size_t>(row) * n + static_cast<std::size_t>(col);
    };
    // perpendicular directions of each action
    const std::size_t perp[A][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};

    Rng reward_rng(derive_seed(spec.reward_seed, stream::kReward));
    const double p = spec.slip_prob;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            if (m.terminal[s]) {
                m.transition(s, a, s) = 1.0;
                continue;
            }
            // Base rewards are drawn for every non-terminal (s, a) in
            // fixed (s, a) order, so the table is a pure function of
            // reward_seed and the map.
            double base = reward_rng.uniform(0.8);
            m.transition(s, a, destination(s, a)) += 1.0 - p;
            m.transition(s, a, destination(s, perp[a][0])) += p / 2.0;
            m.transition(s, a, destination(s, perp[a][1])) += p / 2.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                if (m.transition(s, a, s2) == 0.0) continue;
                m.transition_rewards[(s * A + a) * S + s2] = s2 == goal ? 1.0 : base;
            }
            double expected = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2)
                expected += m.transition(s, a, s2) *
                            m.transition_rewards[(s * A + a) * S + s2];
            m.reward(s, a) = expected;
        }
    }
    m.validate();
    return m;
}

inline TabularMdp make_env(const EnvSpec& spec) {
    switch (spec.name) {
        case EnvName::ring: return ring();
        case EnvName::chain: return chain();
        case EnvName::rfl: return random_frozen_lake(spec);
    }
    throw InvalidInputError("make_env: unknown environment");
}

inline std::string env_name_string(EnvName name) {
    switch (name) {
        case EnvName::ring: return "ring";
        case EnvName::chain: return "chain";
        case EnvName::rfl: return "rfl";
    }
    throw InvalidInputError("env_name_string: unknown environment");
}

inline EnvName env_name_from_string(const std::string& text) {
    if (text == "ring") return EnvName::ring;
    if (text == "chain") return EnvName::chain;
    if (text == "rfl") return EnvName::rfl;
    throw InvalidInputError("unknown environment name: " + text);
}

} // namespace evc
