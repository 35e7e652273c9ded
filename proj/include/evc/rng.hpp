#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "evc/errors.hpp"

namespace evc {

/// splitmix64 finalizer. Used both for seed derivation and for turning
/// loop counters into well-spread stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Folds any number of integer parts into a master seed. Every logical
/// sampling site gets its own stream via derive_seed(seed, tag, idx...),
/// which keeps results independent of evaluation order and worker count.
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Parts... parts) {
    std::uint64_t h = mix64(seed);
    ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(parts)))), ...);
    return h;
}

/// Stream tags. Numeric so that derive_seed stays a pure integer fold.
namespace stream {
constexpr std::uint64_t kModel = 0x01;      // posterior model draws, by model index
constexpr std::uint64_t kRow = 0x02;        // per (state,action) Dirichlet row
constexpr std::uint64_t kPolicy = 0x03;     // per-candidate risk evaluation
constexpr std::uint64_t kTrajectory = 0x04; // per-trajectory data collection
constexpr std::uint64_t kCell = 0x05;       // per (batch size, repetition) sweep cell
constexpr std::uint64_t kRefine = 0x06;     // tail-refinement rejection sampling
constexpr std::uint64_t kMap = 0x07;        // grid-world layout generation
constexpr std::uint64_t kReward = 0x08;     // grid-world reward table
} // namespace stream

/// Deterministic random stream. Wraps mt19937_64 but hand-rolls all
/// real-valued draws, because the distributions in <random> are free to
/// differ between standard library implementations and these streams
/// feed byte-for-byte reproducibility contracts.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on (0, 1]. The open lower end keeps log(u) finite.
    double uniform01() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform on (0, high].
    double uniform(double high) { return high * uniform01(); }

    /// Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw InvalidInputError("uniform_below: n must be positive");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (cosine branch only, no cached
    /// spare, so the draw count per call is fixed).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double exponential() { return -std::log(uniform01()); }

    /// Gamma(shape, 1) for integer shape >= 1. Small shapes sum
    /// exponentials (exact); large shapes use Marsaglia-Tsang squeeze.
    double gamma(std::int64_t shape) {
        if (shape < 1) throw InvalidInputError("gamma: integer shape must be >= 1");
        if (shape <= 32) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < shape; ++i) acc += exponential();
            return acc;
        }
        const double d = static_cast<double>(shape) - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x = normal();
            double t = 1.0 + c * x;
            if (t <= 0.0) continue;
            double v = t * t * t;
            double u = uniform01();
            double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Index draw from an explicit probability vector (inverse CDF scan).
    std::size_t categorical(const std::vector<double>& probs) {
        double u = uniform01();
        double acc = 0.0;
        std::size_t last_positive = probs.size();
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            acc += probs[i];
            last_positive = i;
            if (u <= acc) return i;
        }
        if (last_positive == probs.size())
            throw InvalidInputError("categorical: no positive mass");
        return last_positive; // u fell into fp slack past the final cumulative
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace evc
