#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>

#include <Eigen/Core>

namespace improper {

// Counter-keyed random stream built on SplitMix64. A stream is fully
// determined by a master seed plus a derivation path (e.g. trial, round,
// run, rollout), so the draw sequence is independent of scheduling order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kPhi)) {}

    RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
        : RngStream(seed) {
        for (std::uint64_t p : path) descend(p);
    }

    // Derive a child stream; the parent is left untouched.
    RngStream child(std::uint64_t index) const {
        RngStream c(*this);
        c.descend(index);
        return c;
    }

    std::uint64_t next_u64() {
        state_ += kPhi;
        return mix(state_);
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; two uniforms per draw, no cached spare.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Index in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Sample an index from an (unnormalized is not allowed) probability vector.
    int categorical(const Eigen::VectorXd& probs) {
        const double u = uniform();
        double acc = 0.0;
        for (int i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return static_cast<int>(probs.size()) - 1;
    }

private:
    static constexpr std::uint64_t kPhi = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    void descend(std::uint64_t index) {
        state_ = mix(state_ ^ mix(index + kPhi));
    }

    std::uint64_t state_;
};

// Stable 64-bit hash of a short string, for deriving per-experiment seeds.
inline std::uint64_t fnv1a64(const char* s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 1099511628211ULL;
    return h;
}

}  // namespace improper
