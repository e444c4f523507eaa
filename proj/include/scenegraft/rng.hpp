#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace scenegraft {

// Deterministic generator used everywhere randomness appears in the pipeline.
// splitmix64 stream; child streams are derived by hashing a key into the
// parent seed, so per-scene / per-insertion work is reproducible regardless
// of scheduling. Not for cryptography.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo bias is negligible for the n used here, but
        // stay exact anyway.
        const std::uint64_t limit = n * ((~0ull) / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (two uniforms per call, no caching so
    // the draw count stays predictable).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent child stream from a string key.
    Rng child(const std::string& key) const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
        for (unsigned char c : key) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return Rng(mix(state_ ^ h));
    }

    Rng child(std::uint64_t key) const { return Rng(mix(state_ ^ mix(key))); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdull;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
        return z ^ (z >> 33);
    }

    std::uint64_t state_;
};

}  // namespace scenegraft
