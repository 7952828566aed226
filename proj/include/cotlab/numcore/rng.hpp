#pragma once

#include <cmath>
#include <cstdint>

namespace cotlab::numcore {

// Counter-based generator: draw i is a pure function of (seed, i), so streams
// replay identically across runs and platforms. Derived per-episode streams
// use seed ^ episode_index; the SplitMix64 finalizer decorrelates nearby seeds.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    static Rng derive(std::uint64_t seed, std::uint64_t stream_index) {
        return Rng(seed ^ stream_index);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Box-Muller without a cached spare: exactly two draws per call.
    double gauss(double mu = 0.0, double sigma = 1.0) {
        const double u = uniform_pos();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        return mu + sigma * r * std::cos(6.283185307179586 * v);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace cotlab::numcore
