#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace sgfd {

// Seeded random source. Every stochastic routine in the library takes either
// a seed or an Rng&; nothing reads global entropy.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    // Uniform integer in [0, bound).
    std::uint64_t next(std::uint64_t bound) {
        return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    template <class It>
    void shuffle(It first, It last) {
        std::shuffle(first, last, engine_);
    }

    std::mt19937_64& engine() { return engine_; }

    // Derives an independent stream (splitmix64 of seed ^ stream), e.g. one
    // per user or per epoch, without disturbing this engine's sequence.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t x = seed_ ^ (stream + 0x9e3779b97f4a7c15ULL);
        x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27; x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return Rng(x);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace sgfd
