#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mega {

// Reproducibility rules used throughout the library:
//  * one master seed expands into independently seeded named streams, so
//    adding parallelism or reordering independent work never shifts draws;
//  * all distributions are derived from raw mt19937_64 output with fixed
//    arithmetic (no std::*_distribution, whose draw counts are
//    implementation-defined).

/// splitmix64 finalizer; good bit mixing for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

/// Derive the seed of a named stream from a master seed.
constexpr std::uint64_t seed_stream(std::uint64_t master, std::string_view name) {
    return mix64(master ^ mix64(fnv1a64(name)));
}

/// Named stream further keyed by a position (e.g. a merge-tree node).
constexpr std::uint64_t seed_stream(std::uint64_t master, std::string_view name,
                                    std::uint64_t a) {
    return mix64(seed_stream(master, name) ^ mix64(a + 0x9e3779b97f4a7c15ULL));
}

constexpr std::uint64_t seed_stream(std::uint64_t master, std::string_view name,
                                    std::uint64_t a, std::uint64_t b) {
    return mix64(seed_stream(master, name, a) ^ mix64(b + 0x2545f4914f6cdd1dULL));
}

/// Deterministic random stream. mt19937_64 output mapped with fixed
/// arithmetic; every method consumes a documented number of raw draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// One raw draw.
    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1). One raw draw.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller. Exactly two raw draws.
    double gaussian() {
        const double u1 = 1.0 - uniform();  // (0, 1]; keeps log() finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    /// Uniform integer in [0, n). Unbiased; one raw draw unless rejected.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t x, r;
        do {
            x = next_u64();
            r = x % n;
        } while (x - r > std::uint64_t(0) - n);
        return r;
    }

private:
    std::mt19937_64 gen_;
};

/// Sample `count` distinct indices from [0, n) by partial Fisher-Yates.
/// Consumes exactly `count` below() draws.
std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::uint32_t n,
                                                      std::uint32_t count);

/// In-place Fisher-Yates shuffle; n-1 below() draws.
template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace mega
