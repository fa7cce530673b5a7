#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace authmail {

// All randomness in the library flows through these helpers so that results
// are identical across platforms and standard library implementations.
// std::shuffle and the std distributions are implementation-defined; the
// mt19937_64 engine itself is not, so we draw from it directly.

/// Mixes extra words into a seed to derive independent streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double next_uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * next_uniform(rng);
}

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t next_index(std::mt19937_64& rng, std::uint64_t n) {
    // Modulo with rejection of the biased tail.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

/// Fisher-Yates shuffle with a platform-stable index sequence.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(next_index(rng, i + 1));
        std::swap(items[i], items[j]);
    }
}

}  // namespace authmail
