#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace topicbench::models::detail {

/// Independent stream for a (seed, labels...) tuple.
inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> key) {
    // seed_seq consumes 32-bit words.
    std::vector<std::uint32_t> words;
    for (const auto k : key) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

/// Uniform double in [0, 1) with 53 random bits; identical across standard
/// library implementations, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

/// Standard normal via Box-Muller.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace topicbench::models::detail
