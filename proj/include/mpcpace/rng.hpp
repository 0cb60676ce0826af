#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace mpcpace {

// SplitMix64: used only to derive per-flow seeds from the run seed so
// that adding or reordering flows never perturbs other flows' streams.
inline std::uint64_t splitmix64__next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t flow_seed(std::uint64_t run_seed, std::uint32_t flow_index) {
    std::uint64_t s = run_seed;
    std::uint64_t z = 0;
    for (std::uint32_t i = 0; i <= flow_index; ++i) z = splitmix64__next(s);
    return z;
}

// All stochastic draws go through mt19937_64, which the standard pins
// bit-exactly, so traces reproduce across platforms and compilers.
using FlowRng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(FlowRng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Exponential draw with the given mean, truncated at max_value.
// Truncation (not resampling) keeps the draw count deterministic.
inline double truncated_exp(FlowRng& rng, double mean, double max_value) {
    if (mean <= 0.0) return 0.0;
    double u = uniform01(rng);
    double d = -mean * std::log(1.0 - u);
    return d < max_value ? d : max_value;
}

}  // namespace mpcpace
