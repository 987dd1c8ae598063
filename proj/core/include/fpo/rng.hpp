#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fpo {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a parent seed and a stream label.
// All pipeline randomness flows through this so a single global seed fixes
// every stage.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

// Uniform double in [0, 1) with 53 random bits; stable across standard
// library implementations, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [lo, hi] (inclusive). Uses rejection sampling.
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

}  // namespace fpo
