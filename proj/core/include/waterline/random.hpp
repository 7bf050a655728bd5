#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace waterline {

// std distributions are implementation-defined; these helpers only use the
// raw mt19937_64 output so seeded results match across standard libraries.

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Uniform integer in [0, bound), bound > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
/// Uniform integer in [lo, hi].
std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi);
/// Uniform real in [lo, hi).
double uniform_real(std::mt19937_64& rng, double lo, double hi);

/// Fisher-Yates shuffle of indices 0..n-1.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace waterline
