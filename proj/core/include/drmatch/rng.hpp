#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "drmatch/types.hpp"

namespace drmatch {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent stream seed for (seed, stream). Pure function of its inputs,
/// so replications can be generated in any order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform integer in [0, bound) by rejection; stable across standard libraries.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Fisher-Yates shuffle driven by `uniform_below`.
void shuffle_indices(std::span<Index> values, Rng& rng);

}  // namespace drmatch
