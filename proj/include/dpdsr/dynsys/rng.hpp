#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpdsr {

/// Project-wide generator: 64-bit Mersenne twister (a twisted GFSR).
using Rng = std::mt19937_64;

/// Independent stream for (seed, purpose). Streams with different purpose
/// labels are decorrelated through std::seed_seq.
Rng make_rng(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

/// Derive a child seed, for handing a stream to code that takes a seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

}  // namespace dpdsr
