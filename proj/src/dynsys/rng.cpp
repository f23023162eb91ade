#include "dpdsr/dynsys/rng.hpp"

#include <array>

namespace dpdsr {

namespace {

// FNV-1a, only used to turn a purpose label into seed material.
std::uint64_t label_hash(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::seed_seq make_seq(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    const std::uint64_t h = label_hash(purpose);
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                         static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    auto seq = make_seq(seed, purpose, index);
    return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    auto seq = make_seq(seed, purpose, index);
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace dpdsr
