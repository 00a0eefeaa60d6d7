#pragma once

#include <cstdint>
#include <random>

namespace windgp {

/// Engine for one independent substream of a seeded computation (a restart,
/// a timestamp, a sampling bin). Distinct (seed, stream) pairs give unrelated
/// sequences, so work can be reordered or parallelized without changing output.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace windgp
