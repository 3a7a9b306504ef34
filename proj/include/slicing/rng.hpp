#pragma once

#include <cstdint>
#include <random>

namespace slicing {

using Rng = std::mt19937_64;

/// Independent random streams derived from one master seed, so that varying a
/// single component (e.g. the policy) leaves the others untouched.
enum class Stream : std::uint64_t {
    placement = 1,
    channel = 2,
    arrivals = 3,
    policy = 4,
    training = 5,
};

inline Rng make_rng(std::uint64_t master_seed, Stream stream, std::uint64_t salt = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(salt),
                      static_cast<std::uint32_t>(salt >> 32)};
    return Rng(seq);
}

}  // namespace slicing
