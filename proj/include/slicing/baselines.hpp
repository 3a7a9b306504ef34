#pragma once

#include "slicing/instance.hpp"
#include "slicing/rng.hpp"

#include <cstdint>

namespace slicing {

/// Index of the largest fpc exponent.
int max_power_index(const Instance& inst);

/// Equal split of subchannels across slices in contiguous blocks; the
/// N mod M leftover subchannels go to slices chosen round-robin by `slot`.
/// Each subchannel goes to a uniformly drawn UE of its slice; every UE uses the largest fpc exponent.
ControlAction random_policy(const Instance& inst, const SystemState& state, std::int64_t slot, Rng& rng);

/// Per subchannel, the UE maximising w_m * min(Q Z / slot, R^n) at full power.
/// Battery levels are ignored.
ControlAction qsi_policy(const Instance& inst, const SystemState& state);

}  // namespace slicing
