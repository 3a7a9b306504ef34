#pragma once

#include "slicing/instance.hpp"
#include "slicing/rng.hpp"

#include <cstdint>
#include <vector>

namespace slicing {

struct StepResult {
    std::vector<UeOutcome> outcomes;
    std::vector<ArrivalSample> arrivals;
};

/// Per-slot simulator. Channel and arrival draws come from their own streams,
/// so every policy sees the same fading and arrival sample path for a seed.
class Environment {
public:
    Environment(const Instance& inst, std::uint64_t seed, std::uint64_t salt = 0);
    Environment(const Instance& inst, std::uint64_t seed, SystemState initial, std::uint64_t salt = 0);

    const Instance& instance() const { return inst_; }
    const SystemState& state() const { return state_; }
    Rng& policy_rng() { return policy_rng_; }

    /// Serves under `action`, draws arrivals, steps queues and batteries, then
    /// draws the next channel.
    StepResult step(const ControlAction& action);

private:
    const Instance& inst_;
    Rng channel_rng_, arrival_rng_, policy_rng_;
    SystemState state_;
};

}  // namespace slicing
