#pragma once

#include "slicing/config.hpp"

#include <filesystem>
#include <string>

namespace fixtures {

inline std::filesystem::path scenario_path(const std::string& name) {
    return std::filesystem::path(SLICING_SCENARIO_DIR) / name;
}

// One slice, one UE, one subchannel.
inline slicing::ScenarioConfig single_ue(int levels = 2, int bq = 2, int be = 2) {
    slicing::ScenarioConfig c;
    c.ran.num_subchannels = 1;
    c.ran.slot_duration = 0.004;
    c.ran.path_loss_exponent = 3;
    c.ran.reference_gain = 1e-3;
    c.ran.noise_power = slicing::dbm_to_watts(-104);
    c.ran.fading_mean = 0.1;
    c.ran.fading_levels = levels;
    c.ran.fpc_actions = {0.8, 1.0};
    slicing::SliceConfig s;
    s.name = "urllc";
    s.num_ues = 1;
    s.baseline_power = slicing::dbm_to_watts(-73);
    s.buffer_capacity = bq;
    s.battery_capacity = be;
    s.packet_arrival_rate = 1;
    s.energy_arrival_rate = 1;
    s.max_delay = 0.004;
    s.packet_size = 1e5;
    s.energy_unit = 1e8 * s.baseline_power * c.ran.slot_duration;
    c.slices = {s};
    c.placements = {{0, 0, 50.0}};
    c.objective.rate_scale = 1e-6;
    c.objective.delay_scale = 1e3;
    return c;
}

// Single UE on two subchannels whose delay bound binds: the unconstrained
// optimum batches packets (about 10.7 ms), a small multiplier halves that.
// Drops stay below 1%, so the queue surrogate tracks the measured delay.
inline slicing::ScenarioConfig constrained_ue() {
    slicing::ScenarioConfig c = single_ue(2, 4, 2);
    c.ran.num_subchannels = 2;
    c.slices[0].packet_arrival_rate = 0.3;
    c.slices[0].energy_arrival_rate = 0.5;
    c.slices[0].max_delay = 0.008;
    c.placements = {{0, 0, 40.0}};
    return c;
}

// Two slices with one UE each sharing two subchannels.
inline slicing::ScenarioConfig two_slices() {
    slicing::ScenarioConfig c = single_ue(2, 1, 2);
    c.ran.num_subchannels = 2;
    slicing::SliceConfig s = c.slices[0];
    s.name = "mmtc";
    s.baseline_power = slicing::dbm_to_watts(-79);
    s.energy_unit = 1e8 * s.baseline_power * c.ran.slot_duration;
    s.packet_size = 2e4;
    s.max_delay = 0.05;
    s.packet_arrival_rate = 2;
    c.slices.push_back(s);
    c.placements = {{0, 0, 40.0}, {1, 0, 70.0}};
    return c;
}

}  // namespace fixtures
