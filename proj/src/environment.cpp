#include "slicing/environment.hpp"

namespace slicing {

Environment::Environment(const Instance& inst, std::uint64_t seed, std::uint64_t salt)
    : Environment(inst, seed, inst.initial_state(), salt) {}

Environment::Environment(const Instance& inst, std::uint64_t seed, SystemState initial, std::uint64_t salt)
    : inst_(inst),
      channel_rng_(make_rng(seed, Stream::channel, salt)),
      arrival_rng_(make_rng(seed, Stream::arrivals, salt)),
      policy_rng_(make_rng(seed, Stream::policy, salt)),
      state_(std::move(initial)) {
    state_.channel = sample_channel(inst_.alphabet(), inst_.num_ues(), inst_.num_subchannels(), channel_rng_);
}

StepResult Environment::step(const ControlAction& action) {
    StepResult r;
    r.outcomes = resolve_all(inst_, state_, action);
    r.arrivals.reserve(inst_.num_ues());
    for (std::size_t u = 0; u < inst_.num_ues(); ++u) {
        r.arrivals.push_back(sample_arrivals(inst_.slice_of(u), arrival_rng_));
        const auto& a = r.arrivals.back();
        const auto& o = r.outcomes[u];
        state_.queues[u] = step_queue(state_.queues[u], a.packets, o.served, inst_.buffer_capacity(u));
        state_.batteries[u] = step_energy(state_.batteries[u], a.energy_units, o.consumed, inst_.battery_capacity(u));
    }
    state_.channel = sample_channel(inst_.alphabet(), inst_.num_ues(), inst_.num_subchannels(), channel_rng_);
    return r;
}

}  // namespace slicing
