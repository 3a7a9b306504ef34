#include "slicing/instance.hpp"

#include <cmath>
#include <stdexcept>

namespace slicing {

Instance::Instance(ScenarioConfig config) : config_(std::move(config)) {
    validate(config_);
    alphabet_ = build_alphabet(config_.ran.fading_mean, config_.ran.fading_levels);
    placements_ = resolve_placements(config_);

    const auto& ran = config_.ran;
    slice_members_.resize(config_.slices.size());
    for (const auto& p : placements_) {
        const auto& slice = config_.slices[p.slice_id];
        UeModel ue;
        ue.slice = p.slice_id;
        ue.local = p.ue_id;
        ue.distance = p.distance;
        ue.path_loss = path_loss(p.distance, ran.reference_gain, ran.path_loss_exponent);
        for (double phi : ran.fpc_actions) {
            double power = transmit_power(slice.baseline_power, ran.reference_gain, p.distance,
                                          ran.path_loss_exponent, phi);
            ue.power.push_back(power);
            // Small slack so that exact multiples of the unit do not round up.
            double units = power * ran.slot_duration / slice.energy_unit;
            ue.energy_cost.push_back(std::max(1, static_cast<int>(std::ceil(units * (1.0 - 1e-12)))));
            std::vector<double> rates;
            for (double level : alphabet_.levels)
                rates.push_back(subchannel_rate(power, level * ue.path_loss, ran.noise_power,
                                                ran.bandwidth_per_subchannel));
            ue.rate.push_back(std::move(rates));
        }
        slice_members_[p.slice_id].push_back(ues_.size());
        ues_.push_back(std::move(ue));
    }
    for (const auto& s : config_.slices) {
        packet_pmf_.push_back(packet_arrival_pmf(s));
        energy_pmf_.push_back(energy_arrival_pmf(s));
    }
}

SystemState Instance::initial_state() const {
    SystemState s;
    s.channel.assign(num_ues() * num_subchannels(), 0);
    s.queues.assign(num_ues(), 0);
    for (std::size_t u = 0; u < num_ues(); ++u) s.batteries.push_back(battery_capacity(u));
    return s;
}

ControlAction Instance::idle_action() const {
    ControlAction a;
    a.assignment.assign(num_ues() * num_subchannels(), 0);
    a.fpc.assign(num_ues(), 0);
    return a;
}

double aggregate_rate(const Instance& inst, std::size_t u, int fpc, const ChannelMatrix& channel,
                      std::span<const std::uint8_t> assignment) {
    const std::size_t n_sub = inst.num_subchannels();
    const auto& rates = inst.ue(u).rate[fpc];
    double r = 0.0;
    for (std::size_t n = 0; n < n_sub; ++n)
        if (assignment[u * n_sub + n]) r += rates[channel[u * n_sub + n]];
    return r;
}

UeOutcome resolve_ue(const Instance& inst, std::size_t u, int q, int e, double raw_rate, int fpc) {
    const auto& slice = inst.slice_of(u);
    const double slot = inst.ran().slot_duration;
    UeOutcome out;
    out.raw_rate = raw_rate;
    if (raw_rate <= 0) return out;
    const double power = inst.ue(u).power[fpc];
    out.feasible = energy_feasible(e, power, q, raw_rate, slice, slot);
    double rate = effective_rate(raw_rate, out.feasible);
    int capacity = static_cast<int>(std::floor(rate * slot / slice.packet_size * (1.0 + 1e-12)));
    out.served = std::min(capacity, q);
    if (out.served > 0) out.consumed = inst.ue(u).energy_cost[fpc];
    out.delivered_rate = out.served * slice.packet_size / slot;
    return out;
}

std::vector<UeOutcome> resolve_all(const Instance& inst, const SystemState& state, const ControlAction& action) {
    std::vector<UeOutcome> out(inst.num_ues());
    for (std::size_t u = 0; u < inst.num_ues(); ++u) {
        double r = aggregate_rate(inst, u, action.fpc[u], state.channel, action.assignment);
        out[u] = resolve_ue(inst, u, state.queues[u], state.batteries[u], r, action.fpc[u]);
    }
    return out;
}

UeNextPmf next_state_pmf(const Instance& inst, std::size_t u, int q, int e, int served, int consumed) {
    const std::size_t m = inst.ue(u).slice;
    const int bq = inst.buffer_capacity(u);
    const int be = inst.battery_capacity(u);
    UeNextPmf out;
    out.queue.assign(bq + 1, 0.0);
    out.battery.assign(be + 1, 0.0);
    const auto& pa = inst.packet_pmf(m);
    for (int a = 0; a < static_cast<int>(pa.size()); ++a)
        if (pa[a] > 0) out.queue[step_queue(q, a, served, bq)] += pa[a];
    const auto& pe = inst.energy_pmf(m);
    for (int a = 0; a < static_cast<int>(pe.size()); ++a)
        if (pe[a] > 0) out.battery[step_energy(e, a, consumed, be)] += pe[a];
    return out;
}

double expected_next_value(const Instance& inst, std::size_t u, int q, int e, int served, int consumed,
                           std::span<const double> values) {
    const std::size_t m = inst.ue(u).slice;
    const int bq = inst.buffer_capacity(u);
    const int be = inst.battery_capacity(u);
    const auto& pa = inst.packet_pmf(m);
    const auto& pe = inst.energy_pmf(m);
    double total = 0.0;
    for (int a = 0; a < static_cast<int>(pa.size()); ++a) {
        if (pa[a] <= 0) continue;
        const double* row = values.data() + static_cast<std::size_t>(step_queue(q, a, served, bq)) * (be + 1);
        double inner = 0.0;
        for (int b = 0; b < static_cast<int>(pe.size()); ++b)
            if (pe[b] > 0) inner += pe[b] * row[step_energy(e, b, consumed, be)];
        total += pa[a] * inner;
    }
    return total;
}

std::vector<double> slice_delay_surrogates(const Instance& inst, std::span<const int> queues) {
    std::vector<double> d(inst.num_slices(), 0.0);
    const double slot = inst.ran().slot_duration;
    for (std::size_t u = 0; u < inst.num_ues(); ++u)
        d[inst.ue(u).slice] += delay_surrogate(queues[u], inst.slice_of(u), slot);
    return d;
}

double lagrangian_reward(const Instance& inst, const Multipliers& eta, std::span<const int> queues,
                         std::span<const double> delivered_rates) {
    const auto& scale = inst.config().objective;
    std::vector<double> rate(inst.num_slices(), 0.0);
    for (std::size_t u = 0; u < inst.num_ues(); ++u) rate[inst.ue(u).slice] += delivered_rates[u];
    auto delay = slice_delay_surrogates(inst, queues);
    double g = 0.0;
    for (std::size_t m = 0; m < inst.num_slices(); ++m) {
        const auto& s = inst.config().slices[m];
        g += s.weight * rate[m] * scale.rate_scale;
        g -= eta[m] * (delay[m] - s.max_delay) * scale.delay_scale;
    }
    return g;
}

void check_action(const Instance& inst, const ControlAction& action) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels();
    if (action.assignment.size() != U * N || action.fpc.size() != U)
        throw std::invalid_argument("action has wrong dimensions");
    for (std::size_t n = 0; n < N; ++n) {
        int owners = 0;
        for (std::size_t u = 0; u < U; ++u) owners += action.assignment[u * N + n] ? 1 : 0;
        if (owners > 1) throw std::invalid_argument("subchannel assigned to more than one UE");
    }
    for (int f : action.fpc)
        if (f < 0 || f >= static_cast<int>(inst.num_fpc())) throw std::invalid_argument("fpc index out of range");
}

}  // namespace slicing
