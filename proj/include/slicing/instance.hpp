#pragma once

#include "slicing/channel.hpp"
#include "slicing/config.hpp"
#include "slicing/dynamics.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace slicing {

/// S = (H, Q, E). `channel` is row-major (ue, subchannel) over alphabet indices.
struct SystemState {
    ChannelMatrix channel;
    std::vector<int> queues;
    std::vector<int> batteries;

    bool operator==(const SystemState&) const = default;
};

/// (c, phi). `assignment` is row-major (ue, subchannel); `fpc` holds indices
/// into RanConfig::fpc_actions.
struct ControlAction {
    std::vector<std::uint8_t> assignment;
    std::vector<int> fpc;

    bool operator==(const ControlAction&) const = default;
};

/// Per-slice Lagrange multipliers.
using Multipliers = std::vector<double>;

/// Quantities that depend only on the scenario, precomputed per UE.
struct UeModel {
    std::size_t slice = 0;
    std::size_t local = 0;
    double distance = 1.0;
    double path_loss = 1.0;
    std::vector<double> power;         // per fpc action, W
    std::vector<int> energy_cost;      // battery units per transmitting slot, per fpc action
    std::vector<std::vector<double>> rate;  // [fpc][fading level], bits/s on one subchannel
};

/// Outcome of one slot for one UE under a given aggregate raw rate and power.
struct UeOutcome {
    double raw_rate = 0.0;
    bool feasible = false;
    int served = 0;     // packets
    int consumed = 0;   // battery units
    double delivered_rate = 0.0;  // served * Z / slot, bits/s
};

/// Immutable, validated scenario with resolved placements and derived tables.
class Instance {
public:
    explicit Instance(ScenarioConfig config);

    const ScenarioConfig& config() const { return config_; }
    const RanConfig& ran() const { return config_.ran; }
    const FadingAlphabet& alphabet() const { return alphabet_; }
    const std::vector<UePlacement>& placements() const { return placements_; }

    std::size_t num_ues() const { return ues_.size(); }
    std::size_t num_subchannels() const { return static_cast<std::size_t>(config_.ran.num_subchannels); }
    std::size_t num_slices() const { return config_.slices.size(); }
    std::size_t num_fpc() const { return config_.ran.fpc_actions.size(); }
    std::size_t num_levels() const { return alphabet_.size(); }

    const UeModel& ue(std::size_t u) const { return ues_[u]; }
    const SliceConfig& slice_of(std::size_t u) const { return config_.slices[ues_[u].slice]; }
    const std::vector<std::size_t>& ues_in_slice(std::size_t m) const { return slice_members_[m]; }

    const std::vector<double>& packet_pmf(std::size_t m) const { return packet_pmf_[m]; }
    const std::vector<double>& energy_pmf(std::size_t m) const { return energy_pmf_[m]; }

    int buffer_capacity(std::size_t u) const { return slice_of(u).buffer_capacity; }
    int battery_capacity(std::size_t u) const { return slice_of(u).battery_capacity; }

    /// Zero queues, full batteries, lowest channel level everywhere.
    SystemState initial_state() const;
    /// All-idle action with the lowest fpc action per UE.
    ControlAction idle_action() const;

private:
    ScenarioConfig config_;
    FadingAlphabet alphabet_;
    std::vector<UePlacement> placements_;
    std::vector<UeModel> ues_;
    std::vector<std::vector<std::size_t>> slice_members_;
    std::vector<std::vector<double>> packet_pmf_;
    std::vector<std::vector<double>> energy_pmf_;
};

/// Sum of per-subchannel rates of UE u over its assigned subchannels.
double aggregate_rate(const Instance& inst, std::size_t u, int fpc, const ChannelMatrix& channel,
                      std::span<const std::uint8_t> assignment);

/// Applies the energy gate, packet quantisation and battery cost for one slot.
UeOutcome resolve_ue(const Instance& inst, std::size_t u, int q, int e, double raw_rate, int fpc);

/// Resolves every UE for a full (state, action) pair.
std::vector<UeOutcome> resolve_all(const Instance& inst, const SystemState& state, const ControlAction& action);

/// Marginal next-queue and next-battery pmfs of UE u after serving `served`
/// packets and consuming `consumed` units from (q, e).
struct UeNextPmf {
    std::vector<double> queue;
    std::vector<double> battery;
};
UeNextPmf next_state_pmf(const Instance& inst, std::size_t u, int q, int e, int served, int consumed);

/// Expectation over arrivals of values[q'][e'] (row-major, (B^E + 1) columns).
double expected_next_value(const Instance& inst, std::size_t u, int q, int e, int served, int consumed,
                           std::span<const double> values);

/// Per-stage Lagrangian reward
/// sum_m [ w_m R_m rate_scale - eta_m (dhat_m - D_m^max) delay_scale ]
/// with R_m the delivered rate of slice m and dhat_m the queue-based delay surrogate.
double lagrangian_reward(const Instance& inst, const Multipliers& eta, std::span<const int> queues,
                         std::span<const double> delivered_rates);

/// Per-slice delay surrogate sum_i Q_i slot / lambda_m.
std::vector<double> slice_delay_surrogates(const Instance& inst, std::span<const int> queues);

/// Throws std::invalid_argument when the action violates its invariants.
void check_action(const Instance& inst, const ControlAction& action);

}  // namespace slicing
