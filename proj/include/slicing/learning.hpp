#pragma once

#include "slicing/environment.hpp"
#include "slicing/qfactor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace slicing {

struct LearnerState {
    QFactorStore store;
    Multipliers multipliers;
    std::int64_t slot = 0;
    std::vector<std::pair<int, int>> reference;  // per UE (queue, battery)
    double last_q_delta = 0.0;
    double last_lm_delta = 0.0;
    std::vector<double> delay_estimate;  // per slice, seconds
    double rate_estimate = 0.0;          // running mean of the weighted-sum delivered rate, bits/s

    bool operator==(const LearnerState&) const = default;
};

struct OnlineOptions {
    /// Effective window (slots) of the delay moving average once t exceeds it.
    int delay_window = 1000;
    /// Keep multipliers fixed (policy learning at a given eta).
    bool freeze_multipliers = false;
};

/// Zero tables, eta at the floor, reference (0, B^E) per UE, slot 0.
LearnerState init_learner(const Instance& inst, const LearningSchedule& schedule);

/// CSI-aware allocation then power selection from the current tables.
ControlAction decide(const Instance& inst, const LearnerState& learner, const SystemState& state);

/// T <- T + step * (target - ref - T) at one entry; returns |change|.
double apply_q_update(UeTable& table, int q, int e, int c, double target, double ref, double step);

/// Updates both entries of every UE at its visited (Q, E), using the observed
/// channel row of the UE as the fading sample and the reference state under
/// the same sample as offset. Returns the largest |change|.
double update_q(const Instance& inst, LearnerState& learner, const SystemState& observed, double step);

/// eta_m <- clamp(eta_m + step (dbar_m - D_m^max) delay_scale, floor, ceiling). Returns the largest |change|.
double update_lm(const Instance& inst, LearnerState& learner, const LearningSchedule& schedule,
                 std::span<const double> delay_estimate, double step);

struct TraceRow {
    std::int64_t iteration = 0;
    double rate_estimate = 0.0;
    Multipliers eta;
    double max_q_delta = 0.0;
};

struct OnlineResult {
    std::vector<TraceRow> trace;
    bool converged = false;  // false means the iteration budget ran out
};

/// Algorithm loop: decide, step the environment, update tables, update
/// multipliers. Stops when both update magnitudes stay below their tolerances
/// for a full termination window, or after schedule.max_iterations slots.
OnlineResult run_online(const Instance& inst, Environment& env, LearnerState& learner, const LearningSchedule& schedule,
                        const OnlineOptions& options = {});

/// CSV: iteration, rate_estimate, eta_<slice>..., max_q_delta.
void write_trace_csv(const Instance& inst, const std::vector<TraceRow>& trace, const std::filesystem::path& path);

/// Checkpoint: learner header followed by the Q-factor store.
void write_checkpoint(std::ostream& out, const LearnerState& learner);
LearnerState read_checkpoint(std::istream& in);
void save_checkpoint(const LearnerState& learner, const std::filesystem::path& path);
LearnerState load_checkpoint(const std::filesystem::path& path);

}  // namespace slicing
