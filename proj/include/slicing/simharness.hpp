#pragma once

#include "slicing/cmdp.hpp"
#include "slicing/environment.hpp"
#include "slicing/learning.hpp"
#include "slicing/qfactor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace slicing {

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual ControlAction act(const SystemState& state, std::int64_t slot, Rng& rng) = 0;
};

class ProposedPolicy : public Policy {
public:
    ProposedPolicy(const Instance& inst, QFactorStore store) : inst_(inst), store_(std::move(store)) {}
    std::string name() const override { return "proposed"; }
    ControlAction act(const SystemState& state, std::int64_t, Rng&) override { return decide_action(inst_, store_, state); }
    const QFactorStore& store() const { return store_; }

private:
    const Instance& inst_;
    QFactorStore store_;
};

class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(const Instance& inst) : inst_(inst) {}
    std::string name() const override { return "random"; }
    ControlAction act(const SystemState& state, std::int64_t slot, Rng& rng) override;

private:
    const Instance& inst_;
};

class QsiPolicy : public Policy {
public:
    explicit QsiPolicy(const Instance& inst) : inst_(inst) {}
    std::string name() const override { return "qsi"; }
    ControlAction act(const SystemState& state, std::int64_t, Rng&) override;

private:
    const Instance& inst_;
};

/// Looks up the exact solver's greedy action for the full state.
class ExactPolicy : public Policy {
public:
    ExactPolicy(std::shared_ptr<const ExactModel> model, std::vector<std::size_t> policy)
        : model_(std::move(model)), policy_(std::move(policy)) {}
    std::string name() const override { return "exact"; }
    ControlAction act(const SystemState& state, std::int64_t, Rng&) override;

private:
    std::shared_ptr<const ExactModel> model_;
    std::vector<std::size_t> policy_;
};

const std::vector<std::string>& policy_names();
bool is_policy_name(const std::string& name);

/// Trains the proposed policy online for simulation.train_slots slots on its
/// own environment stream and returns the frozen greedy policy.
QFactorStore train_proposed(const Instance& inst, std::uint64_t seed, std::int64_t slots,
                            const OnlineOptions& options = {});

/// Builds a named policy for `inst`. "exact" throws CapExceeded beyond the solver cap.
std::unique_ptr<Policy> make_policy(const std::string& name, const Instance& inst, std::uint64_t seed);

struct EpisodeMetrics {
    double weighted_sum_rate = 0.0;          // bits/s
    std::vector<double> per_slice_rate;      // bits/s
    std::vector<double> per_slice_drop;      // dropped / offered packets
    std::vector<double> per_slice_delay;     // Little's law, summed over UEs, seconds
    std::vector<double> per_slice_sojourn;   // measured FIFO sojourn, summed over UEs, seconds
    std::vector<double> per_slice_surrogate; // mean of the queue-based delay surrogate, seconds
    std::vector<double> per_ue_queue;        // mean queue length, packets
    std::vector<double> per_ue_served;       // mean packets served per slot
    std::vector<double> per_ue_sojourn;      // seconds
    std::vector<bool> constraint_violations; // per_slice_delay > D_max
    double average_lagrangian = 0.0;
    std::int64_t slots = 0;
};

struct EpisodeOptions {
    std::int64_t horizon = 100000;
    double warmup_fraction = 0.1;
    /// Multipliers used for the reported Lagrangian reward.
    Multipliers eta;
};

EpisodeMetrics run_episode(const Instance& inst, Policy& policy, std::uint64_t seed, const EpisodeOptions& options);

/// Number of sweep workers: SLICING_WORKERS if set and positive, otherwise the hardware concurrency.
std::size_t worker_count();

struct SweepRow {
    std::string policy;
    double value = 0.0;
    std::uint64_t seed = 0;
    EpisodeMetrics metrics;
};

struct SweepSummary {
    std::string policy;
    double value = 0.0;
    std::size_t samples = 0;
    double mean_rate = 0.0, se_rate = 0.0;
    std::vector<double> mean_slice_rate, se_slice_rate;
    std::vector<double> mean_drop, se_drop;
    std::vector<double> mean_delay;
};

enum class SweepKind { subchannels, battery, arrival };

std::optional<SweepKind> parse_sweep_kind(const std::string& name);
std::string to_string(SweepKind kind);

/// Applies one sweep value to a scenario. Battery values set the largest
/// slice capacity; other slices keep their ratio to it (at least 1).
ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepKind kind, double value);

struct SweepSpec {
    SweepKind kind = SweepKind::subchannels;
    std::vector<double> values;
    std::vector<std::string> policies;
    std::vector<std::uint64_t> seeds;
    EpisodeOptions episode;
    std::size_t workers = 0;  // 0 -> worker_count()
};

/// Rows ordered by (value, policy, seed), independent of the worker count.
std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const SweepSpec& spec);
std::vector<SweepRow> sweep_subchannels(const ScenarioConfig& base, SweepSpec spec);
std::vector<SweepRow> sweep_battery(const ScenarioConfig& base, SweepSpec spec);
std::vector<SweepRow> sweep_arrival(const ScenarioConfig& base, SweepSpec spec);

/// Means and standard errors per (policy, value), in first-appearance order.
std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows, std::size_t num_slices);

struct ConvergenceResult {
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<TraceRow>> traces;
    /// Best achievable weighted-sum rate (bits/s) from the exact solver at
    /// eta = floor, when the instance is within the cap.
    std::optional<double> oracle_rate;
    std::string notice;
};

ConvergenceResult convergence_experiment(const ScenarioConfig& config, const LearningSchedule& schedule,
                                         const std::vector<std::uint64_t>& seeds, std::size_t workers = 0);

/// Seed-averaged rate estimate per iteration.
std::vector<double> mean_trace(const ConvergenceResult& result);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::vector<std::string>& slice_names,
                     const std::string& parameter, const std::filesystem::path& path);
void write_summary_csv(const std::vector<SweepSummary>& rows, const std::vector<std::string>& slice_names,
                       const std::string& parameter, const std::filesystem::path& path);
void write_convergence_csv(const ConvergenceResult& result, const std::vector<std::string>& slice_names,
                           const std::filesystem::path& path);

struct Manifest {
    std::string command;
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::map<std::string, std::string> flags;
    std::vector<std::string> outputs;
};

/// key=value text file with the code version, config hash, seeds, flags and output files.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Version string compiled into the library.
const char* code_version();

}  // namespace slicing
