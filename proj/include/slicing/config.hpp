#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace slicing {

/// A file could not be opened or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed or invalid scenario files. `field()` names the first
/// offending key (empty for pure parse errors).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct RanConfig {
    double bandwidth_per_subchannel = 8e6;  // Hz
    int num_subchannels = 6;
    double slot_duration = 5e-3;            // s
    double cell_radius = 100.0;             // m
    double path_loss_exponent = 3.0;
    double reference_gain = 1e-3;           // linear, at 1 m
    double noise_power = 3.981071705534985e-14;  // W (-104 dBm)
    double fading_mean = 0.1;               // linear (-10 dB)
    int fading_levels = 4;
    std::vector<double> fpc_actions{0.6, 0.8, 1.0};

    bool operator==(const RanConfig&) const = default;
};

struct SliceConfig {
    std::string name;
    double weight = 1.0;
    int num_ues = 1;
    double baseline_power = 1e-11;   // W
    int buffer_capacity = 6;         // packets
    int battery_capacity = 6;        // energy units
    double task_probability = 1.0;
    double packet_arrival_rate = 3.0;   // packets / slot
    double energy_arrival_rate = 3.0;   // units / slot
    double max_delay = 0.1;             // s
    double packet_size = 1e5;           // bits
    double energy_unit = 0.0;           // J per battery unit; resolved at load

    bool operator==(const SliceConfig&) const = default;
};

struct UePlacement {
    std::size_t slice_id = 0;
    std::size_t ue_id = 0;
    double distance = 1.0;

    bool operator==(const UePlacement&) const = default;
};

/// Step sizes eps_t = q_step_scale / (1 + t)^q_step_exponent and
/// eps_eta(t) = lm_step_scale / (1 + t)^lm_step_exponent.
struct LearningSchedule {
    double q_step_scale = 1.0;
    double q_step_exponent = 0.6;
    double lm_step_scale = 0.1;
    double lm_step_exponent = 0.9;
    double lm_floor = 0.0;
    double lm_ceiling = 100.0;
    double q_tolerance = 1e-6;
    double lm_tolerance = 1e-6;
    std::int64_t max_iterations = 20000;
    int termination_window = 50;

    double q_step(std::int64_t t) const;
    double lm_step(std::int64_t t) const;

    bool operator==(const LearningSchedule&) const = default;
};

/// Unit scaling applied inside the Lagrangian per-stage reward:
/// rate terms are multiplied by rate_scale, delay terms by delay_scale.
struct ObjectiveScale {
    double rate_scale = 1.0;
    double delay_scale = 1.0;

    bool operator==(const ObjectiveScale&) const = default;
};

struct SimulationConfig {
    std::int64_t horizon = 100000;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 1;
    std::int64_t train_slots = 20000;

    bool operator==(const SimulationConfig&) const = default;
};

struct ScenarioConfig {
    RanConfig ran;
    std::vector<SliceConfig> slices;
    /// Pinned placements; when empty, UEs are placed from placement_seed.
    std::vector<UePlacement> placements;
    std::uint64_t placement_seed = 1;
    LearningSchedule learning;
    ObjectiveScale objective;
    SimulationConfig simulation;
    double exact_state_cap = 2e6;

    std::size_t total_ues() const;

    bool operator==(const ScenarioConfig&) const = default;
};

double dbm_to_watts(double dbm);
double db_to_linear(double db);

/// Checks every type invariant; throws ConfigError naming the first violation.
void validate(const ScenarioConfig& config);

ScenarioConfig parse_scenario(const std::string& text);
/// Throws IoError when the file cannot be read, ConfigError when it is invalid.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Canonical JSON text (linear units). parse_scenario(to_json_text(c)) == c.
std::string to_json_text(const ScenarioConfig& config);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

/// Uniform placement over the disk of radius cell_radius: d = D * sqrt(U).
std::vector<UePlacement> place_ues(const ScenarioConfig& config, std::uint64_t seed);

/// Pinned placements if present, otherwise place_ues(config, placement_seed).
std::vector<UePlacement> resolve_placements(const ScenarioConfig& config);

/// FNV-1a over the canonical JSON text, hex encoded.
std::string config_hash(const ScenarioConfig& config);

}  // namespace slicing
