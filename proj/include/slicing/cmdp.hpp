#pragma once

#include "slicing/instance.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <stdexcept>
#include <utility>
#include <vector>

namespace slicing {

class CapExceeded : public std::runtime_error {
public:
    CapExceeded(const std::string& what, double size) : std::runtime_error(what), size_(size) {}
    /// The computed product-space size that breached the cap.
    double size() const { return size_; }

private:
    double size_;
};

class NotConverged : public std::runtime_error {
public:
    NotConverged(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

enum class SpaceMode { full, reduced };

/// Enumeration of (H, Q, E) or (Q, E). Full indices are h * num_qe + qe where
/// h is a mixed-radix code over (ue, subchannel) channel levels and qe a
/// mixed-radix code over per-UE (q, e) pairs.
class StateSpace {
public:
    StateSpace(const Instance& inst, SpaceMode mode);

    SpaceMode mode() const { return mode_; }
    std::size_t size() const { return num_channel_ * num_qe_; }
    std::size_t num_channel_states() const { return num_channel_; }
    std::size_t num_qe() const { return num_qe_; }

    std::size_t channel_index(std::size_t s) const { return s / num_qe_; }
    std::size_t qe_index(std::size_t s) const { return s % num_qe_; }
    std::size_t compose(std::size_t h, std::size_t qe) const { return h * num_qe_ + qe; }

    SystemState state(std::size_t s) const;
    std::size_t index(const SystemState& state) const;

    ChannelMatrix channel(std::size_t h) const;
    double channel_probability(std::size_t h) const { return channel_prob_[h]; }
    void decode_qe(std::size_t qe, std::vector<int>& queues, std::vector<int>& batteries) const;
    std::size_t encode_qe(std::span<const int> queues, std::span<const int> batteries) const;

    /// Zero queues, full batteries, lowest channel level.
    std::size_t reference() const;

private:
    SpaceMode mode_;
    std::size_t num_ues_, num_sub_, num_levels_;
    std::size_t num_channel_ = 1, num_qe_ = 1;
    std::vector<int> bq_, be_;
    std::vector<double> channel_prob_;
};

/// Computed size of the full (or reduced) product space, as a double so that
/// huge scenarios do not overflow.
double state_space_size(const Instance& inst, SpaceMode mode);

/// Throws CapExceeded when the product-space size exceeds the scenario's exact_state_cap.
StateSpace enumerate_states(const Instance& inst, SpaceMode mode = SpaceMode::full);

/// Every joint action: owner (or none) per subchannel times an fpc index per UE.
/// Index 0 is the all-idle, lowest-power action.
std::vector<ControlAction> enumerate_actions(const Instance& inst);

using SparsePmf = std::vector<std::pair<std::size_t, double>>;

/// Pr[S' | S, a] over full next states: channel prior x per-UE queue and
/// battery transitions.
SparsePmf transition_kernel(const Instance& inst, const StateSpace& space, std::size_t state,
                            const ControlAction& action);

/// Pr[(Q', E') | S, a] over next (Q, E) codes.
SparsePmf qe_transition(const Instance& inst, const StateSpace& space, std::size_t state,
                        const ControlAction& action);

double per_stage_reward(const Instance& inst, const Multipliers& eta, const SystemState& state,
                        const ControlAction& action);

/// Cached rewards and transitions of a small instance. Rewards are kept split
/// into the weighted-rate part and per-slice delay surrogates so that a change
/// of multipliers needs no rebuild.
class ExactModel {
public:
    explicit ExactModel(const Instance& inst, double work_cap = 5e7);

    const Instance& instance() const { return inst_; }
    const StateSpace& space() const { return space_; }
    const std::vector<ControlAction>& actions() const { return actions_; }
    std::size_t num_actions() const { return actions_.size(); }

    double reward(std::size_t s, std::size_t a, const Multipliers& eta) const;
    double rate_reward(std::size_t s, std::size_t a) const { return rate_[s * actions_.size() + a]; }
    const std::vector<double>& delays(std::size_t s) const { return delay_[s]; }
    const SparsePmf& qe_row(std::size_t s, std::size_t a) const { return rows_[s * actions_.size() + a]; }

private:
    const Instance& inst_;
    StateSpace space_;
    std::vector<ControlAction> actions_;
    std::vector<double> rate_;
    std::vector<std::vector<double>> delay_;
    std::vector<SparsePmf> rows_;
};

struct SolveOptions {
    double tolerance = 1e-9;
    int max_iterations = 100000;
    /// Relative tolerance under which two action values count as tied; ties go to the lower action index.
    double tie_tolerance = 1e-9;
};

/// (theta, V) with V(reference) == 0 plus the greedy stationary policy over full states.
struct ValueTable {
    SpaceMode mode = SpaceMode::full;
    double theta = 0.0;
    std::vector<double> values;
    std::vector<std::size_t> policy;  // action index per full state
    int iterations = 0;
    double span = 0.0;
    std::vector<double> span_history;
};

/// Relative value iteration. Full mode iterates V over every (H, Q, E);
/// reduced mode iterates the expectation-over-CSI operator on (Q, E). Throws
/// NotConverged with the final span.
ValueTable relative_value_iteration(const ExactModel& model, const Multipliers& eta, SpaceMode mode,
                                    const SolveOptions& options = {});

/// Q-value of action a at full state s against a full or reduced value table.
double action_value(const ExactModel& model, const Multipliers& eta, const ValueTable& table, std::size_t s,
                    std::size_t a);

/// Greedy action index at full state s (lowest index among ties).
std::size_t greedy_action(const ExactModel& model, const Multipliers& eta, const ValueTable& table,
                          std::size_t s, double tie_tolerance = 1e-9);

/// V(Q, E) = sum_H Pr[H] V(H, Q, E), shifted so the reduced reference is 0.
ValueTable reduce_values(const ExactModel& model, const ValueTable& full);

/// max over full states of |theta + V(s) - max_a {g + E V(s')}|.
double bellman_residual(const ExactModel& model, const Multipliers& eta, const ValueTable& table);

struct PolicyEvaluation {
    double average_reward = 0.0;
    double average_rate_reward = 0.0;       // weighted rate part, scaled
    std::vector<double> slice_delay;        // stationary mean of the delay surrogate, seconds
    std::vector<double> stationary;
    bool ill_conditioned = false;
};

/// Solves the stationary law of the chain induced by `policy` (action index per full state).
PolicyEvaluation evaluate_policy(const ExactModel& model, const std::vector<std::size_t>& policy,
                                 const Multipliers& eta);

struct DualOptions {
    int max_outer = 200;
    /// A policy counts as feasible when every slice delay is within this
    /// relative slack of its bound.
    double feasibility_slack = 0.0;
    SolveOptions inner;
    bool throw_on_budget = true;
};

struct DualIterate {
    Multipliers eta;
    double average_reward = 0.0;
    std::vector<double> slice_delay;
};

struct DualResult {
    Multipliers eta;
    ValueTable solution;
    PolicyEvaluation evaluation;
    int iterations = 0;
    bool converged = false;
    std::vector<DualIterate> trace;
};

/// Projected subgradient on the multipliers around exact inner solves. The
/// returned policy is the final iterate when feasible, otherwise the feasible
/// iterate with the best weighted rate (if any). Throws NotConverged when the
/// multipliers still move after max_outer iterations.
DualResult dual_descent(const ExactModel& model, const LearningSchedule& schedule, const DualOptions& options = {});

/// CSV: state_index, channel, queues, batteries, value, assignment, fpc.
void write_value_table_csv(const ExactModel& model, const ValueTable& table, const std::filesystem::path& path);

}  // namespace slicing
