#pragma once

#include "slicing/cmdp.hpp"
#include "slicing/instance.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace slicing {

/// Per-subchannel Q-factors of one UE, indexed by (queue, battery, c). One
/// table serves every subchannel.
struct UeTable {
    int buffer_capacity = 0;
    int battery_capacity = 0;
    double theta = 0.0;
    std::vector<double> entries;

    UeTable() = default;
    UeTable(int bq, int be);

    std::size_t num_states() const { return static_cast<std::size_t>((buffer_capacity + 1) * (battery_capacity + 1)); }
    std::size_t offset(int q, int e, int c) const {
        return (static_cast<std::size_t>(q) * (battery_capacity + 1) + e) * 2 + c;
    }
    double& at(int q, int e, int c) { return entries[offset(q, e, c)]; }
    double at(int q, int e, int c) const { return entries[offset(q, e, c)]; }

    /// W(q, e) = max_c T(q, e, c), row-major with battery_capacity + 1 columns.
    std::vector<double> best_values() const;

    bool operator==(const UeTable&) const = default;
};

/// One table per UE in instance order (slices in order, UEs within a slice in order).
struct QFactorStore {
    std::vector<UeTable> tables;

    bool operator==(const QFactorStore&) const = default;
};

class StoreFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All-zero tables of the right dimensions.
QFactorStore make_store(const Instance& inst);

/// sum over UEs and subchannels of T_u(Q_u, E_u, c_u^n).
double global_q(const Instance& inst, const QFactorStore& store, const SystemState& state,
                std::span<const std::uint8_t> assignment);

/// Table-only rule: each subchannel goes to the UE with the largest positive
/// advantage T(q, e, 1) - T(q, e, 0), lowest index on ties.
std::vector<std::uint8_t> allocate_subchannels(const Instance& inst, const QFactorStore& store,
                                               const SystemState& state);

/// Per-subchannel per-stage reward of UE u on a single subchannel at the given
/// fading level: w * c * delivered_rate * rate_scale - (eta_m / N) (dhat - D_max / k_m) delay_scale.
double per_stage_ue_reward(const Instance& inst, const Multipliers& eta, std::size_t u, int q, int e, int c,
                           int fpc, std::size_t level);

/// w * delivered_rate * rate_scale + E[W(next)] for UE u transmitting with the
/// given aggregate raw rate (0 for idle).
double ue_lookahead(const Instance& inst, std::size_t u, int q, int e, double raw_rate, int fpc,
                    std::span<const double> w);

/// Right-hand side of the per-UE fixed point at (q, e) for c = 0 and c = 1,
/// with the fading expectation taken under `level_weights` (the alphabet prior
/// for the exact operator, empirical frequencies for a sample).
struct UeBackup {
    double idle = 0.0;
    double assigned = 0.0;
    double operator[](int c) const { return c ? assigned : idle; }
};
UeBackup ue_backup(const Instance& inst, const Multipliers& eta, std::size_t u, int q, int e,
                   std::span<const double> level_weights, std::span<const double> w);

/// Greedy CSI-aware allocation. Each round commits the (UE, j) pair whose j best
/// free subchannels raise that UE's one-step lookahead the most per subchannel;
/// stops when no gain is positive.
std::vector<std::uint8_t> allocate_subchannels_csi(const Instance& inst, const QFactorStore& store,
                                                   const SystemState& state);

/// Per UE, the fpc index maximising the one-step lookahead under its
/// assignment. Unassigned UEs get index 0.
std::vector<int> select_power(const Instance& inst, const QFactorStore& store, const SystemState& state,
                              std::span<const std::uint8_t> assignment);

/// CSI-aware allocation followed by power selection.
ControlAction decide_action(const Instance& inst, const QFactorStore& store, const SystemState& state);

/// Exact per-UE relative value iteration on the per-UE fixed point, normalised
/// so that T(0, B^E, 1) = 0.
QFactorStore solve_ue_tables(const Instance& inst, const Multipliers& eta, const SolveOptions& options = {});

/// Per UE, max over (q, e, c) of |RHS - theta - T|.
std::vector<double> fixed_point_residual(const Instance& inst, const QFactorStore& store, const Multipliers& eta);

/// Flat text format:
///   slicing-qstore 1
///   ues <U>
///   ue <index> <buffer_capacity> <battery_capacity> <theta>
///   <T(q,e,0)> <T(q,e,1)>      one line per (q, e), row-major
void write_store(std::ostream& out, const QFactorStore& store);
QFactorStore read_store(std::istream& in);
void save_store(const QFactorStore& store, const std::filesystem::path& path);
QFactorStore load_store(const std::filesystem::path& path);

}  // namespace slicing
