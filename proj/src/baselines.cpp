#include "slicing/baselines.hpp"

#include <algorithm>

namespace slicing {

int max_power_index(const Instance& inst) {
    const auto& phi = inst.ran().fpc_actions;
    return static_cast<int>(std::max_element(phi.begin(), phi.end()) - phi.begin());
}

ControlAction random_policy(const Instance& inst, const SystemState&, std::int64_t slot, Rng& rng) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels(), M = inst.num_slices();
    ControlAction a;
    a.assignment.assign(U * N, 0);
    a.fpc.assign(U, max_power_index(inst));
    const std::size_t base = N / M, extra = N % M;
    std::size_t n = 0;
    for (std::size_t m = 0; m < M; ++m) {
        // Slices (slot + j) mod M for j < extra take one leftover subchannel each.
        std::size_t shift = (m + M - static_cast<std::size_t>(slot % static_cast<std::int64_t>(M))) % M;
        std::size_t share = base + (shift < extra ? 1 : 0);
        const auto& members = inst.ues_in_slice(m);
        for (std::size_t k = 0; k < share; ++k, ++n) {
            if (members.empty()) continue;
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            a.assignment[members[pick(rng)] * N + n] = 1;
        }
    }
    return a;
}

ControlAction qsi_policy(const Instance& inst, const SystemState& state) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels();
    const int fmax = max_power_index(inst);
    const double slot = inst.ran().slot_duration;
    ControlAction a;
    a.assignment.assign(U * N, 0);
    a.fpc.assign(U, fmax);
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t best = U;
        double best_score = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
            const auto& s = inst.slice_of(u);
            double backlog = state.queues[u] * s.packet_size / slot;
            double rate = inst.ue(u).rate[fmax][state.channel[u * N + n]];
            double score = s.weight * std::min(backlog, rate);
            if (score > best_score) {
                best_score = score;
                best = u;
            }
        }
        if (best < U) a.assignment[best * N + n] = 1;
    }
    return a;
}

}  // namespace slicing
