#pragma once

#include "slicing/cmdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace oracles {

inline double poisson_pmf(double rate, int cap, int k) {
    if (rate <= 0) return k == 0 ? 1.0 : 0.0;
    if (k < cap) return std::exp(k * std::log(rate) - rate - std::lgamma(k + 1.0));
    double below = 0;
    for (int j = 0; j < cap; ++j) below += poisson_pmf(rate, cap, j);
    return 1 - below;
}

/// Dense model of a one-UE, one-subchannel instance built straight from the
/// physical description, indexed like the library's full state space.
struct Chain {
    std::size_t states = 0;
    // options[s] lists distinct (reward, row) pairs; action[s][j] is a library action index.
    std::vector<std::vector<double>> reward;
    std::vector<std::vector<std::vector<double>>> row;
    std::vector<std::vector<std::size_t>> action;
};

inline Chain single_ue_chain(const slicing::ExactModel& model, const slicing::Multipliers& eta) {
    const auto& inst = model.instance();
    const auto& space = model.space();
    const auto& sl = inst.config().slices[0];
    const auto& ran = inst.ran();
    const auto& ue = inst.ue(0);
    const int bq = sl.buffer_capacity, be = sl.battery_capacity;
    const std::size_t K = inst.num_levels();
    const double slot = ran.slot_duration;

    Chain c;
    c.states = space.size();
    c.reward.resize(c.states);
    c.row.resize(c.states);
    c.action.resize(c.states);
    for (std::size_t s = 0; s < c.states; ++s) {
        auto st = space.state(s);
        const int h = st.channel[0], q = st.queues[0], e = st.batteries[0];
        std::map<std::pair<int, int>, std::size_t> seen;  // (served, consumed) -> option
        for (std::size_t a = 0; a < model.num_actions(); ++a) {
            const auto& act = model.actions()[a];
            const int f = act.fpc[0];
            double raw = act.assignment[0] ? ue.rate[f][h] : 0.0;
            double power = ue.power[f];
            int served = 0, consumed = 0;
            if (raw > 0) {
                double need = std::min(power * q * sl.packet_size / raw, power * slot);
                bool ok = e * sl.energy_unit > need;
                int cap = ok ? static_cast<int>(std::floor(raw * slot / sl.packet_size + 1e-9)) : 0;
                served = std::min(cap, q);
                if (served > 0) consumed = std::max(1, static_cast<int>(std::ceil(power * slot / sl.energy_unit - 1e-9)));
            }
            if (seen.count({served, consumed})) continue;
            seen[{served, consumed}] = c.action[s].size();
            double rate = served * sl.packet_size / slot;
            double delay = q * slot / sl.packet_arrival_rate;
            c.reward[s].push_back(sl.weight * rate * inst.config().objective.rate_scale -
                                  eta[0] * (delay - sl.max_delay) * inst.config().objective.delay_scale);
            std::vector<double> next(c.states, 0.0);
            for (int ap = 0; ap <= bq; ++ap) {
                double pa = sl.task_probability * poisson_pmf(sl.packet_arrival_rate, bq, ap) +
                            (ap == 0 ? 1 - sl.task_probability : 0.0);
                int q2 = std::clamp(q - served + ap, 0, bq);
                for (int ae = 0; ae <= be; ++ae) {
                    double pe = poisson_pmf(sl.energy_arrival_rate, be, ae);
                    int e2 = std::clamp(e - consumed + ae, 0, be);
                    for (std::size_t h2 = 0; h2 < K; ++h2) {
                        slicing::SystemState n{{static_cast<std::uint8_t>(h2)}, {q2}, {e2}};
                        next[space.index(n)] += pa * pe / static_cast<double>(K);
                    }
                }
            }
            c.row[s].push_back(std::move(next));
            c.action[s].push_back(a);
        }
    }
    return c;
}

inline double average_reward(const Chain& c, const std::vector<std::size_t>& choice) {
    const auto n = static_cast<Eigen::Index>(c.states);
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd r(n), b = Eigen::VectorXd::Zero(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        r(s) = c.reward[s][choice[s]];
        for (Eigen::Index t = 0; t < n; ++t) A(t, s) = c.row[s][choice[s]][t] - (s == t ? 1.0 : 0.0);
    }
    A.row(n - 1).setOnes();
    b(n - 1) = 1;
    Eigen::VectorXd pi = A.fullPivLu().solve(b);
    return pi.dot(r);
}

/// Best average reward over every deterministic stationary policy.
inline double enumerate_policies(const Chain& c) {
    std::vector<std::size_t> choice(c.states, 0);
    double best = -std::numeric_limits<double>::infinity();
    for (;;) {
        best = std::max(best, average_reward(c, choice));
        std::size_t s = 0;
        while (s < c.states && ++choice[s] == c.reward[s].size()) choice[s++] = 0;
        if (s == c.states) break;
    }
    return best;
}

}  // namespace oracles
