#include "slicing/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slicing {

std::vector<double> truncated_poisson_pmf(double rate, int cap) {
    std::vector<double> pmf(cap + 1, 0.0);
    if (rate <= 0) {
        pmf[0] = 1.0;
        return pmf;
    }
    double p = std::exp(-rate);
    double acc = 0.0;
    for (int k = 0; k < cap; ++k) {
        pmf[k] = p;
        acc += p;
        p *= rate / (k + 1);
    }
    pmf[cap] = std::max(0.0, 1.0 - acc);
    return pmf;
}

std::vector<double> packet_arrival_pmf(const SliceConfig& slice) {
    auto pmf = truncated_poisson_pmf(slice.packet_arrival_rate, slice.buffer_capacity);
    for (auto& p : pmf) p *= slice.task_probability;
    pmf[0] += 1.0 - slice.task_probability;
    return pmf;
}

std::vector<double> energy_arrival_pmf(const SliceConfig& slice) {
    return truncated_poisson_pmf(slice.energy_arrival_rate, slice.battery_capacity);
}

ArrivalSample sample_arrivals(const SliceConfig& slice, Rng& rng) {
    ArrivalSample a;
    std::bernoulli_distribution task(slice.task_probability);
    if (task(rng) && slice.packet_arrival_rate > 0) {
        std::poisson_distribution<int> packets(slice.packet_arrival_rate);
        a.offered_packets = packets(rng);
        a.packets = std::min(a.offered_packets, slice.buffer_capacity);
    }
    if (slice.energy_arrival_rate > 0) {
        std::poisson_distribution<int> energy(slice.energy_arrival_rate);
        a.energy_units = std::min(energy(rng), slice.battery_capacity);
    }
    return a;
}

int step_queue(int q, int arrived, int served, int capacity) {
    return std::min(std::max(q + arrived - served, 0), capacity);
}

int step_energy(int e, int harvested, int consumed, int capacity) {
    return std::min(std::max(e + harvested - consumed, 0), capacity);
}

bool energy_feasible(int e, double power, int q, double rate, const SliceConfig& slice, double slot_duration) {
    double stored = e * slice.energy_unit;
    double full_slot = power * slot_duration;
    double needed = rate > 0 ? std::min(power * (q * slice.packet_size) / rate, full_slot) : full_slot;
    return stored > needed;
}

double effective_rate(double raw_rate, bool feasible) { return feasible ? raw_rate : 0.0; }

double drop_probability(double avg_rate, double slot_duration, const SliceConfig& slice) {
    if (slice.packet_arrival_rate <= 0) throw UndefinedMetric("drop probability undefined for zero arrival rate");
    double served = avg_rate * slot_duration / slice.packet_size;
    return std::clamp(1.0 - served / slice.packet_arrival_rate, 0.0, 1.0);
}

double average_delay(double avg_queue, double avg_rate, double slot_duration, const SliceConfig& slice) {
    if (avg_rate <= 0) throw UndefinedMetric("average delay is infinite at zero service rate");
    double served_per_slot = avg_rate * slot_duration / slice.packet_size;
    return slot_duration * avg_queue / served_per_slot;
}

double slice_delay(const std::vector<double>& per_ue_delays) {
    return std::accumulate(per_ue_delays.begin(), per_ue_delays.end(), 0.0);
}

double delay_surrogate(int q, const SliceConfig& slice, double slot_duration) {
    if (slice.packet_arrival_rate <= 0) return 0.0;
    return q * slot_duration / slice.packet_arrival_rate;
}

}  // namespace slicing
