#pragma once

#include "slicing/config.hpp"
#include "slicing/rng.hpp"

#include <stdexcept>
#include <vector>

namespace slicing {

/// Raised when a metric is undefined for the given inputs (zero arrival rate,
/// zero service).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct ArrivalSample {
    int packets = 0;          // truncated at the buffer capacity
    int energy_units = 0;     // truncated at the battery capacity
    int offered_packets = 0;  // before truncation; used for drop accounting
};

/// Poisson(rate) pmf on {0..cap} with the tail mass lumped onto cap.
std::vector<double> truncated_poisson_pmf(double rate, int cap);

/// Packet arrivals per slot: 0 w.p. 1 - beta, else truncated Poisson. The
/// Bernoulli task gate is folded in.
std::vector<double> packet_arrival_pmf(const SliceConfig& slice);
std::vector<double> energy_arrival_pmf(const SliceConfig& slice);

ArrivalSample sample_arrivals(const SliceConfig& slice, Rng& rng);

int step_queue(int q, int arrived, int served, int capacity);
int step_energy(int e, int harvested, int consumed, int capacity);

/// Energy gate: e * e_u > min(power * q * Z / rate, power * slot). A zero rate
/// makes the first branch infinite.
bool energy_feasible(int e, double power, int q, double rate, const SliceConfig& slice, double slot_duration);

double effective_rate(double raw_rate, bool feasible);

/// clamp(1 - (avg_rate * slot / Z) / lambda, 0, 1). Throws UndefinedMetric when lambda == 0.
double drop_probability(double avg_rate, double slot_duration, const SliceConfig& slice);

/// Little's law: slot * avg_queue / (avg_rate * slot / Z) seconds. Throws
/// UndefinedMetric when avg_rate == 0.
double average_delay(double avg_queue, double avg_rate, double slot_duration, const SliceConfig& slice);

/// Slice delay as the sum of per-UE delays.
double slice_delay(const std::vector<double>& per_ue_delays);

/// Per-stage delay surrogate Q * slot / lambda for one UE (seconds); 0 when lambda == 0.
double delay_surrogate(int q, const SliceConfig& slice, double slot_duration);

}  // namespace slicing
