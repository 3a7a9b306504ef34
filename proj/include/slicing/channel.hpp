#pragma once

#include "slicing/rng.hpp"

#include <cstdint>
#include <vector>

namespace slicing {

/// Finite fading alphabet for |g|^2: K representative power gains with their
/// probabilities.
struct FadingAlphabet {
    std::vector<double> levels;
    std::vector<double> probabilities;
    double mean = 1.0;

    std::size_t size() const { return levels.size(); }
    /// Sum of level * probability.
    double discrete_mean() const;
};

/// Splits the exponential law of |g|^2 (Rayleigh amplitude) with the given mean
/// into K equiprobable bins; each level is the conditional mean of its bin.
FadingAlphabet build_alphabet(double mean, int levels);

/// Channel matrix of level indices, row-major (ue, subchannel).
using ChannelMatrix = std::vector<std::uint8_t>;

ChannelMatrix sample_channel(const FadingAlphabet& alphabet, std::size_t num_ues, std::size_t num_subchannels,
                             Rng& rng);

/// A * d^-alpha.
double path_loss(double distance, double reference_gain, double exponent);

/// Fractional power control: P_m * (A d^-alpha)^-phi.
double transmit_power(double baseline_power, double reference_gain, double distance, double exponent,
                      double fpc);

/// Shannon rate B log2(1 + power * gain / noise) in bits/s, where gain is
/// fading level times path loss.
double subchannel_rate(double power, double gain, double noise, double bandwidth);

}  // namespace slicing
