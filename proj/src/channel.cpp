#include "slicing/channel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace slicing {

double FadingAlphabet::discrete_mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < levels.size(); ++k) s += levels[k] * probabilities[k];
    return s;
}

FadingAlphabet build_alphabet(double mean, int levels) {
    if (!(mean > 0)) throw std::invalid_argument("fading mean must be > 0");
    if (levels < 1) throw std::invalid_argument("fading alphabet needs at least one level");

    FadingAlphabet a;
    a.mean = mean;
    a.levels.resize(levels);
    a.probabilities.assign(levels, 1.0 / levels);

    // For X ~ Exp(mean) on [lo, hi): E[X | bin] = mean + (lo e^{-lo/m} - hi e^{-hi/m}) / P(bin),
    // with hi e^{-hi/m} -> 0 for the last (unbounded) bin.
    const double p = 1.0 / levels;
    double lo = 0.0;
    for (int k = 0; k < levels; ++k) {
        double hi = (k + 1 == levels) ? std::numeric_limits<double>::infinity()
                                      : -mean * std::log1p(-p * (k + 1));
        double lo_term = lo * std::exp(-lo / mean);
        double hi_term = std::isinf(hi) ? 0.0 : hi * std::exp(-hi / mean);
        a.levels[k] = mean + (lo_term - hi_term) / p;
        lo = hi;
    }
    return a;
}

ChannelMatrix sample_channel(const FadingAlphabet& alphabet, std::size_t num_ues, std::size_t num_subchannels,
                             Rng& rng) {
    ChannelMatrix h(num_ues * num_subchannels, 0);
    if (alphabet.size() == 1) return h;
    std::discrete_distribution<int> pick(alphabet.probabilities.begin(), alphabet.probabilities.end());
    for (auto& v : h) v = static_cast<std::uint8_t>(pick(rng));
    return h;
}

double path_loss(double distance, double reference_gain, double exponent) {
    return reference_gain * std::pow(distance, -exponent);
}

double transmit_power(double baseline_power, double reference_gain, double distance, double exponent,
                      double fpc) {
    return baseline_power * std::pow(path_loss(distance, reference_gain, exponent), -fpc);
}

double subchannel_rate(double power, double gain, double noise, double bandwidth) {
    return bandwidth * std::log2(1.0 + power * gain / noise);
}

}  // namespace slicing
