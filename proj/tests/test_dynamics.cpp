#include "doctest.h"

#include "slicing/dynamics.hpp"

#include <cmath>
#include <numeric>

using namespace slicing;

namespace {
// P(X = k) for X ~ Poisson(rate), tail lumped onto cap, via lgamma.
double direct_pmf(double rate, int cap, int k) {
    if (k < cap) return std::exp(k * std::log(rate) - rate - std::lgamma(k + 1.0));
    double below = 0;
    for (int j = 0; j < cap; ++j) below += direct_pmf(rate, cap, j);
    return 1 - below;
}

double direct_mean(double rate, int cap) {
    double m = 0;
    for (int k = 0; k <= cap; ++k) m += k * direct_pmf(rate, cap, k);
    return m;
}

SliceConfig slice(double lambda_q, double lambda_e, int bq, int be, double beta = 1.0) {
    SliceConfig s;
    s.name = "s";
    s.packet_arrival_rate = lambda_q;
    s.energy_arrival_rate = lambda_e;
    s.buffer_capacity = bq;
    s.battery_capacity = be;
    s.task_probability = beta;
    s.packet_size = 1000;
    s.energy_unit = 1.0;
    return s;
}
}  // namespace

TEST_CASE("truncated Poisson pmf matches direct summation") {
    for (double rate : {0.5, 3.0, 7.0})
        for (int cap : {1, 4, 6}) {
            auto pmf = truncated_poisson_pmf(rate, cap);
            REQUIRE(pmf.size() == static_cast<std::size_t>(cap + 1));
            CHECK(std::accumulate(pmf.begin(), pmf.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
            for (int k = 0; k <= cap; ++k) CHECK(pmf[k] == doctest::Approx(direct_pmf(rate, cap, k)).epsilon(1e-10));
        }
    CHECK(truncated_poisson_pmf(0.0, 3) == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("sampled energy arrivals match the truncated mean") {
    auto s = slice(3, 3, 6, 6);
    Rng rng = make_rng(11, Stream::arrivals);
    const int draws = 1000000;
    double sum = 0;
    for (int i = 0; i < draws; ++i) {
        auto a = sample_arrivals(s, rng);
        REQUIRE(a.energy_units >= 0);
        REQUIRE(a.energy_units <= 6);
        sum += a.energy_units;
    }
    CHECK(sum / draws == doctest::Approx(direct_mean(3, 6)).epsilon(0.005));
}

TEST_CASE("task gate thins packet arrivals") {
    auto s = slice(2, 1, 4, 2, 0.3);
    auto pmf = packet_arrival_pmf(s);
    CHECK(pmf[0] == doctest::Approx(0.7 + 0.3 * std::exp(-2.0)));
    double mean = 0;
    for (std::size_t k = 0; k < pmf.size(); ++k) mean += k * pmf[k];
    CHECK(mean == doctest::Approx(0.3 * direct_mean(2, 4)));

    Rng rng = make_rng(5, Stream::arrivals);
    double sampled = 0, offered = 0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
        auto a = sample_arrivals(s, rng);
        REQUIRE(a.packets <= a.offered_packets);
        sampled += a.packets;
        offered += a.offered_packets;
    }
    CHECK(sampled / draws == doctest::Approx(mean).epsilon(0.02));
    CHECK(offered / draws == doctest::Approx(0.3 * 2).epsilon(0.02));
}

TEST_CASE("queue and battery steps stay in bounds") {
    Rng rng(17);
    std::uniform_int_distribution<int> cap_d(1, 8), v(0, 12);
    for (int i = 0; i < 100000; ++i) {
        int cap = cap_d(rng);
        int x = std::min(v(rng), cap), a = v(rng), s = v(rng);
        int q = step_queue(x, a, s, cap), e = step_energy(x, a, s, cap);
        REQUIRE(q >= 0);
        REQUIRE(q <= cap);
        REQUIRE(e >= 0);
        REQUIRE(e <= cap);
        REQUIRE(q == std::clamp(x + a - s, 0, cap));
    }
}

TEST_CASE("energy gate") {
    auto s = slice(1, 1, 4, 4);
    s.packet_size = 1000;
    s.energy_unit = 1.0;
    const double slot = 1.0;
    // power * slot = 1 J, e * e_u = 2 J, q Z / rate > slot: min picks power * slot
    CHECK(energy_feasible(2, 1.0, 4, 1000.0, s, slot));
    // e * e_u exactly equal to the requirement is not enough
    CHECK_FALSE(energy_feasible(1, 1.0, 4, 1000.0, s, slot));
    // short transmission: 2 packets at 4000 b/s take 0.5 s at 1 W
    s.energy_unit = 0.25;
    CHECK_FALSE(energy_feasible(2, 1.0, 2, 4000.0, s, slot));
    CHECK(energy_feasible(3, 1.0, 2, 4000.0, s, slot));
    // zero rate reduces to the full-slot branch
    CHECK_FALSE(energy_feasible(4, 1.0, 2, 0.0, s, slot));
    CHECK(energy_feasible(5, 1.0, 2, 0.0, s, slot));
    CHECK(effective_rate(5.0, true) == 5.0);
    CHECK(effective_rate(5.0, false) == 0.0);
}

TEST_CASE("drop probability, Little delay and surrogate") {
    auto s = slice(3, 1, 6, 6);
    s.packet_size = 1e4;
    // 1e6 b/s over 10 ms carries one packet per slot
    CHECK(drop_probability(1e6, 0.01, s) == doctest::Approx(2.0 / 3));
    CHECK(drop_probability(1e7, 0.01, s) == 0.0);
    CHECK(drop_probability(0.0, 0.01, s) == 1.0);
    CHECK(average_delay(2.0, 1e6, 0.01, s) == doctest::Approx(0.02));
    CHECK(slice_delay({0.01, 0.02}) == doctest::Approx(0.03));
    CHECK(delay_surrogate(3, s, 0.01) == doctest::Approx(0.01));

    auto idle = s;
    idle.packet_arrival_rate = 0;
    CHECK_THROWS_AS(drop_probability(1.0, 0.01, idle), UndefinedMetric);
    CHECK_THROWS_AS(average_delay(1.0, 0.0, 0.01, s), UndefinedMetric);
    CHECK(delay_surrogate(3, idle, 0.01) == 0.0);
}
