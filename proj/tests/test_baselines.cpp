#include "doctest.h"
#include "fixtures.hpp"

#include "slicing/baselines.hpp"

#include <algorithm>

using namespace slicing;

namespace {
std::vector<int> per_slice_count(const Instance& inst, const ControlAction& a) {
    std::vector<int> count(inst.num_slices(), 0);
    for (std::size_t u = 0; u < inst.num_ues(); ++u)
        for (std::size_t n = 0; n < inst.num_subchannels(); ++n)
            if (a.assignment[u * inst.num_subchannels() + n]) ++count[inst.ue(u).slice];
    return count;
}
}  // namespace

TEST_CASE("random baseline splits subchannels equally across slices") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    auto s = inst.initial_state();
    Rng rng(2);
    for (std::int64_t t = 0; t < 50; ++t) {
        auto a = random_policy(inst, s, t, rng);
        REQUIRE_NOTHROW(check_action(inst, a));
        CHECK(per_slice_count(inst, a) == std::vector<int>{2, 2, 2});
        CHECK(a.fpc == std::vector<int>(6, 2));
    }
}

TEST_CASE("leftover subchannels rotate over slices") {
    auto c = load_scenario(fixtures::scenario_path("table3.json"));
    c.ran.num_subchannels = 7;
    Instance inst(c);
    auto s = inst.initial_state();
    s.channel.assign(6 * 7, 0);
    Rng rng(2);
    std::vector<int> total(3, 0);
    for (std::int64_t t = 0; t < 3; ++t) {
        auto count = per_slice_count(inst, random_policy(inst, s, t, rng));
        std::vector<int> expect{2, 2, 2};
        expect[t] = 3;
        CHECK(count == expect);
    }
}

TEST_CASE("random baseline draws UEs uniformly within a slice") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    auto s = inst.initial_state();
    Rng rng(8);
    std::vector<double> hits(6, 0.0);
    const int draws = 20000;
    for (int t = 0; t < draws; ++t) {
        auto a = random_policy(inst, s, t, rng);
        for (std::size_t u = 0; u < 6; ++u)
            hits[u] += std::count(a.assignment.begin() + u * 6, a.assignment.begin() + (u + 1) * 6, 1);
    }
    // two subchannels per slice, two UEs per slice: one per slot on average
    for (double h : hits) CHECK(h / draws == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("QSI baseline is the per-subchannel argmax of backlog-capped rate") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    Rng rng(13);
    const double slot = inst.ran().slot_duration;
    for (int trial = 0; trial < 500; ++trial) {
        SystemState s = inst.initial_state();
        for (auto& h : s.channel) h = static_cast<std::uint8_t>(rng() % inst.num_levels());
        for (std::size_t u = 0; u < 6; ++u) {
            s.queues[u] = static_cast<int>(rng() % (inst.buffer_capacity(u) + 1));
            s.batteries[u] = static_cast<int>(rng() % (inst.battery_capacity(u) + 1));
        }
        auto a = qsi_policy(inst, s);
        CHECK(a.fpc == std::vector<int>(6, 2));
        for (std::size_t n = 0; n < 6; ++n) {
            int owner = -1;
            double best = 0;
            for (std::size_t u = 0; u < 6; ++u) {
                const auto& sl = inst.slice_of(u);
                double r = inst.ue(u).rate[2][s.channel[u * 6 + n]];
                double score = sl.weight * std::min(s.queues[u] * sl.packet_size / slot, r);
                if (score > best) {
                    best = score;
                    owner = static_cast<int>(u);
                }
            }
            for (std::size_t u = 0; u < 6; ++u) REQUIRE(a.assignment[u * 6 + n] == (static_cast<int>(u) == owner));
        }
    }
}

TEST_CASE("QSI baseline idles with empty queues and ignores batteries") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    auto s = inst.initial_state();
    CHECK(qsi_policy(inst, s).assignment == std::vector<std::uint8_t>(36, 0));
    s.queues = {1, 0, 0, 0, 0, 0};
    auto full = qsi_policy(inst, s);
    s.batteries.assign(6, 0);
    CHECK(qsi_policy(inst, s) == full);
    CHECK(std::count(full.assignment.begin(), full.assignment.begin() + 6, 1) == 6);
}
