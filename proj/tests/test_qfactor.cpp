#include "doctest.h"
#include "fixtures.hpp"

#include "slicing/cmdp.hpp"
#include "slicing/qfactor.hpp"

#include <sstream>

using namespace slicing;

namespace {
QFactorStore random_store(const Instance& inst, std::uint64_t seed) {
    auto store = make_store(inst);
    Rng rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& t : store.tables) {
        t.theta = d(rng);
        for (auto& x : t.entries) x = d(rng);
    }
    return store;
}

SystemState random_state(const Instance& inst, Rng& rng) {
    SystemState s = inst.initial_state();
    for (auto& h : s.channel) h = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, inst.num_levels() - 1)(rng));
    for (std::size_t u = 0; u < inst.num_ues(); ++u) {
        s.queues[u] = std::uniform_int_distribution<int>(0, inst.buffer_capacity(u))(rng);
        s.batteries[u] = std::uniform_int_distribution<int>(0, inst.battery_capacity(u))(rng);
    }
    return s;
}
}  // namespace

TEST_CASE("global Q-factor sums per-subchannel entries") {
    Instance inst(fixtures::two_slices());
    auto store = make_store(inst);
    store.tables[0].at(1, 2, 1) = 5;
    store.tables[0].at(1, 2, 0) = 1;
    store.tables[1].at(0, 1, 1) = -2;
    store.tables[1].at(0, 1, 0) = 3;
    SystemState s = inst.initial_state();
    s.queues = {1, 0};
    s.batteries = {2, 1};
    // UE 0 holds subchannel 0, UE 1 holds nothing
    std::vector<std::uint8_t> a{1, 0, 0, 0};
    CHECK(global_q(inst, store, s, a) == doctest::Approx(5 + 1 + 3 + 3));
}

TEST_CASE("table-only allocation is the exhaustive argmax of the global Q-factor") {
    Instance inst(fixtures::two_slices());
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        auto store = random_store(inst, trial);
        auto s = random_state(inst, rng);
        auto got = allocate_subchannels(inst, store, s);
        // 3 owner choices (none, UE 0, UE 1) per subchannel column
        double best = -1e300;
        std::vector<std::uint8_t> arg;
        for (int c0 = 0; c0 < 3; ++c0)
            for (int c1 = 0; c1 < 3; ++c1) {
                std::vector<std::uint8_t> a(4, 0);
                if (c0) a[(c0 - 1) * 2 + 0] = 1;
                if (c1) a[(c1 - 1) * 2 + 1] = 1;
                double v = global_q(inst, store, s, a);
                if (v > best) {
                    best = v;
                    arg = a;
                }
            }
        REQUIRE(got == arg);
    }
}

TEST_CASE("per-stage UE reward by hand") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    const std::size_t u = 2;  // URLLC
    const auto& sl = inst.slice_of(u);
    Multipliers eta{0.0, 3.0, 0.0};
    const int q = 4, e = 6, fpc = 2;
    const std::size_t level = 1;
    double raw = inst.ue(u).rate[fpc][level];
    int packets = std::min(q, static_cast<int>(raw * 0.004 / sl.packet_size));
    double rate_term = packets * sl.packet_size / 0.004 * 1e-6;
    double dhat = q * 0.004 / sl.packet_arrival_rate;
    // (eta / N) (dhat - Dmax / k) delay_scale
    double penalty = 3.0 / 6 * (dhat - 0.01 / 2) * 1e3;
    CHECK(per_stage_ue_reward(inst, eta, u, q, e, 1, fpc, level) == doctest::Approx(rate_term - penalty));
    CHECK(per_stage_ue_reward(inst, eta, u, q, e, 0, fpc, level) == doctest::Approx(-penalty));
}

TEST_CASE("per-UE tables solve their fixed point") {
    Instance inst(fixtures::two_slices());
    Multipliers eta{0.5, 0.1};
    auto store = solve_ue_tables(inst, eta);
    for (double r : fixed_point_residual(inst, store, eta)) CHECK(r < 1e-6);
    for (const auto& t : store.tables) {
        CHECK(t.at(0, t.battery_capacity, 1) == doctest::Approx(0.0));
        for (double x : t.entries) CHECK(std::isfinite(x));
        // the assigned option includes staying idle
        for (int q = 0; q <= t.buffer_capacity; ++q)
            for (int e = 0; e <= t.battery_capacity; ++e) CHECK(t.at(q, e, 1) >= t.at(q, e, 0) - 1e-9);
    }
}

TEST_CASE("single-UE decomposition is exact") {
    Instance inst(fixtures::single_ue(2, 2, 2));
    ExactModel model(inst);
    for (double e : {0.0, 1.5}) {
        Multipliers eta{e};
        auto exact = relative_value_iteration(model, eta, SpaceMode::full);
        auto store = solve_ue_tables(inst, eta);
        CHECK(store.tables[0].theta == doctest::Approx(exact.theta).epsilon(1e-7));
        for (std::size_t s = 0; s < model.space().size(); ++s) {
            auto a = decide_action(inst, store, model.space().state(s));
            const auto& b = model.actions()[exact.policy[s]];
            REQUIRE(a.assignment == b.assignment);
            if (b.assignment[0]) REQUIRE(a.fpc == b.fpc);
        }
    }
}

TEST_CASE("decisions respect action invariants") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    auto store = random_store(inst, 3);
    Rng rng(21);
    for (int i = 0; i < 300; ++i) {
        auto s = random_state(inst, rng);
        auto a = decide_action(inst, store, s);
        REQUIRE_NOTHROW(check_action(inst, a));
        for (std::size_t u = 0; u < inst.num_ues(); ++u) {
            bool any = false;
            for (std::size_t n = 0; n < inst.num_subchannels(); ++n) any |= a.assignment[u * 6 + n] != 0;
            if (!any) REQUIRE(a.fpc[u] == 0);
        }
    }
}

TEST_CASE("allocation bundles subchannels when one alone carries no packet") {
    auto c = fixtures::single_ue(2, 2, 2);
    c.ran.num_subchannels = 2;
    Instance probe(c);
    // one lowest-level subchannel carries two thirds of a packet
    c.slices[0].packet_size = 1.5 * probe.ue(0).rate[1][0] * c.ran.slot_duration;
    Instance inst(c);
    auto store = make_store(inst);
    SystemState s = inst.initial_state();
    s.queues = {1};
    auto a = decide_action(inst, store, s);
    CHECK(a.assignment == std::vector<std::uint8_t>{1, 1});
    CHECK(a.fpc == std::vector<int>{1});
    s.queues = {0};
    CHECK(decide_action(inst, store, s).assignment == std::vector<std::uint8_t>{0, 0});
}

TEST_CASE("store round-trips and rejects bad input") {
    Instance inst(fixtures::two_slices());
    auto store = random_store(inst, 12);
    std::stringstream buf;
    write_store(buf, store);
    CHECK(read_store(buf) == store);

    std::stringstream wrong_magic("slicing-something 1\n");
    CHECK_THROWS_AS(read_store(wrong_magic), StoreFormatError);
    std::stringstream wrong_version("slicing-qstore 99\nues 0\n");
    CHECK_THROWS_AS(read_store(wrong_version), StoreFormatError);
    std::stringstream text;
    write_store(text, store);
    std::string truncated = text.str().substr(0, text.str().size() / 2);
    std::stringstream cut(truncated);
    CHECK_THROWS_AS(read_store(cut), StoreFormatError);
}
