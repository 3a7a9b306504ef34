#include "doctest.h"
#include "fixtures.hpp"

#include "slicing/baselines.hpp"
#include "slicing/simharness.hpp"

#include <cstdlib>
#include <fstream>

using namespace slicing;

namespace {
void same_metrics(const EpisodeMetrics& a, const EpisodeMetrics& b) {
    CHECK(a.weighted_sum_rate == b.weighted_sum_rate);
    CHECK(a.per_slice_rate == b.per_slice_rate);
    CHECK(a.per_slice_drop == b.per_slice_drop);
    CHECK(a.per_slice_sojourn == b.per_slice_sojourn);
    CHECK(a.per_ue_queue == b.per_ue_queue);
    CHECK(a.average_lagrangian == b.average_lagrangian);
}

std::string first_line(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}
}  // namespace

TEST_CASE("episodes are deterministic per seed") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    EpisodeOptions o;
    o.horizon = 3000;
    RandomPolicy p1(inst), p2(inst);
    auto a = run_episode(inst, p1, 5, o);
    auto b = run_episode(inst, p2, 5, o);
    same_metrics(a, b);
    auto c = run_episode(inst, p1, 6, o);
    CHECK(c.weighted_sum_rate != a.weighted_sum_rate);
    CHECK(a.slots == 2700);
}

TEST_CASE("policies share channel and arrival sample paths") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    Environment e1(inst, 9), e2(inst, 9);
    for (int t = 0; t < 200; ++t) {
        REQUIRE(e1.state().channel == e2.state().channel);
        auto r1 = e1.step(inst.idle_action());
        auto r2 = e2.step(qsi_policy(inst, e2.state()));
        for (std::size_t u = 0; u < inst.num_ues(); ++u) {
            REQUIRE(r1.arrivals[u].offered_packets == r2.arrivals[u].offered_packets);
            REQUIRE(r1.arrivals[u].energy_units == r2.arrivals[u].energy_units);
        }
    }
}

TEST_CASE("environment keeps states within bounds") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    Environment env(inst, 3);
    Rng& rng = env.policy_rng();
    for (int t = 0; t < 20000; ++t) {
        auto a = t % 2 ? random_policy(inst, env.state(), t, rng) : qsi_policy(inst, env.state());
        auto r = env.step(a);
        const auto& s = env.state();
        for (std::size_t u = 0; u < inst.num_ues(); ++u) {
            REQUIRE(s.queues[u] >= 0);
            REQUIRE(s.queues[u] <= inst.buffer_capacity(u));
            REQUIRE(s.batteries[u] >= 0);
            REQUIRE(s.batteries[u] <= inst.battery_capacity(u));
            if (!r.outcomes[u].feasible) REQUIRE(r.outcomes[u].served == 0);
        }
    }
}

TEST_CASE("measured drops match the drop formula under overload") {
    auto c = apply_sweep_value(load_scenario(fixtures::scenario_path("table3.json")), SweepKind::arrival, 5);
    Instance inst(c);
    QsiPolicy p(inst);
    EpisodeOptions o;
    o.horizon = 40000;
    auto m = run_episode(inst, p, 2, o);
    for (std::size_t k = 0; k < inst.num_slices(); ++k) {
        const auto& sl = c.slices[k];
        double per_ue = m.per_slice_rate[k] / sl.num_ues;
        CHECK(std::abs(m.per_slice_drop[k] - drop_probability(per_ue, c.ran.slot_duration, sl)) <= 0.02);
    }
}

TEST_CASE("Little's law agrees with measured sojourn") {
    Instance inst(load_scenario(fixtures::scenario_path("table3.json")));
    RandomPolicy p(inst);
    EpisodeOptions o;
    o.horizon = 40000;
    auto m = run_episode(inst, p, 4, o);
    for (std::size_t k = 0; k < inst.num_slices(); ++k)
        CHECK(m.per_slice_sojourn[k] == doctest::Approx(m.per_slice_delay[k]).epsilon(0.1));
}

TEST_CASE("no arrivals means no drops") {
    auto c = apply_sweep_value(load_scenario(fixtures::scenario_path("table3.json")), SweepKind::arrival, 0);
    Instance inst(c);
    QsiPolicy p(inst);
    EpisodeOptions o;
    o.horizon = 500;
    auto m = run_episode(inst, p, 1, o);
    for (double d : m.per_slice_drop) CHECK(d == 0.0);
    CHECK(m.weighted_sum_rate == 0.0);
    o.horizon = 0;
    CHECK_THROWS_AS(run_episode(inst, p, 1, o), std::invalid_argument);
}

TEST_CASE("exact policy bounds the others on a small instance") {
    Instance inst(fixtures::single_ue(2, 2, 2));
    EpisodeOptions o;
    o.horizon = 100000;
    o.eta = {0.0};
    auto exact = make_policy("exact", inst, 1);
    double best = run_episode(inst, *exact, 1, o).average_lagrangian;
    for (const char* name : {"random", "qsi", "proposed"}) {
        auto p = make_policy(name, inst, 1);
        CHECK(run_episode(inst, *p, 1, o).average_lagrangian <= best * 1.01);
    }
    CHECK_THROWS_AS(make_policy("bogus", inst, 1), std::invalid_argument);
}

TEST_CASE("sweep values") {
    auto base = load_scenario(fixtures::scenario_path("table3.json"));
    auto b = apply_sweep_value(base, SweepKind::battery, 12);
    CHECK(b.slices[0].battery_capacity == 12);
    CHECK(b.slices[1].battery_capacity == 12);
    CHECK(b.slices[2].battery_capacity == 8);
    CHECK(apply_sweep_value(base, SweepKind::subchannels, 4).ran.num_subchannels == 4);
    CHECK(apply_sweep_value(base, SweepKind::arrival, 2).slices[2].packet_arrival_rate == 2);
    CHECK(parse_sweep_kind("battery") == SweepKind::battery);
    CHECK_FALSE(parse_sweep_kind("colour").has_value());
    CHECK(to_string(SweepKind::arrival) == "arrival");
}

TEST_CASE("sweep rows do not depend on the worker count") {
    auto base = fixtures::two_slices();
    base.simulation.train_slots = 300;
    SweepSpec spec;
    spec.kind = SweepKind::arrival;
    spec.values = {1, 2};
    spec.policies = {"random", "qsi", "proposed"};
    spec.seeds = {1, 2};
    spec.episode.horizon = 1000;
    spec.workers = 1;
    auto serial = run_sweep(base, spec);
    spec.workers = 4;
    auto parallel = run_sweep(base, spec);
    REQUIRE(serial.size() == 12);
    REQUIRE(parallel.size() == 12);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].policy == parallel[i].policy);
        CHECK(serial[i].value == parallel[i].value);
        CHECK(serial[i].seed == parallel[i].seed);
        same_metrics(serial[i].metrics, parallel[i].metrics);
    }
    CHECK(serial.front().value == 1);
    CHECK(serial.back().value == 2);

    auto summary = summarize(serial, 2);
    REQUIRE(summary.size() == 6);
    for (const auto& s : summary) {
        std::vector<double> xs;
        for (const auto& r : serial)
            if (r.policy == s.policy && r.value == s.value) xs.push_back(r.metrics.weighted_sum_rate);
        REQUIRE(xs.size() == 2);
        CHECK(s.samples == 2);
        CHECK(s.mean_rate == doctest::Approx((xs[0] + xs[1]) / 2));
        // sample standard deviation over sqrt(n)
        CHECK(s.se_rate == doctest::Approx(std::abs(xs[0] - xs[1]) / 2));
    }
}

TEST_CASE("worker count honours the environment") {
    setenv("SLICING_WORKERS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("SLICING_WORKERS", "zero", 1);
    CHECK(worker_count() >= 1);
    unsetenv("SLICING_WORKERS");
}

TEST_CASE("csv and manifest outputs") {
    auto dir = std::filesystem::temp_directory_path() / "slicing_harness_test";
    std::filesystem::create_directories(dir);
    SweepRow row{"random", 2, 1, {}};
    row.metrics.per_slice_rate = {1, 2};
    row.metrics.per_slice_drop = {0, 0};
    row.metrics.per_slice_delay = {0, 0};
    row.metrics.per_slice_sojourn = {0, 0};
    row.metrics.constraint_violations = {false, true};
    write_sweep_csv({row}, {"a", "b"}, "subchannels", dir / "s.csv");
    CHECK(first_line(dir / "s.csv") ==
          "policy,subchannels,seed,weighted_sum_rate,rate_a,rate_b,drop_a,drop_b,delay_a,delay_b,"
          "sojourn_a,sojourn_b,violation_a,violation_b,lagrangian,slots");

    Manifest m{"sweep", "abc", {1, 2}, {{"kind", "arrival"}}, {"s.csv"}};
    write_manifest(m, dir / "manifest.txt");
    std::ifstream in(dir / "manifest.txt");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("config_hash=abc\n") != std::string::npos);
    CHECK(text.find("seeds=1,2\n") != std::string::npos);
    CHECK(text.find("flag.kind=arrival\n") != std::string::npos);
    CHECK(text.find(std::string("code_version=") + code_version()) != std::string::npos);
    std::filesystem::remove_all(dir);
}
