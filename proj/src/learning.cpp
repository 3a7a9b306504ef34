#include "slicing/learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace slicing {

LearnerState init_learner(const Instance& inst, const LearningSchedule& schedule) {
    LearnerState l;
    l.store = make_store(inst);
    l.multipliers.assign(inst.num_slices(), schedule.lm_floor);
    for (std::size_t u = 0; u < inst.num_ues(); ++u) l.reference.emplace_back(0, inst.battery_capacity(u));
    l.delay_estimate.assign(inst.num_slices(), 0.0);
    return l;
}

ControlAction decide(const Instance& inst, const LearnerState& learner, const SystemState& state) {
    return decide_action(inst, learner.store, state);
}

double apply_q_update(UeTable& table, int q, int e, int c, double target, double ref, double step) {
    double& x = table.at(q, e, c);
    double before = x;
    x += step * (target - ref - x);
    return std::abs(x - before);
}

double update_q(const Instance& inst, LearnerState& learner, const SystemState& observed, double step) {
    const std::size_t N = inst.num_subchannels();
    std::vector<double> weights(inst.num_levels());
    double worst = 0.0;
    for (std::size_t u = 0; u < inst.num_ues(); ++u) {
        UeTable& t = learner.store.tables[u];
        std::fill(weights.begin(), weights.end(), 0.0);
        for (std::size_t n = 0; n < N; ++n) weights[observed.channel[u * N + n]] += 1.0 / static_cast<double>(N);
        auto w = t.best_values();
        const int q = observed.queues[u], e = observed.batteries[u];
        auto b = ue_backup(inst, learner.multipliers, u, q, e, weights, w);
        const auto [rq, re] = learner.reference[u];
        double ref = ue_backup(inst, learner.multipliers, u, rq, re, weights, w).assigned;
        for (int c = 0; c < 2; ++c) worst = std::max(worst, apply_q_update(t, q, e, c, b[c], ref, step));
        t.theta += step * (ref - t.theta);
    }
    return worst;
}

double update_lm(const Instance& inst, LearnerState& learner, const LearningSchedule& schedule,
                 std::span<const double> delay_estimate, double step) {
    const double scale = inst.config().objective.delay_scale;
    double worst = 0.0;
    for (std::size_t m = 0; m < inst.num_slices(); ++m) {
        double& eta = learner.multipliers[m];
        double next = eta + step * (delay_estimate[m] - inst.config().slices[m].max_delay) * scale;
        next = std::clamp(next, schedule.lm_floor, schedule.lm_ceiling);
        worst = std::max(worst, std::abs(next - eta));
        eta = next;
    }
    return worst;
}

OnlineResult run_online(const Instance& inst, Environment& env, LearnerState& learner, const LearningSchedule& schedule,
                        const OnlineOptions& options) {
    OnlineResult result;
    int quiet = 0;
    const auto& slices = inst.config().slices;
    for (int i = 0; i < schedule.max_iterations; ++i) {
        const std::int64_t t = learner.slot;
        SystemState observed = env.state();
        ControlAction action = decide(inst, learner, observed);
        StepResult step = env.step(action);

        double rate = 0.0;
        for (std::size_t u = 0; u < inst.num_ues(); ++u)
            rate += slices[inst.ue(u).slice].weight * step.outcomes[u].delivered_rate;
        learner.rate_estimate += (rate - learner.rate_estimate) / static_cast<double>(t + 1);

        learner.last_q_delta = update_q(inst, learner, observed, schedule.q_step(t));

        auto delays = slice_delay_surrogates(inst, observed.queues);
        double rho = std::max(1.0 / static_cast<double>(t + 1), 1.0 / options.delay_window);
        for (std::size_t m = 0; m < delays.size(); ++m)
            learner.delay_estimate[m] += rho * (delays[m] - learner.delay_estimate[m]);
        learner.last_lm_delta = options.freeze_multipliers
                                    ? 0.0
                                    : update_lm(inst, learner, schedule, learner.delay_estimate, schedule.lm_step(t));
        learner.slot = t + 1;

        result.trace.push_back({t, learner.rate_estimate, learner.multipliers, learner.last_q_delta});
        bool calm = learner.last_q_delta < schedule.q_tolerance && learner.last_lm_delta < schedule.lm_tolerance;
        quiet = calm ? quiet + 1 : 0;
        if (quiet >= schedule.termination_window) {
            result.converged = true;
            break;
        }
    }
    return result;
}

void write_trace_csv(const Instance& inst, const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out << "iteration,rate_estimate";
    for (const auto& s : inst.config().slices) out << ",eta_" << s.name;
    out << ",max_q_delta\n";
    out.precision(10);
    for (const auto& row : trace) {
        out << row.iteration << ',' << row.rate_estimate;
        for (double e : row.eta) out << ',' << e;
        out << ',' << row.max_q_delta << '\n';
    }
}

namespace {
constexpr const char* kCheckpointMagic = "slicing-learner";
constexpr int kCheckpointVersion = 1;

void expect(std::istream& in, const std::string& token) {
    std::string got;
    if (!(in >> got) || got != token) throw StoreFormatError("expected '" + token + "' in learner checkpoint");
}

std::vector<double> read_vector(std::istream& in, const std::string& name) {
    expect(in, name);
    std::size_t n = 0;
    if (!(in >> n)) throw StoreFormatError("missing length of " + name);
    std::vector<double> v(n);
    for (auto& x : v)
        if (!(in >> x)) throw StoreFormatError("bad value in " + name);
    return v;
}
}  // namespace

void write_checkpoint(std::ostream& out, const LearnerState& l) {
    auto old = out.precision(17);
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n' << "slot " << l.slot << '\n';
    auto vec = [&](const char* name, const std::vector<double>& v) {
        out << name << ' ' << v.size();
        for (double x : v) out << ' ' << x;
        out << '\n';
    };
    vec("multipliers", l.multipliers);
    vec("delays", l.delay_estimate);
    out << "rate " << l.rate_estimate << '\n' << "deltas " << l.last_q_delta << ' ' << l.last_lm_delta << '\n';
    out << "reference " << l.reference.size();
    for (const auto& [q, e] : l.reference) out << ' ' << q << ' ' << e;
    out << '\n';
    write_store(out, l.store);
    out.precision(old);
}

LearnerState read_checkpoint(std::istream& in) {
    expect(in, kCheckpointMagic);
    int version = 0;
    if (!(in >> version) || version != kCheckpointVersion)
        throw StoreFormatError("unsupported learner checkpoint version " + std::to_string(version));
    LearnerState l;
    expect(in, "slot");
    if (!(in >> l.slot) || l.slot < 0) throw StoreFormatError("bad slot counter");
    l.multipliers = read_vector(in, "multipliers");
    l.delay_estimate = read_vector(in, "delays");
    expect(in, "rate");
    expect(in >> l.rate_estimate, "deltas");
    if (!(in >> l.last_q_delta >> l.last_lm_delta)) throw StoreFormatError("bad deltas");
    expect(in, "reference");
    std::size_t n = 0;
    if (!(in >> n)) throw StoreFormatError("bad reference count");
    l.reference.resize(n);
    for (auto& [q, e] : l.reference)
        if (!(in >> q >> e)) throw StoreFormatError("bad reference state");
    l.store = read_store(in);
    return l;
}

void save_checkpoint(const LearnerState& learner, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    write_checkpoint(out, learner);
}

LearnerState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace slicing
