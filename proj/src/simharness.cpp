#include "slicing/simharness.hpp"

#include "slicing/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#ifndef SLICING_VERSION
#define SLICING_VERSION "unknown"
#endif

namespace slicing {

const char* code_version() { return SLICING_VERSION; }

ControlAction RandomPolicy::act(const SystemState& state, std::int64_t slot, Rng& rng) {
    return random_policy(inst_, state, slot, rng);
}

ControlAction QsiPolicy::act(const SystemState& state, std::int64_t, Rng&) { return qsi_policy(inst_, state); }

ControlAction ExactPolicy::act(const SystemState& state, std::int64_t, Rng&) {
    return model_->actions()[policy_[model_->space().index(state)]];
}

const std::vector<std::string>& policy_names() {
    static const std::vector<std::string> names{"proposed", "random", "qsi", "exact"};
    return names;
}

bool is_policy_name(const std::string& name) {
    const auto& names = policy_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {
// Training runs on a different salt than evaluation episodes of the same seed.
constexpr std::uint64_t kTrainingSalt = 1;
}  // namespace

QFactorStore train_proposed(const Instance& inst, std::uint64_t seed, std::int64_t slots, const OnlineOptions& options) {
    LearningSchedule schedule = inst.config().learning;
    schedule.max_iterations = static_cast<int>(slots);
    schedule.termination_window = std::numeric_limits<int>::max();
    LearnerState learner = init_learner(inst, schedule);
    Environment env(inst, seed, kTrainingSalt);
    run_online(inst, env, learner, schedule, options);
    return std::move(learner.store);
}

std::unique_ptr<Policy> make_policy(const std::string& name, const Instance& inst, std::uint64_t seed) {
    if (name == "proposed")
        return std::make_unique<ProposedPolicy>(inst, train_proposed(inst, seed, inst.config().simulation.train_slots));
    if (name == "random") return std::make_unique<RandomPolicy>(inst);
    if (name == "qsi") return std::make_unique<QsiPolicy>(inst);
    if (name == "exact") {
        auto model = std::make_shared<const ExactModel>(inst);
        Multipliers eta(inst.num_slices(), inst.config().learning.lm_floor);
        auto table = relative_value_iteration(*model, eta, SpaceMode::full);
        return std::make_unique<ExactPolicy>(model, std::move(table.policy));
    }
    throw std::invalid_argument("unknown policy '" + name + "'");
}

EpisodeMetrics run_episode(const Instance& inst, Policy& policy, std::uint64_t seed, const EpisodeOptions& options) {
    if (options.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    const std::size_t U = inst.num_ues(), M = inst.num_slices();
    const double slot = inst.ran().slot_duration;
    const auto warm = static_cast<std::int64_t>(std::floor(options.horizon * options.warmup_fraction));
    Multipliers eta = options.eta.empty() ? Multipliers(M, 0.0) : options.eta;

    Environment env(inst, seed);
    Rng& rng = env.policy_rng();
    std::vector<std::deque<std::pair<std::int64_t, int>>> fifo(U);
    std::vector<double> rate(U, 0.0), queue(U, 0.0), served(U, 0.0), sojourn(U, 0.0), departures(U, 0.0);
    std::vector<double> offered(M, 0.0), dropped(M, 0.0), surrogate(M, 0.0);
    double lagrangian = 0.0;
    std::vector<double> delivered(U);

    for (std::int64_t t = 0; t < options.horizon; ++t) {
        const SystemState s = env.state();
        ControlAction a = policy.act(s, t, rng);
        StepResult r = env.step(a);
        const SystemState& next = env.state();
        const bool counted = t >= warm;

        for (std::size_t u = 0; u < U; ++u) {
            const std::size_t m = inst.ue(u).slice;
            const auto& o = r.outcomes[u];
            const auto& arr = r.arrivals[u];
            int overflow = s.queues[u] + arr.packets - o.served - next.queues[u];
            int accepted = arr.packets - overflow;

            int to_serve = o.served;
            while (to_serve > 0) {
                auto& head = fifo[u].front();
                int k = std::min(to_serve, head.second);
                if (counted) {
                    sojourn[u] += static_cast<double>(k) * static_cast<double>(t - head.first) * slot;
                    departures[u] += k;
                }
                head.second -= k;
                to_serve -= k;
                if (head.second == 0) fifo[u].pop_front();
            }
            if (accepted > 0) fifo[u].emplace_back(t, accepted);

            delivered[u] = o.delivered_rate;
            if (!counted) continue;
            rate[u] += o.delivered_rate;
            queue[u] += s.queues[u];
            served[u] += o.served;
            offered[m] += arr.offered_packets;
            dropped[m] += (arr.offered_packets - arr.packets) + overflow;
        }
        if (!counted) continue;
        auto d = slice_delay_surrogates(inst, s.queues);
        for (std::size_t m = 0; m < M; ++m) surrogate[m] += d[m];
        lagrangian += lagrangian_reward(inst, eta, s.queues, delivered);
    }

    EpisodeMetrics out;
    out.slots = options.horizon - warm;
    const double n = static_cast<double>(out.slots);
    out.per_slice_rate.assign(M, 0.0);
    out.per_slice_drop.assign(M, 0.0);
    out.per_slice_delay.assign(M, 0.0);
    out.per_slice_sojourn.assign(M, 0.0);
    out.per_slice_surrogate.assign(M, 0.0);
    for (std::size_t u = 0; u < U; ++u) {
        const std::size_t m = inst.ue(u).slice;
        out.per_slice_rate[m] += rate[u] / n;
        out.per_ue_queue.push_back(queue[u] / n);
        out.per_ue_served.push_back(served[u] / n);
        double little = 0.0;
        if (queue[u] > 0) little = served[u] > 0 ? slot * queue[u] / served[u] : std::numeric_limits<double>::infinity();
        out.per_slice_delay[m] += little;
        out.per_ue_sojourn.push_back(departures[u] > 0 ? sojourn[u] / departures[u] : 0.0);
        out.per_slice_sojourn[m] += out.per_ue_sojourn.back();
    }
    for (std::size_t m = 0; m < M; ++m) {
        const auto& s = inst.config().slices[m];
        out.weighted_sum_rate += s.weight * out.per_slice_rate[m];
        out.per_slice_drop[m] = offered[m] > 0 ? std::clamp(dropped[m] / offered[m], 0.0, 1.0) : 0.0;
        out.per_slice_surrogate[m] = surrogate[m] / n;
        out.constraint_violations.push_back(out.per_slice_delay[m] > s.max_delay);
    }
    out.average_lagrangian = lagrangian / n;
    return out;
}

std::size_t worker_count() {
    if (const char* env = std::getenv("SLICING_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace {

// Runs jobs [0, count) on up to `workers` threads; the first exception is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::max<std::size_t>(1, std::min(workers ? workers : worker_count(), count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto loop = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(loop);
    loop();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double standard_error(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mu = mean_of(xs), ss = 0.0;
    for (double x : xs) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

}  // namespace

std::optional<SweepKind> parse_sweep_kind(const std::string& name) {
    if (name == "subchannels") return SweepKind::subchannels;
    if (name == "battery") return SweepKind::battery;
    if (name == "arrival") return SweepKind::arrival;
    return std::nullopt;
}

std::string to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::subchannels: return "subchannels";
        case SweepKind::battery: return "battery";
        case SweepKind::arrival: return "arrival";
    }
    return "unknown";
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepKind kind, double value) {
    ScenarioConfig cfg = base;
    switch (kind) {
        case SweepKind::subchannels:
            cfg.ran.num_subchannels = static_cast<int>(std::lround(value));
            break;
        case SweepKind::battery: {
            int largest = 1;
            for (const auto& s : base.slices) largest = std::max(largest, s.battery_capacity);
            for (auto& s : cfg.slices)
                s.battery_capacity = std::max(1, static_cast<int>(std::lround(value * s.battery_capacity / largest)));
            break;
        }
        case SweepKind::arrival:
            for (auto& s : cfg.slices) s.packet_arrival_rate = value;
            break;
    }
    validate(cfg);
    return cfg;
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const SweepSpec& spec) {
    for (const auto& p : spec.policies)
        if (!is_policy_name(p)) throw std::invalid_argument("unknown policy '" + p + "'");
    const std::size_t P = spec.policies.size(), S = spec.seeds.size();
    std::vector<std::unique_ptr<Instance>> instances;
    for (double v : spec.values) instances.push_back(std::make_unique<Instance>(apply_sweep_value(base, spec.kind, v)));

    std::vector<SweepRow> rows(spec.values.size() * P * S);
    parallel_for(rows.size(), spec.workers, [&](std::size_t i) {
        const std::size_t vi = i / (P * S), pi = (i / S) % P, si = i % S;
        const Instance& inst = *instances[vi];
        auto policy = make_policy(spec.policies[pi], inst, spec.seeds[si]);
        rows[i] = {spec.policies[pi], spec.values[vi], spec.seeds[si],
                   run_episode(inst, *policy, spec.seeds[si], spec.episode)};
    });
    return rows;
}

std::vector<SweepRow> sweep_subchannels(const ScenarioConfig& base, SweepSpec spec) {
    spec.kind = SweepKind::subchannels;
    return run_sweep(base, spec);
}

std::vector<SweepRow> sweep_battery(const ScenarioConfig& base, SweepSpec spec) {
    spec.kind = SweepKind::battery;
    return run_sweep(base, spec);
}

std::vector<SweepRow> sweep_arrival(const ScenarioConfig& base, SweepSpec spec) {
    spec.kind = SweepKind::arrival;
    return run_sweep(base, spec);
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows, std::size_t num_slices) {
    std::vector<SweepSummary> out;
    std::vector<std::vector<const SweepRow*>> groups;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const SweepSummary& s) { return s.policy == r.policy && s.value == r.value; });
        if (it == out.end()) {
            SweepSummary fresh;
            fresh.policy = r.policy;
            fresh.value = r.value;
            out.push_back(std::move(fresh));
            groups.emplace_back();
            it = out.end() - 1;
        }
        groups[it - out.begin()].push_back(&r);
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
        auto& s = out[g];
        s.samples = groups[g].size();
        std::vector<double> wsr;
        for (auto* r : groups[g]) wsr.push_back(r->metrics.weighted_sum_rate);
        s.mean_rate = mean_of(wsr);
        s.se_rate = standard_error(wsr);
        for (std::size_t m = 0; m < num_slices; ++m) {
            std::vector<double> rate, drop, delay;
            for (auto* r : groups[g]) {
                rate.push_back(r->metrics.per_slice_rate[m]);
                drop.push_back(r->metrics.per_slice_drop[m]);
                delay.push_back(r->metrics.per_slice_delay[m]);
            }
            s.mean_slice_rate.push_back(mean_of(rate));
            s.se_slice_rate.push_back(standard_error(rate));
            s.mean_drop.push_back(mean_of(drop));
            s.se_drop.push_back(standard_error(drop));
            s.mean_delay.push_back(mean_of(delay));
        }
    }
    return out;
}

ConvergenceResult convergence_experiment(const ScenarioConfig& config, const LearningSchedule& schedule,
                                         const std::vector<std::uint64_t>& seeds, std::size_t workers) {
    Instance inst(config);
    ConvergenceResult result;
    result.seeds = seeds;
    result.traces.resize(seeds.size());
    parallel_for(seeds.size(), workers, [&](std::size_t i) {
        LearnerState learner = init_learner(inst, schedule);
        Environment env(inst, seeds[i], kTrainingSalt);
        result.traces[i] = run_online(inst, env, learner, schedule).trace;
    });
    try {
        ExactModel model(inst);
        Multipliers eta(inst.num_slices(), schedule.lm_floor);
        auto table = relative_value_iteration(model, eta, SpaceMode::full);
        auto ev = evaluate_policy(model, table.policy, eta);
        result.oracle_rate = ev.average_rate_reward / config.objective.rate_scale;
    } catch (const CapExceeded& e) {
        result.notice = std::string("oracle omitted: ") + e.what();
    } catch (const NotConverged& e) {
        result.notice = std::string("oracle omitted: ") + e.what();
    }
    return result;
}

std::vector<double> mean_trace(const ConvergenceResult& result) {
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& t : result.traces) len = std::min(len, t.size());
    if (result.traces.empty()) return {};
    std::vector<double> out(len, 0.0);
    for (const auto& t : result.traces)
        for (std::size_t i = 0; i < len; ++i) out[i] += t[i].rate_estimate / static_cast<double>(result.traces.size());
    return out;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out.precision(10);
    return out;
}

void per_slice_header(std::ostream& out, const char* prefix, const std::vector<std::string>& names) {
    for (const auto& n : names) out << ',' << prefix << n;
}

}  // namespace

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::vector<std::string>& slice_names,
                     const std::string& parameter, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "policy," << parameter << ",seed,weighted_sum_rate";
    per_slice_header(out, "rate_", slice_names);
    per_slice_header(out, "drop_", slice_names);
    per_slice_header(out, "delay_", slice_names);
    per_slice_header(out, "sojourn_", slice_names);
    per_slice_header(out, "violation_", slice_names);
    out << ",lagrangian,slots\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.policy << ',' << r.value << ',' << r.seed << ',' << m.weighted_sum_rate;
        for (double x : m.per_slice_rate) out << ',' << x;
        for (double x : m.per_slice_drop) out << ',' << x;
        for (double x : m.per_slice_delay) out << ',' << x;
        for (double x : m.per_slice_sojourn) out << ',' << x;
        for (bool v : m.constraint_violations) out << ',' << (v ? 1 : 0);
        out << ',' << m.average_lagrangian << ',' << m.slots << '\n';
    }
}

void write_summary_csv(const std::vector<SweepSummary>& rows, const std::vector<std::string>& slice_names,
                       const std::string& parameter, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "policy," << parameter << ",samples,weighted_sum_rate,se_weighted_sum_rate";
    for (const auto& n : slice_names) out << ",rate_" << n << ",se_rate_" << n;
    for (const auto& n : slice_names) out << ",drop_" << n << ",se_drop_" << n;
    per_slice_header(out, "delay_", slice_names);
    out << '\n';
    for (const auto& s : rows) {
        out << s.policy << ',' << s.value << ',' << s.samples << ',' << s.mean_rate << ',' << s.se_rate;
        for (std::size_t m = 0; m < slice_names.size(); ++m) out << ',' << s.mean_slice_rate[m] << ',' << s.se_slice_rate[m];
        for (std::size_t m = 0; m < slice_names.size(); ++m) out << ',' << s.mean_drop[m] << ',' << s.se_drop[m];
        for (double d : s.mean_delay) out << ',' << d;
        out << '\n';
    }
}

void write_convergence_csv(const ConvergenceResult& result, const std::vector<std::string>& slice_names,
                           const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "seed,iteration,rate_estimate";
    per_slice_header(out, "eta_", slice_names);
    out << ",max_q_delta,oracle_rate\n";
    for (std::size_t i = 0; i < result.traces.size(); ++i)
        for (const auto& row : result.traces[i]) {
            out << result.seeds[i] << ',' << row.iteration << ',' << row.rate_estimate;
            for (double e : row.eta) out << ',' << e;
            out << ',' << row.max_q_delta << ',';
            if (result.oracle_rate) out << *result.oracle_rate;
            out << '\n';
        }
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out << "code_version=" << code_version() << '\n'
        << "command=" << manifest.command << '\n'
        << "config_hash=" << manifest.config_hash << '\n'
        << "seeds=";
    for (std::size_t i = 0; i < manifest.seeds.size(); ++i) out << (i ? "," : "") << manifest.seeds[i];
    out << '\n';
    for (const auto& [k, v] : manifest.flags) out << "flag." << k << '=' << v << '\n';
    for (const auto& o : manifest.outputs) out << "output=" << o << '\n';
}

}  // namespace slicing
