// Command-line front end: solve-exact, learn, sweep, compare.
//
// Exit codes: 0 ok, 1 unexpected error, 2 usage, 3 bad scenario,
// 4 exact-solver cap exceeded, 5 solver did not converge, 6 I/O error.

#include "slicing/cmdp.hpp"
#include "slicing/config.hpp"
#include "slicing/learning.hpp"
#include "slicing/simharness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace slicing;

namespace {

enum Exit { kOk = 0, kError = 1, kUsage = 2, kConfig = 3, kCap = 4, kNotConverged = 5, kIo = 6 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flags that override scenario keys when given.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> horizon;
    std::optional<std::int64_t> train_slots;
    std::optional<int> max_iterations;
    std::optional<double> q_step_scale, lm_step_scale, lm_ceiling;

    void attach(CLI::App* app) {
        app->add_option("--seed", seed, "master seed (simulation.seed)");
        app->add_option("--horizon", horizon, "episode length in slots (simulation.horizon)");
        app->add_option("--train-slots", train_slots, "online training slots for the proposed policy");
        app->add_option("--max-iterations", max_iterations, "learning iteration budget");
        app->add_option("--q-step-scale", q_step_scale, "Q-factor step size scale");
        app->add_option("--lm-step-scale", lm_step_scale, "multiplier step size scale");
        app->add_option("--lm-ceiling", lm_ceiling, "upper projection bound for multipliers");
    }

    void apply(ScenarioConfig& c, std::map<std::string, std::string>& flags) const {
        auto note = [&](const char* k, const auto& v) {
            std::ostringstream s;
            s << v;
            flags[k] = s.str();
        };
        if (seed) c.simulation.seed = *seed, note("seed", *seed);
        if (horizon) c.simulation.horizon = *horizon, note("horizon", *horizon);
        if (train_slots) c.simulation.train_slots = *train_slots, note("train-slots", *train_slots);
        if (max_iterations) c.learning.max_iterations = *max_iterations, note("max-iterations", *max_iterations);
        if (q_step_scale) c.learning.q_step_scale = *q_step_scale, note("q-step-scale", *q_step_scale);
        if (lm_step_scale) c.learning.lm_step_scale = *lm_step_scale, note("lm-step-scale", *lm_step_scale);
        if (lm_ceiling) c.learning.lm_ceiling = *lm_ceiling, note("lm-ceiling", *lm_ceiling);
        validate(c);
    }
};

ScenarioConfig load(const std::string& path, const Overrides& o, std::map<std::string, std::string>& flags) {
    ScenarioConfig c = load_scenario(path);
    o.apply(c, flags);
    return c;
}

Multipliers parse_eta(const std::vector<double>& given, const Instance& inst) {
    if (given.empty()) return Multipliers(inst.num_slices(), inst.config().learning.lm_floor);
    if (given.size() != inst.num_slices())
        throw UsageError("--eta needs one value per slice (" + std::to_string(inst.num_slices()) + ")");
    return given;
}

void ensure_parent(const fs::path& p) {
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
}

std::vector<std::string> slice_names(const Instance& inst) {
    std::vector<std::string> names;
    for (const auto& s : inst.config().slices) names.push_back(s.name);
    return names;
}

// solve-exact ---------------------------------------------------------------

struct SolveArgs {
    std::string config, output;
    double tolerance = 1e-9;
    int max_iter = 100000;
    std::vector<double> eta;
    std::string mode = "full";
    bool dual = false;
    Overrides over;
};

int cmd_solve_exact(const SolveArgs& a) {
    std::map<std::string, std::string> flags;
    Instance inst(load(a.config, a.over, flags));
    std::cout << "state space: " << state_space_size(inst, SpaceMode::full) << " states\n";
    ExactModel model(inst);
    SolveOptions opts;
    opts.tolerance = a.tolerance;
    opts.max_iterations = a.max_iter;

    ValueTable table;
    Multipliers eta;
    if (a.dual) {
        DualOptions d;
        d.inner = opts;
        auto r = dual_descent(model, inst.config().learning, d);
        table = std::move(r.solution);
        eta = r.eta;
        std::cout << "dual iterations: " << r.iterations << "\n";
        for (std::size_t m = 0; m < inst.num_slices(); ++m)
            std::cout << "slice " << inst.config().slices[m].name << ": delay " << r.evaluation.slice_delay[m]
                      << " s (max " << inst.config().slices[m].max_delay << " s)\n";
    } else {
        eta = parse_eta(a.eta, inst);
        table = relative_value_iteration(model, eta, SpaceMode::full, opts);
    }
    if (a.mode == "reduced") table = reduce_values(model, table);

    std::cout << std::setprecision(12) << "theta: " << table.theta << "\n";
    std::cout << "eta:";
    for (double e : eta) std::cout << ' ' << e;
    std::cout << "\nsweeps: " << table.iterations << ", span: " << table.span << "\n";
    if (!a.output.empty()) {
        ensure_parent(a.output);
        write_value_table_csv(model, table, a.output);
        Manifest m{"solve-exact", config_hash(inst.config()), {}, flags, {a.output}};
        m.flags["mode"] = a.mode;
        m.flags["tolerance"] = std::to_string(a.tolerance);
        write_manifest(m, a.output + ".manifest");
        std::cout << "wrote " << a.output << "\n";
    }
    return kOk;
}

// learn ---------------------------------------------------------------------

struct LearnArgs {
    std::string config, trace, checkpoint, resume;
    Overrides over;
};

int cmd_learn(const LearnArgs& a) {
    std::map<std::string, std::string> flags;
    Instance inst(load(a.config, a.over, flags));
    const auto& schedule = inst.config().learning;
    LearnerState learner = init_learner(inst, schedule);
    if (!a.resume.empty()) {
        learner = load_checkpoint(a.resume);
        if (learner.store.tables.size() != inst.num_ues() || learner.multipliers.size() != inst.num_slices())
            throw UsageError("checkpoint " + a.resume + " does not match the scenario");
        flags["resume"] = a.resume;
        std::cout << "resuming at slot " << learner.slot << "\n";
    }
    // The slot counter salts the environment so a resumed run draws fresh samples.
    Environment env(inst, inst.config().simulation.seed, static_cast<std::uint64_t>(learner.slot) + 1);
    auto result = run_online(inst, env, learner, schedule);

    std::cout << std::setprecision(8) << "slots: " << learner.slot << "\n"
              << "rate estimate: " << learner.rate_estimate << " bit/s\n"
              << "eta:";
    for (double e : learner.multipliers) std::cout << ' ' << e;
    std::cout << "\n";
    if (!result.converged && schedule.max_iterations > 0)
        std::cout << "notice: iteration budget exhausted before the termination test passed\n";

    Manifest m{"learn", config_hash(inst.config()), {inst.config().simulation.seed}, flags, {}};
    if (!a.trace.empty()) {
        ensure_parent(a.trace);
        write_trace_csv(inst, result.trace, a.trace);
        m.outputs.push_back(a.trace);
    }
    if (!a.checkpoint.empty()) {
        ensure_parent(a.checkpoint);
        save_checkpoint(learner, a.checkpoint);
        m.outputs.push_back(a.checkpoint);
    }
    if (!m.outputs.empty()) write_manifest(m, m.outputs.front() + ".manifest");
    return kOk;
}

// sweep ---------------------------------------------------------------------

struct SweepArgs {
    std::string config, kind, output_dir = "sweep_out";
    std::vector<std::string> policies{"proposed", "random", "qsi"};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<double> values;
    Overrides over;
};

std::vector<double> default_values(SweepKind kind) {
    switch (kind) {
        case SweepKind::subchannels: return {2, 4, 6};
        case SweepKind::battery: return {4, 6, 8, 10, 12};
        case SweepKind::arrival: return {1, 2, 3, 4, 5};
    }
    return {};
}

void check_policies(const std::vector<std::string>& policies) {
    for (const auto& p : policies)
        if (!is_policy_name(p)) {
            std::string valid;
            for (const auto& n : policy_names()) valid += (valid.empty() ? "" : ", ") + n;
            throw UsageError("unknown policy '" + p + "' (valid: " + valid + ")");
        }
}

int cmd_sweep(const SweepArgs& a) {
    auto kind = parse_sweep_kind(a.kind);
    if (!kind) throw UsageError("unknown sweep kind '" + a.kind + "' (valid: subchannels, battery, arrival)");
    check_policies(a.policies);
    std::map<std::string, std::string> flags;
    ScenarioConfig cfg = load(a.config, a.over, flags);
    SweepSpec spec;
    spec.kind = *kind;
    spec.values = a.values.empty() ? default_values(*kind) : a.values;
    spec.policies = a.policies;
    spec.seeds = a.seeds;
    spec.episode.horizon = cfg.simulation.horizon;
    spec.episode.warmup_fraction = cfg.simulation.warmup_fraction;

    auto rows = run_sweep(cfg, spec);
    Instance inst(cfg);
    auto names = slice_names(inst);
    std::error_code ec;
    fs::create_directories(a.output_dir, ec);
    if (ec) throw IoError("cannot create " + a.output_dir + ": " + ec.message());
    const std::string stem = (fs::path(a.output_dir) / ("sweep_" + a.kind)).string();
    write_sweep_csv(rows, names, a.kind, stem + ".csv");
    auto summary = summarize(rows, names.size());
    write_summary_csv(summary, names, a.kind, stem + "_summary.csv");

    Manifest m{"sweep " + a.kind, config_hash(cfg), a.seeds, flags, {stem + ".csv", stem + "_summary.csv"}};
    std::string pol;
    for (const auto& p : a.policies) pol += (pol.empty() ? "" : ",") + p;
    m.flags["policies"] = pol;
    write_manifest(m, (fs::path(a.output_dir) / "manifest.txt").string());

    std::cout << std::setprecision(6);
    for (const auto& s : summary)
        std::cout << std::left << std::setw(10) << s.policy << a.kind << "=" << s.value << "  weighted rate "
                  << s.mean_rate << " +/- " << s.se_rate << " bit/s\n";
    std::cout << "wrote " << stem << ".csv\n";
    return kOk;
}

// compare -------------------------------------------------------------------

struct CompareArgs {
    std::string config, checkpoint, output;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> eta;
    Overrides over;
};

int cmd_compare(const CompareArgs& a) {
    std::map<std::string, std::string> flags;
    ScenarioConfig cfg = load(a.config, a.over, flags);
    Instance inst(cfg);
    EpisodeOptions ep;
    ep.horizon = cfg.simulation.horizon;
    ep.warmup_fraction = cfg.simulation.warmup_fraction;
    ep.eta = parse_eta(a.eta, inst);
    if (ep.horizon < 1000) std::cout << "warning: horizon of " << ep.horizon << " slots is too short for stable averages\n";

    std::vector<std::string> names{"proposed", "random", "qsi"};
    std::shared_ptr<const ExactModel> model;
    std::vector<std::size_t> exact_policy;
    try {
        model = std::make_shared<const ExactModel>(inst);
        exact_policy = relative_value_iteration(*model, ep.eta, SpaceMode::full).policy;
        names.push_back("exact");
    } catch (const CapExceeded& e) {
        std::cout << "exact row omitted: " << e.what() << "\n";
    }
    std::optional<QFactorStore> stored;
    if (!a.checkpoint.empty()) {
        stored = load_checkpoint(a.checkpoint).store;
        if (stored->tables.size() != inst.num_ues()) throw UsageError("checkpoint does not match the scenario");
        flags["checkpoint"] = a.checkpoint;
    }

    std::vector<SweepRow> rows;
    for (const auto& name : names)
        for (auto seed : a.seeds) {
            std::unique_ptr<Policy> p;
            if (name == "exact")
                p = std::make_unique<ExactPolicy>(model, exact_policy);
            else if (name == "proposed" && stored)
                p = std::make_unique<ProposedPolicy>(inst, *stored);
            else
                p = make_policy(name, inst, seed);
            rows.push_back({name, 0.0, seed, run_episode(inst, *p, seed, ep)});
        }
    auto summary = summarize(rows, inst.num_slices());

    std::cout << std::left << std::setw(10) << "policy" << std::setw(16) << "weighted_rate" << std::setw(16)
              << "lagrangian";
    for (const auto& s : cfg.slices) std::cout << std::setw(14) << ("delay_" + s.name);
    std::cout << "\n" << std::setprecision(6);
    for (std::size_t i = 0; i < summary.size(); ++i) {
        double lag = 0.0;
        for (const auto& r : rows)
            if (r.policy == summary[i].policy) lag += r.metrics.average_lagrangian / static_cast<double>(a.seeds.size());
        std::cout << std::setw(10) << summary[i].policy << std::setw(16) << summary[i].mean_rate << std::setw(16) << lag;
        for (double d : summary[i].mean_delay) std::cout << std::setw(14) << d;
        std::cout << "\n";
    }
    if (!a.output.empty()) {
        ensure_parent(a.output);
        write_sweep_csv(rows, slice_names(inst), "value", a.output);
        write_manifest({"compare", config_hash(cfg), a.seeds, flags, {a.output}}, a.output + ".manifest");
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uplink RAN slicing: exact solver, online learning and simulation sweeps"};
    app.require_subcommand(1);

    SolveArgs solve;
    auto* s = app.add_subcommand("solve-exact", "relative value iteration on a small scenario");
    s->add_option("config", solve.config, "scenario JSON")->required();
    s->add_option("-o,--output", solve.output, "value table CSV");
    s->add_option("--tolerance", solve.tolerance, "span tolerance");
    s->add_option("--max-iter", solve.max_iter, "sweep budget");
    s->add_option("--eta", solve.eta, "multipliers, one per slice")->delimiter(',');
    s->add_option("--mode", solve.mode, "full or reduced value table")->check(CLI::IsMember({"full", "reduced"}));
    s->add_flag("--dual", solve.dual, "search multipliers by projected subgradient");
    solve.over.attach(s);

    LearnArgs learn;
    auto* l = app.add_subcommand("learn", "online Q-factor and multiplier learning");
    l->add_option("config", learn.config, "scenario JSON")->required();
    l->add_option("--trace", learn.trace, "convergence trace CSV");
    l->add_option("--checkpoint", learn.checkpoint, "where to write the learner checkpoint");
    l->add_option("--resume", learn.resume, "checkpoint to continue from");
    learn.over.attach(l);

    SweepArgs sweep;
    auto* w = app.add_subcommand("sweep", "parameter sweep across policies and seeds");
    w->add_option("config", sweep.config, "scenario JSON")->required();
    w->add_option("--kind", sweep.kind, "subchannels, battery or arrival")->required();
    w->add_option("--policies", sweep.policies, "comma-separated policy names")->delimiter(',');
    w->add_option("--seeds", sweep.seeds, "comma-separated seeds")->delimiter(',');
    w->add_option("--values", sweep.values, "comma-separated sweep values")->delimiter(',');
    w->add_option("--output-dir", sweep.output_dir, "directory for CSV files and the manifest");
    sweep.over.attach(w);

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "policy comparison with common random numbers");
    c->add_option("config", cmp.config, "scenario JSON")->required();
    c->add_option("--seeds", cmp.seeds, "comma-separated seeds")->delimiter(',');
    c->add_option("--checkpoint", cmp.checkpoint, "learned tables to use instead of training");
    c->add_option("--eta", cmp.eta, "multipliers for the Lagrangian column")->delimiter(',');
    c->add_option("-o,--output", cmp.output, "per-seed CSV");
    cmp.over.attach(c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*s) return cmd_solve_exact(solve);
        if (*l) return cmd_learn(learn);
        if (*w) return cmd_sweep(sweep);
        if (*c) return cmd_compare(cmp);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const CapExceeded& e) {
        std::cerr << "cap exceeded: " << e.what() << "\n";
        return kCap;
    } catch (const NotConverged& e) {
        std::cerr << "not converged: " << e.what() << "\n";
        return kNotConverged;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const StoreFormatError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kUsage;
}
