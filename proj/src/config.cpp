#include "slicing/config.hpp"

#include "slicing/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

namespace slicing {

using nlohmann::json;

double LearningSchedule::q_step(std::int64_t t) const {
    return q_step_scale / std::pow(1.0 + static_cast<double>(t), q_step_exponent);
}

double LearningSchedule::lm_step(std::int64_t t) const {
    return lm_step_scale / std::pow(1.0 + static_cast<double>(t), lm_step_exponent);
}

std::size_t ScenarioConfig::total_ues() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += static_cast<std::size_t>(s.num_ues);
    return n;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

// Reads an object while tracking which keys were consumed, so that typos in a
// scenario file are reported instead of silently falling back to defaults.
class Reader {
public:
    Reader(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
        if (!node_.is_object()) throw ConfigError(prefix_, "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        if (!node_.contains(key)) return fallback;
        return as<T>(key);
    }

    template <typename T>
    T as(const std::string& key) {
        used_.insert(key);
        try {
            return node_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key), "wrong type");
        }
    }

    const json& node(const std::string& key) {
        used_.insert(key);
        return node_.at(key);
    }

    std::string path(const std::string& key) const {
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

    void finish() const {
        for (const auto& [key, _] : node_.items())
            if (!used_.count(key)) throw ConfigError(path(key), "unknown key");
    }

private:
    const json& node_;
    std::string prefix_;
    std::set<std::string> used_;
};

// Reads `key` (linear) or `key_suffix` (logarithmic) with conversion.
double linear_or_log(Reader& r, const std::string& key, const std::string& log_key,
                     double (*convert)(double), double fallback) {
    if (r.has(key) && r.has(log_key))
        throw ConfigError(r.path(key), "given both " + key + " and " + log_key);
    if (r.has(log_key)) return convert(r.as<double>(log_key));
    return r.get<double>(key, fallback);
}

RanConfig parse_ran(const json& node) {
    Reader r(node, "ran");
    RanConfig ran;
    ran.bandwidth_per_subchannel = r.get("bandwidth_per_subchannel", ran.bandwidth_per_subchannel);
    ran.num_subchannels = r.get("num_subchannels", ran.num_subchannels);
    ran.slot_duration = r.get("slot_duration", ran.slot_duration);
    ran.cell_radius = r.get("cell_radius", ran.cell_radius);
    ran.path_loss_exponent = r.get("path_loss_exponent", ran.path_loss_exponent);
    ran.reference_gain =
        linear_or_log(r, "reference_gain", "reference_gain_db", db_to_linear, ran.reference_gain);
    ran.noise_power = linear_or_log(r, "noise_power", "noise_power_dbm", dbm_to_watts, ran.noise_power);
    ran.fading_mean = linear_or_log(r, "fading_mean", "fading_mean_db", db_to_linear, ran.fading_mean);
    ran.fading_levels = r.get("fading_levels", ran.fading_levels);
    ran.fpc_actions = r.get("fpc_actions", ran.fpc_actions);
    r.finish();
    return ran;
}

SliceConfig parse_slice(const json& node, std::size_t index, double slot_duration) {
    Reader r(node, "slices[" + std::to_string(index) + "]");
    SliceConfig s;
    s.name = r.get<std::string>("name", "slice" + std::to_string(index));
    s.weight = r.get("weight", s.weight);
    s.num_ues = r.get("num_ues", s.num_ues);
    s.baseline_power =
        linear_or_log(r, "baseline_power", "baseline_power_dbm", dbm_to_watts, s.baseline_power);
    s.buffer_capacity = r.get("buffer_capacity", s.buffer_capacity);
    s.battery_capacity = r.get("battery_capacity", s.battery_capacity);
    s.task_probability = r.get("task_probability", s.task_probability);
    s.packet_arrival_rate = r.get("packet_arrival_rate", s.packet_arrival_rate);
    s.energy_arrival_rate = r.get("energy_arrival_rate", s.energy_arrival_rate);
    s.max_delay = r.get("max_delay", s.max_delay);
    s.packet_size = r.get("packet_size", s.packet_size);
    if (r.has("energy_unit") && r.has("energy_unit_scale"))
        throw ConfigError(r.path("energy_unit"), "given both energy_unit and energy_unit_scale");
    if (r.has("energy_unit")) {
        s.energy_unit = r.as<double>("energy_unit");
    } else {
        // Default: baseline-power transmission over one slot costs scale units.
        double scale = r.get("energy_unit_scale", 1.0);
        require(scale > 0, r.path("energy_unit_scale"), "must be > 0");
        s.energy_unit = scale * s.baseline_power * slot_duration;
    }
    r.finish();
    return s;
}

}  // namespace

void validate(const ScenarioConfig& c) {
    const auto& ran = c.ran;
    require(ran.bandwidth_per_subchannel > 0, "ran.bandwidth_per_subchannel", "must be > 0");
    require(ran.num_subchannels >= 1, "ran.num_subchannels", "must be >= 1");
    require(ran.slot_duration > 0, "ran.slot_duration", "must be > 0");
    require(ran.cell_radius > 0, "ran.cell_radius", "must be > 0");
    require(ran.path_loss_exponent > 0, "ran.path_loss_exponent", "must be > 0");
    require(ran.reference_gain > 0, "ran.reference_gain", "must be > 0");
    require(ran.noise_power > 0, "ran.noise_power", "must be > 0");
    require(ran.fading_mean > 0, "ran.fading_mean", "must be > 0");
    require(ran.fading_levels >= 1, "ran.fading_levels", "must be >= 1");
    require(!ran.fpc_actions.empty(), "ran.fpc_actions", "must be non-empty");
    for (std::size_t i = 0; i < ran.fpc_actions.size(); ++i) {
        double phi = ran.fpc_actions[i];
        require(phi > 0 && phi <= 1, "ran.fpc_actions", "values must lie in (0, 1]");
        if (i > 0) require(phi > ran.fpc_actions[i - 1], "ran.fpc_actions", "must be strictly increasing");
    }

    require(!c.slices.empty(), "slices", "at least one slice is required");
    for (std::size_t m = 0; m < c.slices.size(); ++m) {
        const auto& s = c.slices[m];
        const std::string p = "slices[" + std::to_string(m) + "].";
        require(s.weight > 0, p + "weight", "must be > 0");
        require(s.num_ues >= 1, p + "num_ues", "must be >= 1");
        require(s.baseline_power > 0, p + "baseline_power", "must be > 0");
        require(s.buffer_capacity >= 1, p + "buffer_capacity", "must be >= 1");
        require(s.battery_capacity >= 1, p + "battery_capacity", "must be >= 1");
        require(s.task_probability >= 0 && s.task_probability <= 1, p + "task_probability",
                "must lie in [0, 1]");
        require(s.packet_arrival_rate >= 0, p + "packet_arrival_rate", "must be >= 0");
        require(s.energy_arrival_rate >= 0, p + "energy_arrival_rate", "must be >= 0");
        require(s.max_delay >= 0, p + "max_delay", "must be >= 0");
        require(s.packet_size > 0, p + "packet_size", "must be > 0");
        require(s.energy_unit > 0, p + "energy_unit", "must be > 0");
    }

    if (!c.placements.empty()) {
        require(c.placements.size() == c.total_ues(), "placements", "one entry per UE is required");
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& pl : c.placements) {
            require(pl.slice_id < c.slices.size(), "placements.slice_id", "out of range");
            require(pl.ue_id < static_cast<std::size_t>(c.slices[pl.slice_id].num_ues), "placements.ue_id",
                    "out of range");
            require(pl.distance > 0 && pl.distance <= ran.cell_radius, "placements.distance",
                    "must lie in (0, cell_radius]");
            require(seen.emplace(pl.slice_id, pl.ue_id).second, "placements", "duplicate UE");
        }
    }

    const auto& l = c.learning;
    require(l.q_step_scale >= 0, "learning.q_step_scale", "must be >= 0");
    require(l.q_step_exponent >= 0, "learning.q_step_exponent", "must be >= 0");
    require(l.lm_step_scale >= 0, "learning.lm_step_scale", "must be >= 0");
    require(l.lm_step_exponent >= 0, "learning.lm_step_exponent", "must be >= 0");
    require(l.lm_floor >= 0, "learning.lm_floor", "must be >= 0");
    require(l.lm_floor < l.lm_ceiling, "learning.lm_ceiling", "must exceed lm_floor");
    require(l.q_tolerance > 0, "learning.q_tolerance", "must be > 0");
    require(l.lm_tolerance > 0, "learning.lm_tolerance", "must be > 0");
    require(l.max_iterations >= 0, "learning.max_iterations", "must be >= 0");
    require(l.termination_window >= 1, "learning.termination_window", "must be >= 1");

    require(c.objective.rate_scale > 0, "objective.rate_scale", "must be > 0");
    require(c.objective.delay_scale > 0, "objective.delay_scale", "must be > 0");

    require(c.simulation.horizon >= 1, "simulation.horizon", "must be >= 1");
    require(c.simulation.warmup_fraction >= 0 && c.simulation.warmup_fraction < 1,
            "simulation.warmup_fraction", "must lie in [0, 1)");
    require(c.simulation.train_slots >= 0, "simulation.train_slots", "must be >= 0");
    require(c.exact_state_cap >= 1, "exact_state_cap", "must be >= 1");
}

ScenarioConfig parse_scenario(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("parse error: ") + e.what());
    }
    Reader r(root, "");
    ScenarioConfig c;
    if (!r.has("ran")) throw ConfigError("ran", "missing");
    c.ran = parse_ran(r.node("ran"));
    if (!r.has("slices") || !root.at("slices").is_array()) throw ConfigError("slices", "missing or not a list");
    const auto& slices = r.node("slices");
    for (std::size_t m = 0; m < slices.size(); ++m)
        c.slices.push_back(parse_slice(slices[m], m, c.ran.slot_duration));

    if (r.has("placement")) {
        Reader p(r.node("placement"), "placement");
        c.placement_seed = p.get<std::uint64_t>("seed", c.placement_seed);
        if (p.has("distances")) {
            // distances[m][i] for UE i of slice m
            auto rows = p.as<std::vector<std::vector<double>>>("distances");
            require(rows.size() == c.slices.size(), "placement.distances", "one row per slice is required");
            for (std::size_t m = 0; m < rows.size(); ++m) {
                require(rows[m].size() == static_cast<std::size_t>(c.slices[m].num_ues), "placement.distances",
                        "row length must equal num_ues");
                for (std::size_t i = 0; i < rows[m].size(); ++i) c.placements.push_back({m, i, rows[m][i]});
            }
        }
        p.finish();
    }

    if (r.has("learning")) {
        Reader l(r.node("learning"), "learning");
        auto& s = c.learning;
        s.q_step_scale = l.get("q_step_scale", s.q_step_scale);
        s.q_step_exponent = l.get("q_step_exponent", s.q_step_exponent);
        s.lm_step_scale = l.get("lm_step_scale", s.lm_step_scale);
        s.lm_step_exponent = l.get("lm_step_exponent", s.lm_step_exponent);
        s.lm_floor = l.get("lm_floor", s.lm_floor);
        s.lm_ceiling = l.get("lm_ceiling", s.lm_ceiling);
        s.q_tolerance = l.get("q_tolerance", s.q_tolerance);
        s.lm_tolerance = l.get("lm_tolerance", s.lm_tolerance);
        s.max_iterations = l.get("max_iterations", s.max_iterations);
        s.termination_window = l.get("termination_window", s.termination_window);
        l.finish();
    }
    if (r.has("objective")) {
        Reader o(r.node("objective"), "objective");
        c.objective.rate_scale = o.get("rate_scale", c.objective.rate_scale);
        c.objective.delay_scale = o.get("delay_scale", c.objective.delay_scale);
        o.finish();
    }
    if (r.has("simulation")) {
        Reader s(r.node("simulation"), "simulation");
        auto& sim = c.simulation;
        sim.horizon = s.get("horizon", sim.horizon);
        sim.warmup_fraction = s.get("warmup_fraction", sim.warmup_fraction);
        sim.seed = s.get("seed", sim.seed);
        sim.train_slots = s.get("train_slots", sim.train_slots);
        s.finish();
    }
    c.exact_state_cap = r.get("exact_state_cap", c.exact_state_cap);
    r.finish();
    validate(c);
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

std::string to_json_text(const ScenarioConfig& c) {
    json root;
    const auto& ran = c.ran;
    root["ran"] = {{"bandwidth_per_subchannel", ran.bandwidth_per_subchannel},
                   {"num_subchannels", ran.num_subchannels},
                   {"slot_duration", ran.slot_duration},
                   {"cell_radius", ran.cell_radius},
                   {"path_loss_exponent", ran.path_loss_exponent},
                   {"reference_gain", ran.reference_gain},
                   {"noise_power", ran.noise_power},
                   {"fading_mean", ran.fading_mean},
                   {"fading_levels", ran.fading_levels},
                   {"fpc_actions", ran.fpc_actions}};
    root["slices"] = json::array();
    for (const auto& s : c.slices) {
        root["slices"].push_back({{"name", s.name},
                                  {"weight", s.weight},
                                  {"num_ues", s.num_ues},
                                  {"baseline_power", s.baseline_power},
                                  {"buffer_capacity", s.buffer_capacity},
                                  {"battery_capacity", s.battery_capacity},
                                  {"task_probability", s.task_probability},
                                  {"packet_arrival_rate", s.packet_arrival_rate},
                                  {"energy_arrival_rate", s.energy_arrival_rate},
                                  {"max_delay", s.max_delay},
                                  {"packet_size", s.packet_size},
                                  {"energy_unit", s.energy_unit}});
    }
    json placement = {{"seed", c.placement_seed}};
    if (!c.placements.empty()) {
        std::vector<std::vector<double>> rows(c.slices.size());
        for (std::size_t m = 0; m < c.slices.size(); ++m) rows[m].assign(c.slices[m].num_ues, 0.0);
        for (const auto& p : c.placements) rows[p.slice_id][p.ue_id] = p.distance;
        placement["distances"] = rows;
    }
    root["placement"] = placement;
    const auto& l = c.learning;
    root["learning"] = {{"q_step_scale", l.q_step_scale},       {"q_step_exponent", l.q_step_exponent},
                        {"lm_step_scale", l.lm_step_scale},     {"lm_step_exponent", l.lm_step_exponent},
                        {"lm_floor", l.lm_floor},               {"lm_ceiling", l.lm_ceiling},
                        {"q_tolerance", l.q_tolerance},         {"lm_tolerance", l.lm_tolerance},
                        {"max_iterations", l.max_iterations},   {"termination_window", l.termination_window}};
    root["objective"] = {{"rate_scale", c.objective.rate_scale}, {"delay_scale", c.objective.delay_scale}};
    root["simulation"] = {{"horizon", c.simulation.horizon},
                          {"warmup_fraction", c.simulation.warmup_fraction},
                          {"seed", c.simulation.seed},
                          {"train_slots", c.simulation.train_slots}};
    root["exact_state_cap"] = c.exact_state_cap;
    return root.dump(2);
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json_text(config) << '\n';
}

std::vector<UePlacement> place_ues(const ScenarioConfig& config, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::placement);
    // (0, 1]: 1 - U with U in [0, 1) keeps the distance strictly positive.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<UePlacement> out;
    for (std::size_t m = 0; m < config.slices.size(); ++m)
        for (int i = 0; i < config.slices[m].num_ues; ++i)
            out.push_back({m, static_cast<std::size_t>(i),
                           config.ran.cell_radius * std::sqrt(1.0 - unit(rng))});
    return out;
}

std::vector<UePlacement> resolve_placements(const ScenarioConfig& config) {
    if (config.placements.empty()) return place_ues(config, config.placement_seed);
    std::vector<UePlacement> out = config.placements;
    std::sort(out.begin(), out.end(), [](const UePlacement& a, const UePlacement& b) {
        return std::tie(a.slice_id, a.ue_id) < std::tie(b.slice_id, b.ue_id);
    });
    return out;
}

std::string config_hash(const ScenarioConfig& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : to_json_text(config)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace slicing
