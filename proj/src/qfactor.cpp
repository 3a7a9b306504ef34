#include "slicing/qfactor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace slicing {

UeTable::UeTable(int bq, int be) : buffer_capacity(bq), battery_capacity(be), entries(num_states() * 2, 0.0) {}

std::vector<double> UeTable::best_values() const {
    std::vector<double> w(num_states());
    for (std::size_t s = 0; s < w.size(); ++s) w[s] = std::max(entries[2 * s], entries[2 * s + 1]);
    return w;
}

QFactorStore make_store(const Instance& inst) {
    QFactorStore store;
    for (std::size_t u = 0; u < inst.num_ues(); ++u)
        store.tables.emplace_back(inst.buffer_capacity(u), inst.battery_capacity(u));
    return store;
}

double global_q(const Instance& inst, const QFactorStore& store, const SystemState& state,
                std::span<const std::uint8_t> assignment) {
    const std::size_t N = inst.num_subchannels();
    double total = 0.0;
    for (std::size_t u = 0; u < inst.num_ues(); ++u)
        for (std::size_t n = 0; n < N; ++n)
            total += store.tables[u].at(state.queues[u], state.batteries[u], assignment[u * N + n] ? 1 : 0);
    return total;
}

std::vector<std::uint8_t> allocate_subchannels(const Instance& inst, const QFactorStore& store,
                                               const SystemState& state) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels();
    std::vector<std::uint8_t> assignment(U * N, 0);
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t best = U;
        double best_adv = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
            const auto& t = store.tables[u];
            double adv = t.at(state.queues[u], state.batteries[u], 1) - t.at(state.queues[u], state.batteries[u], 0);
            if (adv > best_adv) {
                best_adv = adv;
                best = u;
            }
        }
        if (best < U) assignment[best * N + n] = 1;
    }
    return assignment;
}

namespace {

double delay_penalty(const Instance& inst, const Multipliers& eta, std::size_t u, int q) {
    const auto& slice = inst.slice_of(u);
    const std::size_t m = inst.ue(u).slice;
    const double k = static_cast<double>(inst.ues_in_slice(m).size());
    const double n = static_cast<double>(inst.num_subchannels());
    double d = delay_surrogate(q, slice, inst.ran().slot_duration);
    return -(eta[m] / n) * (d - slice.max_delay / k) * inst.config().objective.delay_scale;
}

bool better(double candidate, double incumbent) {
    if (!std::isfinite(incumbent)) return candidate > incumbent;
    return candidate > incumbent + 1e-9 * (1.0 + std::abs(incumbent));
}

// Per-UE aggregate raw rate for each fpc action under a subchannel set.
struct UeRates {
    std::vector<double> raw;
    bool any = false;
};

double best_lookahead(const Instance& inst, std::size_t u, int q, int e, const UeRates& r, std::span<const double> w,
                      int* arg = nullptr) {
    double best = ue_lookahead(inst, u, q, e, 0.0, 0, w);
    int pick = 0;
    if (r.any) {
        best = -std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < r.raw.size(); ++f) {
            double v = ue_lookahead(inst, u, q, e, r.raw[f], static_cast<int>(f), w);
            if (better(v, best)) {
                best = v;
                pick = static_cast<int>(f);
            }
        }
    }
    if (arg) *arg = pick;
    return best;
}

}  // namespace

double per_stage_ue_reward(const Instance& inst, const Multipliers& eta, std::size_t u, int q, int e, int c,
                           int fpc, std::size_t level) {
    double raw = c ? inst.ue(u).rate[fpc][level] : 0.0;
    auto out = resolve_ue(inst, u, q, e, raw, fpc);
    double w = inst.slice_of(u).weight;
    return w * out.delivered_rate * inst.config().objective.rate_scale + delay_penalty(inst, eta, u, q);
}

double ue_lookahead(const Instance& inst, std::size_t u, int q, int e, double raw_rate, int fpc,
                    std::span<const double> w) {
    auto out = resolve_ue(inst, u, q, e, raw_rate, fpc);
    double reward = inst.slice_of(u).weight * out.delivered_rate * inst.config().objective.rate_scale;
    return reward + expected_next_value(inst, u, q, e, out.served, out.consumed, w);
}

UeBackup ue_backup(const Instance& inst, const Multipliers& eta, std::size_t u, int q, int e,
                   std::span<const double> level_weights, std::span<const double> w) {
    const auto& ue = inst.ue(u);
    const double penalty = delay_penalty(inst, eta, u, q);
    const double idle = ue_lookahead(inst, u, q, e, 0.0, 0, w);
    UeBackup b;
    b.idle = penalty + idle;
    double assigned = 0.0;
    for (std::size_t k = 0; k < level_weights.size(); ++k) {
        if (level_weights[k] == 0) continue;
        double best = idle;
        for (std::size_t f = 0; f < ue.rate.size(); ++f)
            best = std::max(best, ue_lookahead(inst, u, q, e, ue.rate[f][k], static_cast<int>(f), w));
        assigned += level_weights[k] * best;
    }
    b.assigned = penalty + assigned;
    return b;
}

std::vector<std::uint8_t> allocate_subchannels_csi(const Instance& inst, const QFactorStore& store,
                                                   const SystemState& state) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels(), F = inst.num_fpc();
    std::vector<std::uint8_t> assignment(U * N, 0);
    std::vector<std::vector<double>> w(U);
    std::vector<UeRates> rates(U);
    std::vector<double> current(U);
    for (std::size_t u = 0; u < U; ++u) {
        w[u] = store.tables[u].best_values();
        rates[u].raw.assign(F, 0.0);
        current[u] = best_lookahead(inst, u, state.queues[u], state.batteries[u], rates[u], w[u]);
    }
    // Bundles of a UE's best free subchannels, ranked by gain per subchannel;
    // packet quantization can make a single subchannel worthless on its own.
    std::vector<bool> taken(N, false);
    std::vector<std::size_t> order;
    for (;;) {
        std::size_t pick = U, pick_count = 0;
        double pick_ratio = 0.0, pick_value = 0.0;
        UeRates pick_rates;
        std::vector<std::size_t> pick_order;
        for (std::size_t u = 0; u < U; ++u) {
            order.clear();
            for (std::size_t n = 0; n < N; ++n)
                if (!taken[n]) order.push_back(n);
            const auto& rate = inst.ue(u).rate.back();
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return rate[state.channel[u * N + a]] > rate[state.channel[u * N + b]];
            });
            UeRates cand = rates[u];
            cand.any = true;
            for (std::size_t j = 0; j < order.size(); ++j) {
                for (std::size_t f = 0; f < F; ++f) cand.raw[f] += inst.ue(u).rate[f][state.channel[u * N + order[j]]];
                double v = best_lookahead(inst, u, state.queues[u], state.batteries[u], cand, w[u]);
                double gain = v - current[u];
                if (gain <= 1e-9 * (1.0 + std::abs(current[u]))) continue;
                double ratio = gain / static_cast<double>(j + 1);
                if (ratio > pick_ratio) {
                    pick = u;
                    pick_count = j + 1;
                    pick_ratio = ratio;
                    pick_value = v;
                    pick_rates = cand;
                    pick_order = order;
                }
            }
        }
        if (pick == U) break;
        for (std::size_t j = 0; j < pick_count; ++j) {
            taken[pick_order[j]] = true;
            assignment[pick * N + pick_order[j]] = 1;
        }
        rates[pick] = std::move(pick_rates);
        current[pick] = pick_value;
    }
    return assignment;
}

std::vector<int> select_power(const Instance& inst, const QFactorStore& store, const SystemState& state,
                              std::span<const std::uint8_t> assignment) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels(), F = inst.num_fpc();
    std::vector<int> fpc(U, 0);
    for (std::size_t u = 0; u < U; ++u) {
        UeRates r;
        r.raw.assign(F, 0.0);
        for (std::size_t n = 0; n < N; ++n) {
            if (!assignment[u * N + n]) continue;
            r.any = true;
            for (std::size_t f = 0; f < F; ++f) r.raw[f] += inst.ue(u).rate[f][state.channel[u * N + n]];
        }
        if (!r.any) continue;
        auto w = store.tables[u].best_values();
        best_lookahead(inst, u, state.queues[u], state.batteries[u], r, w, &fpc[u]);
    }
    return fpc;
}

ControlAction decide_action(const Instance& inst, const QFactorStore& store, const SystemState& state) {
    ControlAction a;
    a.assignment = allocate_subchannels_csi(inst, store, state);
    a.fpc = select_power(inst, store, state, a.assignment);
    return a;
}

QFactorStore solve_ue_tables(const Instance& inst, const Multipliers& eta, const SolveOptions& options) {
    QFactorStore store = make_store(inst);
    const auto& prior = inst.alphabet().probabilities;
    for (std::size_t u = 0; u < inst.num_ues(); ++u) {
        UeTable& t = store.tables[u];
        const int bq = t.buffer_capacity, be = t.battery_capacity;
        std::vector<double> next(t.entries.size());
        double span = std::numeric_limits<double>::infinity();
        int it = 0;
        for (; it < options.max_iterations && span >= options.tolerance; ++it) {
            auto w = t.best_values();
            for (int q = 0; q <= bq; ++q)
                for (int e = 0; e <= be; ++e) {
                    auto b = ue_backup(inst, eta, u, q, e, prior, w);
                    next[t.offset(q, e, 0)] = b.idle;
                    next[t.offset(q, e, 1)] = b.assigned;
                }
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t i = 0; i < next.size(); ++i) {
                lo = std::min(lo, next[i] - t.entries[i]);
                hi = std::max(hi, next[i] - t.entries[i]);
            }
            span = hi - lo;
            t.theta = next[t.offset(0, be, 1)];
            for (std::size_t i = 0; i < next.size(); ++i) t.entries[i] = next[i] - t.theta;
        }
        if (span >= options.tolerance) {
            std::ostringstream msg;
            msg << "per-UE value iteration for UE " << u << " stopped with span " << span;
            throw NotConverged(msg.str(), span);
        }
    }
    return store;
}

std::vector<double> fixed_point_residual(const Instance& inst, const QFactorStore& store, const Multipliers& eta) {
    const auto& prior = inst.alphabet().probabilities;
    std::vector<double> out(inst.num_ues(), 0.0);
    for (std::size_t u = 0; u < inst.num_ues(); ++u) {
        const UeTable& t = store.tables[u];
        auto w = t.best_values();
        for (int q = 0; q <= t.buffer_capacity; ++q)
            for (int e = 0; e <= t.battery_capacity; ++e) {
                auto b = ue_backup(inst, eta, u, q, e, prior, w);
                for (int c = 0; c < 2; ++c)
                    out[u] = std::max(out[u], std::abs(b[c] - t.theta - t.at(q, e, c)));
            }
    }
    return out;
}

namespace {
constexpr const char* kStoreMagic = "slicing-qstore";
constexpr int kStoreVersion = 1;

void expect(std::istream& in, const std::string& token) {
    std::string got;
    if (!(in >> got) || got != token) throw StoreFormatError("expected '" + token + "' in Q-factor store");
}
}  // namespace

void write_store(std::ostream& out, const QFactorStore& store) {
    auto old = out.precision(17);
    out << kStoreMagic << ' ' << kStoreVersion << '\n' << "ues " << store.tables.size() << '\n';
    for (std::size_t u = 0; u < store.tables.size(); ++u) {
        const auto& t = store.tables[u];
        out << "ue " << u << ' ' << t.buffer_capacity << ' ' << t.battery_capacity << ' ' << t.theta << '\n';
        for (std::size_t s = 0; s < t.num_states(); ++s) out << t.entries[2 * s] << ' ' << t.entries[2 * s + 1] << '\n';
    }
    out.precision(old);
}

QFactorStore read_store(std::istream& in) {
    expect(in, kStoreMagic);
    int version = 0;
    if (!(in >> version) || version != kStoreVersion)
        throw StoreFormatError("unsupported Q-factor store version " + std::to_string(version));
    expect(in, "ues");
    std::size_t count = 0;
    if (!(in >> count)) throw StoreFormatError("missing UE count");
    QFactorStore store;
    for (std::size_t u = 0; u < count; ++u) {
        expect(in, "ue");
        std::size_t index = 0;
        int bq = -1, be = -1;
        double theta = 0;
        if (!(in >> index >> bq >> be >> theta) || index != u || bq < 0 || be < 0)
            throw StoreFormatError("bad header for UE " + std::to_string(u));
        UeTable t(bq, be);
        t.theta = theta;
        for (auto& x : t.entries)
            if (!(in >> x) || !std::isfinite(x)) throw StoreFormatError("bad entry for UE " + std::to_string(u));
        store.tables.push_back(std::move(t));
    }
    return store;
}

void save_store(const QFactorStore& store, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    write_store(out, store);
}

QFactorStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_store(in);
}

}  // namespace slicing
