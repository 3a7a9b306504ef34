#include "slicing/cmdp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace slicing {

StateSpace::StateSpace(const Instance& inst, SpaceMode mode)
    : mode_(mode), num_ues_(inst.num_ues()), num_sub_(inst.num_subchannels()), num_levels_(inst.num_levels()) {
    for (std::size_t u = 0; u < num_ues_; ++u) {
        bq_.push_back(inst.buffer_capacity(u));
        be_.push_back(inst.battery_capacity(u));
        num_qe_ *= static_cast<std::size_t>((bq_[u] + 1) * (be_[u] + 1));
    }
    const auto& probs = inst.alphabet().probabilities;
    if (mode == SpaceMode::reduced) {
        channel_prob_ = {1.0};
        return;
    }
    channel_prob_ = {1.0};
    for (std::size_t i = 0; i < num_ues_ * num_sub_; ++i) {
        std::vector<double> next;
        next.reserve(channel_prob_.size() * num_levels_);
        // Earlier digits stay least significant: new index = level * K^i + old.
        for (std::size_t k = 0; k < num_levels_; ++k)
            for (double p : channel_prob_) next.push_back(p * probs[k]);
        channel_prob_ = std::move(next);
    }
    num_channel_ = channel_prob_.size();
}

ChannelMatrix StateSpace::channel(std::size_t h) const {
    ChannelMatrix c(num_ues_ * num_sub_, 0);
    if (mode_ == SpaceMode::reduced) return c;
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = static_cast<std::uint8_t>(h % num_levels_);
        h /= num_levels_;
    }
    return c;
}

void StateSpace::decode_qe(std::size_t qe, std::vector<int>& queues, std::vector<int>& batteries) const {
    queues.resize(num_ues_);
    batteries.resize(num_ues_);
    for (std::size_t u = 0; u < num_ues_; ++u) {
        std::size_t radix = static_cast<std::size_t>((bq_[u] + 1) * (be_[u] + 1));
        std::size_t code = qe % radix;
        qe /= radix;
        queues[u] = static_cast<int>(code / (be_[u] + 1));
        batteries[u] = static_cast<int>(code % (be_[u] + 1));
    }
}

std::size_t StateSpace::encode_qe(std::span<const int> queues, std::span<const int> batteries) const {
    std::size_t qe = 0, stride = 1;
    for (std::size_t u = 0; u < num_ues_; ++u) {
        qe += static_cast<std::size_t>(queues[u] * (be_[u] + 1) + batteries[u]) * stride;
        stride *= static_cast<std::size_t>((bq_[u] + 1) * (be_[u] + 1));
    }
    return qe;
}

SystemState StateSpace::state(std::size_t s) const {
    SystemState st;
    st.channel = channel(channel_index(s));
    decode_qe(qe_index(s), st.queues, st.batteries);
    return st;
}

std::size_t StateSpace::index(const SystemState& state) const {
    std::size_t h = 0;
    if (mode_ == SpaceMode::full)
        for (std::size_t i = state.channel.size(); i-- > 0;) h = h * num_levels_ + state.channel[i];
    return compose(h, encode_qe(state.queues, state.batteries));
}

std::size_t StateSpace::reference() const {
    std::vector<int> q(num_ues_, 0);
    return compose(0, encode_qe(q, be_));
}

double state_space_size(const Instance& inst, SpaceMode mode) {
    double n = 1.0;
    for (std::size_t u = 0; u < inst.num_ues(); ++u)
        n *= (inst.buffer_capacity(u) + 1.0) * (inst.battery_capacity(u) + 1.0);
    if (mode == SpaceMode::full)
        n *= std::pow(static_cast<double>(inst.num_levels()),
                      static_cast<double>(inst.num_ues() * inst.num_subchannels()));
    return n;
}

StateSpace enumerate_states(const Instance& inst, SpaceMode mode) {
    double n = state_space_size(inst, mode);
    double cap = inst.config().exact_state_cap;
    if (n > cap) {
        std::ostringstream msg;
        msg << "state space of " << n << " states exceeds the cap of " << cap;
        throw CapExceeded(msg.str(), n);
    }
    return StateSpace(inst, mode);
}

std::vector<ControlAction> enumerate_actions(const Instance& inst) {
    const std::size_t U = inst.num_ues(), N = inst.num_subchannels(), F = inst.num_fpc();
    std::size_t owners = 1, powers = 1;
    for (std::size_t n = 0; n < N; ++n) owners *= U + 1;
    for (std::size_t u = 0; u < U; ++u) powers *= F;
    std::vector<ControlAction> out;
    out.reserve(owners * powers);
    for (std::size_t o = 0; o < owners; ++o) {
        ControlAction base;
        base.assignment.assign(U * N, 0);
        std::size_t code = o;
        for (std::size_t n = 0; n < N; ++n) {
            std::size_t owner = code % (U + 1);
            code /= U + 1;
            if (owner > 0) base.assignment[(owner - 1) * N + n] = 1;
        }
        for (std::size_t p = 0; p < powers; ++p) {
            ControlAction a = base;
            a.fpc.resize(U);
            std::size_t pc = p;
            for (std::size_t u = 0; u < U; ++u) {
                a.fpc[u] = static_cast<int>(pc % F);
                pc /= F;
            }
            out.push_back(std::move(a));
        }
    }
    return out;
}

SparsePmf qe_transition(const Instance& inst, const StateSpace& space, std::size_t state,
                        const ControlAction& action) {
    SystemState st = space.state(state);
    auto outcomes = resolve_all(inst, st, action);
    SparsePmf pmf{{0, 1.0}};
    std::size_t stride = 1;
    for (std::size_t u = 0; u < inst.num_ues(); ++u) {
        auto next = next_state_pmf(inst, u, st.queues[u], st.batteries[u], outcomes[u].served, outcomes[u].consumed);
        const std::size_t cols = next.battery.size();
        SparsePmf merged;
        for (const auto& [code, p] : pmf)
            for (std::size_t q = 0; q < next.queue.size(); ++q) {
                if (next.queue[q] <= 0) continue;
                for (std::size_t e = 0; e < cols; ++e)
                    if (next.battery[e] > 0)
                        merged.emplace_back(code + (q * cols + e) * stride, p * next.queue[q] * next.battery[e]);
            }
        pmf = std::move(merged);
        stride *= next.queue.size() * cols;
    }
    std::sort(pmf.begin(), pmf.end());
    return pmf;
}

SparsePmf transition_kernel(const Instance& inst, const StateSpace& space, std::size_t state,
                            const ControlAction& action) {
    auto qe = qe_transition(inst, space, state, action);
    SparsePmf out;
    out.reserve(qe.size() * space.num_channel_states());
    for (std::size_t h = 0; h < space.num_channel_states(); ++h)
        for (const auto& [code, p] : qe) out.emplace_back(space.compose(h, code), p * space.channel_probability(h));
    return out;
}

double per_stage_reward(const Instance& inst, const Multipliers& eta, const SystemState& state,
                        const ControlAction& action) {
    auto outcomes = resolve_all(inst, state, action);
    std::vector<double> delivered;
    for (const auto& o : outcomes) delivered.push_back(o.delivered_rate);
    return lagrangian_reward(inst, eta, state.queues, delivered);
}

ExactModel::ExactModel(const Instance& inst, double work_cap)
    : inst_(inst), space_(enumerate_states(inst, SpaceMode::full)), actions_(enumerate_actions(inst)) {
    const std::size_t S = space_.size(), A = actions_.size();
    if (static_cast<double>(S) * static_cast<double>(A) > work_cap)
        throw CapExceeded("state-action table exceeds the work cap", static_cast<double>(S) * A);
    rate_.resize(S * A);
    delay_.resize(S);
    rows_.resize(S * A);
    const auto& slices = inst.config().slices;
    const double rate_scale = inst.config().objective.rate_scale;
    double entries = 0;
    for (std::size_t s = 0; s < S; ++s) {
        SystemState st = space_.state(s);
        delay_[s] = slice_delay_surrogates(inst, st.queues);
        for (std::size_t a = 0; a < A; ++a) {
            auto outcomes = resolve_all(inst, st, actions_[a]);
            double r = 0.0;
            for (std::size_t u = 0; u < outcomes.size(); ++u)
                r += slices[inst.ue(u).slice].weight * outcomes[u].delivered_rate;
            rate_[s * A + a] = r * rate_scale;
            rows_[s * A + a] = qe_transition(inst, space_, s, actions_[a]);
            entries += static_cast<double>(rows_[s * A + a].size());
            if (entries > work_cap) throw CapExceeded("transition table exceeds the work cap", entries);
        }
    }
}

double ExactModel::reward(std::size_t s, std::size_t a, const Multipliers& eta) const {
    const auto& slices = inst_.config().slices;
    const double delay_scale = inst_.config().objective.delay_scale;
    double g = rate_reward(s, a);
    for (std::size_t m = 0; m < slices.size(); ++m) g -= eta[m] * (delay_[s][m] - slices[m].max_delay) * delay_scale;
    return g;
}

namespace {

// Expected value of the next (Q, E) code once the channel is averaged out.
std::vector<double> next_qe_values(const ExactModel& model, const ValueTable& table) {
    const auto& space = model.space();
    if (table.mode == SpaceMode::reduced) return table.values;
    std::vector<double> w(space.num_qe(), 0.0);
    for (std::size_t h = 0; h < space.num_channel_states(); ++h) {
        double p = space.channel_probability(h);
        for (std::size_t qe = 0; qe < space.num_qe(); ++qe) w[qe] += p * table.values[space.compose(h, qe)];
    }
    return w;
}

double q_value(const ExactModel& model, const Multipliers& eta, const std::vector<double>& w, std::size_t s,
               std::size_t a) {
    double v = model.reward(s, a, eta);
    for (const auto& [code, p] : model.qe_row(s, a)) v += p * w[code];
    return v;
}

std::pair<std::size_t, double> best_action(const ExactModel& model, const Multipliers& eta,
                                           const std::vector<double>& w, std::size_t s, double tie) {
    std::size_t best = 0;
    double best_v = q_value(model, eta, w, s, 0);
    for (std::size_t a = 1; a < model.num_actions(); ++a) {
        double v = q_value(model, eta, w, s, a);
        if (v > best_v + tie * (1.0 + std::abs(best_v))) {
            best_v = v;
            best = a;
        }
    }
    return {best, best_v};
}

double span_of(const std::vector<double>& next, const std::vector<double>& prev) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < next.size(); ++i) {
        double d = next[i] - prev[i];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return hi - lo;
}

}  // namespace

ValueTable relative_value_iteration(const ExactModel& model, const Multipliers& eta, SpaceMode mode,
                                    const SolveOptions& options) {
    const auto& space = model.space();
    ValueTable table;
    table.mode = mode;
    const std::size_t n = mode == SpaceMode::full ? space.size() : space.num_qe();
    const std::size_t ref = mode == SpaceMode::full ? space.reference() : space.qe_index(space.reference());
    table.values.assign(n, 0.0);
    std::vector<double> next(n);
    bool done = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        auto w = next_qe_values(model, table);
        if (mode == SpaceMode::full) {
            for (std::size_t s = 0; s < n; ++s) next[s] = best_action(model, eta, w, s, 0.0).second;
        } else {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t s = 0; s < space.size(); ++s)
                next[space.qe_index(s)] +=
                    space.channel_probability(space.channel_index(s)) * best_action(model, eta, w, s, 0.0).second;
        }
        table.span = span_of(next, table.values);
        table.span_history.push_back(table.span);
        table.theta = next[ref];
        for (std::size_t s = 0; s < n; ++s) table.values[s] = next[s] - table.theta;
        table.iterations = it;
        if (table.span < options.tolerance) {
            done = true;
            break;
        }
    }
    if (!done) {
        std::ostringstream msg;
        msg << "relative value iteration stopped after " << table.iterations << " sweeps with span " << table.span;
        throw NotConverged(msg.str(), table.span);
    }
    auto w = next_qe_values(model, table);
    table.policy.resize(space.size());
    for (std::size_t s = 0; s < space.size(); ++s)
        table.policy[s] = best_action(model, eta, w, s, options.tie_tolerance).first;
    return table;
}

double action_value(const ExactModel& model, const Multipliers& eta, const ValueTable& table, std::size_t s,
                    std::size_t a) {
    return q_value(model, eta, next_qe_values(model, table), s, a);
}

std::size_t greedy_action(const ExactModel& model, const Multipliers& eta, const ValueTable& table, std::size_t s,
                          double tie_tolerance) {
    return best_action(model, eta, next_qe_values(model, table), s, tie_tolerance).first;
}

ValueTable reduce_values(const ExactModel& model, const ValueTable& full) {
    ValueTable out = full;
    out.mode = SpaceMode::reduced;
    out.values = next_qe_values(model, full);
    double shift = out.values[model.space().qe_index(model.space().reference())];
    for (auto& v : out.values) v -= shift;
    return out;
}

double bellman_residual(const ExactModel& model, const Multipliers& eta, const ValueTable& table) {
    const auto& space = model.space();
    auto w = next_qe_values(model, table);
    double worst = 0.0;
    if (table.mode == SpaceMode::full) {
        for (std::size_t s = 0; s < space.size(); ++s)
            worst = std::max(worst, std::abs(table.theta + table.values[s] - best_action(model, eta, w, s, 0.0).second));
        return worst;
    }
    std::vector<double> rhs(space.num_qe(), 0.0);
    for (std::size_t s = 0; s < space.size(); ++s)
        rhs[space.qe_index(s)] +=
            space.channel_probability(space.channel_index(s)) * best_action(model, eta, w, s, 0.0).second;
    for (std::size_t qe = 0; qe < rhs.size(); ++qe)
        worst = std::max(worst, std::abs(table.theta + table.values[qe] - rhs[qe]));
    return worst;
}

PolicyEvaluation evaluate_policy(const ExactModel& model, const std::vector<std::size_t>& policy,
                                 const Multipliers& eta) {
    const auto& space = model.space();
    const auto n = static_cast<Eigen::Index>(space.size());
    const auto last = n - 1;
    // Solve (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (const auto& [code, p] : model.qe_row(static_cast<std::size_t>(i), policy[i]))
            for (std::size_t h = 0; h < space.num_channel_states(); ++h) {
                auto j = static_cast<Eigen::Index>(space.compose(h, code));
                if (j != last) triplets.emplace_back(j, i, p * space.channel_probability(h));
            }
        if (i != last) triplets.emplace_back(i, i, -1.0);
        triplets.emplace_back(last, i, 1.0);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(last) = 1.0;

    PolicyEvaluation out;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    if (lu.info() == Eigen::Success) pi = lu.solve(b);
    if (lu.info() != Eigen::Success || !pi.allFinite() || (A * pi - b).lpNorm<Eigen::Infinity>() > 1e-8 ||
        pi.minCoeff() < -1e-9)
        out.ill_conditioned = true;
    pi = pi.cwiseMax(0.0);
    if (pi.sum() > 0) pi /= pi.sum();

    out.stationary.assign(pi.data(), pi.data() + n);
    out.slice_delay.assign(model.instance().num_slices(), 0.0);
    for (std::size_t s = 0; s < space.size(); ++s) {
        double p = out.stationary[s];
        out.average_reward += p * model.reward(s, policy[s], eta);
        out.average_rate_reward += p * model.rate_reward(s, policy[s]);
        for (std::size_t m = 0; m < out.slice_delay.size(); ++m) out.slice_delay[m] += p * model.delays(s)[m];
    }
    return out;
}

DualResult dual_descent(const ExactModel& model, const LearningSchedule& schedule, const DualOptions& options) {
    const auto& slices = model.instance().config().slices;
    const double delay_scale = model.instance().config().objective.delay_scale;
    auto feasible = [&](const PolicyEvaluation& ev) {
        for (std::size_t m = 0; m < slices.size(); ++m)
            if (ev.slice_delay[m] > slices[m].max_delay * (1.0 + options.feasibility_slack)) return false;
        return true;
    };

    DualResult result;
    Multipliers eta(slices.size(), schedule.lm_floor);
    std::optional<DualResult> best;
    double move = std::numeric_limits<double>::infinity();
    for (int k = 0; k < options.max_outer; ++k) {
        ValueTable table = relative_value_iteration(model, eta, SpaceMode::full, options.inner);
        PolicyEvaluation ev = evaluate_policy(model, table.policy, eta);
        result.trace.push_back({eta, ev.average_reward, ev.slice_delay});
        result.iterations = k + 1;
        if (feasible(ev) && (!best || ev.average_rate_reward > best->evaluation.average_rate_reward)) {
            best = DualResult{};
            best->eta = eta;
            best->solution = table;
            best->evaluation = ev;
        }
        Multipliers next = eta;
        move = 0.0;
        for (std::size_t m = 0; m < slices.size(); ++m) {
            double grad = (ev.slice_delay[m] - slices[m].max_delay) * delay_scale;
            next[m] = std::clamp(eta[m] + schedule.lm_step(k) * grad, schedule.lm_floor, schedule.lm_ceiling);
            move = std::max(move, std::abs(next[m] - eta[m]));
        }
        result.eta = eta;
        result.solution = std::move(table);
        result.evaluation = std::move(ev);
        eta = std::move(next);
        if (move < schedule.lm_tolerance) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged && options.throw_on_budget) {
        std::ostringstream msg;
        msg << "multipliers still moving by " << move << " after " << options.max_outer << " outer iterations";
        throw NotConverged(msg.str(), move);
    }
    if (!feasible(result.evaluation) && best) {
        result.eta = best->eta;
        result.solution = std::move(best->solution);
        result.evaluation = std::move(best->evaluation);
    }
    return result;
}

void write_value_table_csv(const ExactModel& model, const ValueTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    const auto& space = model.space();
    const std::size_t U = model.instance().num_ues(), N = model.instance().num_subchannels();
    auto join = [](const auto& xs) {
        std::ostringstream s;
        for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? ";" : "") << static_cast<long>(xs[i]);
        return s.str();
    };
    out << "state_index,channel,queues,batteries,value,assignment,fpc\n";
    out.precision(12);
    // Reduced tables report the greedy action at the lowest channel state.
    for (std::size_t i = 0; i < table.values.size(); ++i) {
        std::size_t s = table.mode == SpaceMode::full ? i : space.compose(0, i);
        SystemState st = space.state(s);
        const auto& act = model.actions()[table.policy[s]];
        std::vector<long> owner(N, -1);
        for (std::size_t u = 0; u < U; ++u)
            for (std::size_t n = 0; n < N; ++n)
                if (act.assignment[u * N + n]) owner[n] = static_cast<long>(u);
        out << i << ',' << (table.mode == SpaceMode::full ? join(st.channel) : std::string()) << ','
            << join(st.queues) << ',' << join(st.batteries) << ',' << table.values[i] << ',' << join(owner) << ','
            << join(act.fpc) << '\n';
    }
}

}  // namespace slicing
