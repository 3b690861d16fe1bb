#include "qroute/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "qroute/error.hpp"

namespace qroute::baselines {

using decision::ActionType;
using decision::LinkId;
using netmodel::Action;

namespace {

Vec point_mass(const Context& ctx, int index) {
    Vec out(ctx.actions.size(), 0.0);
    out[index] = 1.0;
    return out;
}

int idle_index(const Context& ctx) {
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        if (ctx.actions[i].type == ActionType::Idle) return static_cast<int>(i);
    throw Error(ErrorCode::NO_FEASIBLE_ACTION, "candidate set lacks idle");
}

int find_action(const Context& ctx, const Action& a) {
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        if (ctx.actions[i] == a) return static_cast<int>(i);
    return -1;
}

Vec qdr_weights(const Context& ctx, const QdrParams& p) {
    Vec w(ctx.view->links.size(), -1.0);
    for (const auto& m : ctx.view->links) {
        if (!m.alive && m.is_virtual) continue;
        const double ef = m.alive ? decision::link_ef(ctx, m.id) : ctx.fresh_fidelity;
        const double age_term = m.alive ? static_cast<double>(m.age) / m.t2_ms : 0.0;
        const double mem_term =
            0.5 * (static_cast<double>(ctx.mu[m.u]) / std::max(1, ctx.view->capacity[m.u]) +
                   static_cast<double>(ctx.mu[m.v]) / std::max(1, ctx.view->capacity[m.v]));
        w[m.id] = -std::log(std::max(ef, 1e-6)) + p.lambda_age * age_term + p.lambda_mem * mem_term;
    }
    return w;
}

Vec fmsp_weights_only(const Context& ctx) {
    Vec w(ctx.view->links.size(), -1.0);
    for (const auto& m : ctx.view->links) {
        if (!m.alive && m.is_virtual) continue;
        const double ef = m.alive ? decision::link_ef(ctx, m.id) : ctx.fresh_fidelity;
        w[m.id] = -std::log(std::max(ef, 1e-6));
    }
    return w;
}

// Next concrete step realizing a path plan: revive dead path links first,
// then swap the first consecutive live pair along the path.
int path_next_action(const Context& ctx, const PathResult& path) {
    for (LinkId l : path.links) {
        const auto& m = ctx.view->links[l];
        if (!m.alive || m.pairs == 0) {
            Action a;
            a.type = netmodel::ActionType::Entangle;
            a.link_a = m.is_virtual ? -1 : l;
            const int idx = a.link_a >= 0 ? find_action(ctx, a) : -1;
            if (idx >= 0) return idx;
            continue;
        }
    }
    for (std::size_t i = 0; i + 1 < path.links.size(); ++i) {
        const LinkId l1 = path.links[i];
        const LinkId l2 = path.links[i + 1];
        const auto& m1 = ctx.view->links[l1];
        const auto& m2 = ctx.view->links[l2];
        if (!m1.alive || !m2.alive || m1.pairs < 1 || m2.pairs < 1) continue;
        Action a;
        a.type = netmodel::ActionType::Swap;
        a.link_a = std::min(l1, l2);
        a.link_b = std::max(l1, l2);
        a.via = static_cast<int>(path.nodes[i + 1]);
        const int idx = find_action(ctx, a);
        if (idx >= 0) return idx;
    }
    return -1;
}

Vec route_policy(const Context& ctx, const Vec& weights) {
    if (ctx.requests.empty()) return point_mass(ctx, idle_index(ctx));
    const auto& req = ctx.requests.front();  // oldest first
    PathResult path;
    try {
        path = decision::shortest_path(ctx, req.source, req.destination, weights);
    } catch (const Error&) {
        return point_mass(ctx, idle_index(ctx));
    }
    const int next = path_next_action(ctx, path);
    return point_mass(ctx, next >= 0 ? next : idle_index(ctx));
}

}  // namespace

PathResult fmsp_path(const Context& ctx, const netmodel::Request& req) {
    return decision::shortest_path(ctx, req.source, req.destination, fmsp_weights_only(ctx));
}

Vec fmsp_policy(const Context& ctx) { return route_policy(ctx, fmsp_weights_only(ctx)); }

PathResult qdr_path(const Context& ctx, const netmodel::Request& req, const QdrParams& params) {
    return decision::shortest_path(ctx, req.source, req.destination, qdr_weights(ctx, params));
}

Vec qdr_policy(const Context& ctx, const QdrParams& params) {
    return route_policy(ctx, qdr_weights(ctx, params));
}

Vec gps_policy(const Context& ctx) {
    double f_min = 0.0;
    for (const auto& r : ctx.requests) f_min = std::max(f_min, r.min_fidelity);
    if (f_min == 0.0) f_min = 0.8;

    // purify the first below-threshold link holding an auxiliary pair
    for (std::size_t i = 0; i < ctx.actions.size(); ++i) {
        const auto& a = ctx.actions[i];
        if (a.type != ActionType::Purify) continue;
        if (decision::link_ef(ctx, a.link_a) < f_min) return point_mass(ctx, static_cast<int>(i));
    }
    // otherwise the swap with maximal min(EF, EF), ties to the lowest id pair
    int best = -1;
    double best_score = -1.0;
    for (std::size_t i = 0; i < ctx.actions.size(); ++i) {
        const auto& a = ctx.actions[i];
        if (a.type != ActionType::Swap) continue;
        const double s = std::min(decision::link_ef(ctx, a.link_a), decision::link_ef(ctx, a.link_b));
        if (s > best_score + 1e-15) {
            best_score = s;
            best = static_cast<int>(i);
        }
    }
    if (best >= 0) return point_mass(ctx, best);
    // keep auxiliaries coming when nothing else applies
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        if (ctx.actions[i].type == ActionType::Entangle) return point_mass(ctx, static_cast<int>(i));
    return point_mass(ctx, idle_index(ctx));
}

Vec flooding_policy(const Context& ctx, int hop_budget) {
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        if (ctx.actions[i].type == ActionType::Entangle) return point_mass(ctx, static_cast<int>(i));
    if (hop_budget >= 2)
        for (std::size_t i = 0; i < ctx.actions.size(); ++i) {
            const auto& a = ctx.actions[i];
            if (a.type != ActionType::Swap) continue;
            if (ctx.view->links[a.link_a].span + ctx.view->links[a.link_b].span <= hop_budget)
                return point_mass(ctx, static_cast<int>(i));
        }
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        if (ctx.actions[i].type == ActionType::Purify) return point_mass(ctx, static_cast<int>(i));
    return point_mass(ctx, idle_index(ctx));
}

DqnLite DqnLite::make(int d_flat, int hidden, std::uint64_t seed) {
    DqnLite d;
    d.d_flat = d_flat;
    d.q_net = nn::Mlp(d_flat, hidden, netmodel::kNumActionTypes);
    Rng rng(derive_seed(seed, 0, 9));
    d.q_net.init(rng);
    d.q_target = d.q_net;
    return d;
}

Vec DqnLite::q_values(const Vec& flat) const {
    nn::Mlp::Trace t;
    q_net.forward(flat, t);
    return t.y;
}

Vec DqnLite::q_values_target(const Vec& flat) const {
    nn::Mlp::Trace t;
    q_target.forward(flat, t);
    return t.y;
}

Vec dqn_policy(const DqnLite& dqn, const Context& ctx, const Vec& flat, double t_softmax) {
    Vec q = dqn.q_values(flat);
    for (double& x : q) x /= t_softmax;
    return decision::expand_type_policy(ctx, softmax(q));
}

double train_dqn_lite(DqnLite& dqn, const std::vector<DqnTransition>& batch, double lr, double tau) {
    if (batch.empty()) throw Error(ErrorCode::INVALID_PARAM, "empty DQN batch");
    nn::Mlp grad = dqn.q_net;
    grad.zero();
    double mse = 0.0;
    for (const auto& s : batch) {
        double target = s.reward;
        if (!s.terminal) {
            const Vec nq = dqn.q_values_target(s.next_flat);
            target += dqn.gamma * *std::max_element(nq.begin(), nq.end());
        }
        nn::Mlp::Trace trace;
        dqn.q_net.forward(s.flat, trace);
        const double err = trace.y[s.type] - target;
        mse += err * err;
        Vec dy(netmodel::kNumActionTypes, 0.0);
        dy[s.type] = 2.0 * err / batch.size();
        Vec dx;
        dqn.q_net.backward(trace, dy, grad, dx);
    }
    double sq = 0.0;
    nn::for_each(grad, grad, [&](double& g, double&) { sq += g * g; });
    const double norm = std::sqrt(sq);
    if (norm > 10.0) nn::for_each(grad, grad, [&](double& g, double&) { g *= 10.0 / norm; });
    nn::for_each(dqn.q_net, grad, [&](double& w, double& g) { w -= lr * g; });
    nn::soft_update(dqn.q_target, dqn.q_net, tau);
    return mse / batch.size();
}

std::string to_json(const DqnLite& dqn) {
    nlohmann::json j;
    j["version"] = 1;
    j["d_flat"] = dqn.d_flat;
    j["gamma"] = dqn.gamma;
    j["q_net"] = nn::mlp_to_json(dqn.q_net);
    j["q_target"] = nn::mlp_to_json(dqn.q_target);
    return j.dump();
}

DqnLite dqn_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    DqnLite d;
    d.d_flat = j.at("d_flat").get<int>();
    d.gamma = j.at("gamma").get<double>();
    d.q_net = nn::mlp_from_json(j.at("q_net"));
    d.q_target = nn::mlp_from_json(j.at("q_target"));
    return d;
}

}  // namespace qroute::baselines
