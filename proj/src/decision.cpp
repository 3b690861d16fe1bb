#include "qroute/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "qroute/error.hpp"

namespace qroute::decision {

double link_ef(const Context& ctx, LinkId l) {
    const auto& meta = ctx.view->links[l];
    if (meta.alive && ctx.belief->has(l))
        return belief::expected_fidelity(*ctx.belief, l);
    return ctx.fresh_fidelity;
}

PathResult shortest_path(const Context& ctx, NodeId source, NodeId destination,
                         const Vec& link_weight) {
    const int n = ctx.view->n_nodes;
    if (source < 0 || destination < 0 || source >= n || destination >= n || source == destination)
        throw Error(ErrorCode::INVALID_PARAM, "bad path endpoints");

    std::vector<std::vector<LinkId>> incident(n);
    for (const auto& m : ctx.view->links) {
        if (m.id < 0 || m.id >= static_cast<int>(link_weight.size())) continue;
        if (link_weight[m.id] < 0.0) continue;  // unusable
        incident[m.u].push_back(m.id);
        incident[m.v].push_back(m.id);
    }

    const double inf = std::numeric_limits<double>::infinity();
    Vec dist(n, inf);
    std::vector<LinkId> prev_link(n, -1);
    std::vector<NodeId> prev_node(n, -1);
    using Entry = std::pair<double, NodeId>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.push({0.0, source});
    while (!heap.empty()) {
        const auto [d, x] = heap.top();
        heap.pop();
        if (d > dist[x] + 1e-15) continue;
        if (x == destination) break;
        for (LinkId l : incident[x]) {
            const auto& m = ctx.view->links[l];
            const NodeId y = m.u == x ? m.v : m.u;
            const double nd = d + link_weight[l];
            if (nd < dist[y] - 1e-15) {
                dist[y] = nd;
                prev_link[y] = l;
                prev_node[y] = x;
                heap.push({nd, y});
            }
        }
    }
    if (dist[destination] == inf)
        throw Error(ErrorCode::NO_PATH, "destination unreachable over usable links");

    PathResult res;
    res.weight = dist[destination];
    NodeId cur = destination;
    while (cur != source) {
        res.links.push_back(prev_link[cur]);
        res.nodes.push_back(cur);
        cur = prev_node[cur];
    }
    res.nodes.push_back(source);
    std::reverse(res.links.begin(), res.links.end());
    std::reverse(res.nodes.begin(), res.nodes.end());
    return res;
}

namespace {

struct PathContext {
    std::set<LinkId> on_path;
    std::set<std::pair<LinkId, LinkId>> consecutive;  // ordered (min, max)
    std::vector<double> fmin_needed;                  // per link, max over routed requests
};

Vec fmsp_weights(const Context& ctx) {
    Vec w(ctx.view->links.size(), -1.0);
    for (const auto& m : ctx.view->links) {
        const bool usable = m.alive || !m.is_virtual;
        if (!usable) continue;
        const double ef = m.alive ? link_ef(ctx, m.id) : ctx.fresh_fidelity;
        w[m.id] = -std::log(std::max(ef, 1e-6));
    }
    return w;
}

PathContext request_paths(const Context& ctx) {
    PathContext pc;
    pc.fmin_needed.assign(ctx.view->links.size(), 0.0);
    const Vec weights = fmsp_weights(ctx);
    for (const auto& req : ctx.requests) {
        PathResult path;
        try {
            path = shortest_path(ctx, req.source, req.destination, weights);
        } catch (const Error&) {
            continue;
        }
        for (std::size_t i = 0; i < path.links.size(); ++i) {
            pc.on_path.insert(path.links[i]);
            pc.fmin_needed[path.links[i]] =
                std::max(pc.fmin_needed[path.links[i]], req.min_fidelity);
            if (i + 1 < path.links.size())
                pc.consecutive.insert({std::min(path.links[i], path.links[i + 1]),
                                       std::max(path.links[i], path.links[i + 1])});
        }
    }
    return pc;
}

}  // namespace

Vec concrete_scores(const Context& ctx) {
    const PathContext pc = request_paths(ctx);
    Vec scores(ctx.actions.size(), 0.0);
    for (std::size_t i = 0; i < ctx.actions.size(); ++i) {
        const auto& a = ctx.actions[i];
        switch (a.type) {
            case ActionType::Idle:
                scores[i] = 0.0;
                break;
            case ActionType::Entangle: {
                const auto& m = ctx.view->links[a.link_a];
                const bool on_path = pc.on_path.count(a.link_a) > 0;
                if (on_path && (!m.alive || m.pairs == 0))
                    scores[i] = 2.5;
                else if (on_path)
                    scores[i] = 1.0;  // auxiliary pair for purification
                else
                    scores[i] = 0.2;
                break;
            }
            case ActionType::Purify: {
                const double ef = link_ef(ctx, a.link_a);
                const bool on_path = pc.on_path.count(a.link_a) > 0;
                const double needed = pc.fmin_needed[a.link_a];
                if (on_path && ef < needed + 0.05)
                    scores[i] = 2.5;
                else if (ef < 0.65)
                    scores[i] = 1.0;
                else
                    scores[i] = 0.2;
                break;
            }
            case ActionType::Swap: {
                const auto key = std::make_pair(std::min(a.link_a, a.link_b),
                                                std::max(a.link_a, a.link_b));
                scores[i] = pc.consecutive.count(key) > 0 ? 3.0 : 0.1;
                break;
            }
            case ActionType::Release: {
                const double ef = link_ef(ctx, a.link_a);
                const auto& m = ctx.view->links[a.link_a];
                double s = ef < 0.55 ? 1.0 : 0.0;
                const double pressure =
                    0.5 * (static_cast<double>(ctx.mu[m.u]) / std::max(1, ctx.view->capacity[m.u]) +
                           static_cast<double>(ctx.mu[m.v]) / std::max(1, ctx.view->capacity[m.v]));
                if (pressure > 0.9 && !pc.on_path.count(a.link_a)) s += 1.0;
                scores[i] = s;
                break;
            }
        }
    }
    return scores;
}

Vec expand_type_policy(const Context& ctx, const Vec& type_probs) {
    const Vec scores = concrete_scores(ctx);
    Vec out(ctx.actions.size(), 0.0);
    int idle_index = 0;
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        if (ctx.actions[i].type == ActionType::Idle) {
            idle_index = static_cast<int>(i);
            break;
        }
    for (int t = 0; t < netmodel::kNumActionTypes; ++t) {
        double z = 0.0;
        for (std::size_t i = 0; i < ctx.actions.size(); ++i)
            if (static_cast<int>(ctx.actions[i].type) == t) z += std::exp(scores[i]);
        if (z <= 0.0) {
            out[idle_index] += type_probs[t];  // no candidate of this type
            continue;
        }
        for (std::size_t i = 0; i < ctx.actions.size(); ++i)
            if (static_cast<int>(ctx.actions[i].type) == t)
                out[i] += type_probs[t] * std::exp(scores[i]) / z;
    }
    return out;
}

Vec type_marginals(const Context& ctx, const Vec& action_probs) {
    Vec out(netmodel::kNumActionTypes, 0.0);
    for (std::size_t i = 0; i < ctx.actions.size(); ++i)
        out[static_cast<int>(ctx.actions[i].type)] += action_probs[i];
    return out;
}

}  // namespace qroute::decision
