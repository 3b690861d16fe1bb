#include "qroute/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "qroute/mathutil.hpp"

namespace qroute::netmodel {

namespace {

bool is_connected(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n <= 1) return true;
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int visited = 1;
    while (!q.empty()) {
        const int x = q.front();
        q.pop();
        for (int y : adj[x])
            if (!seen[y]) {
                seen[y] = 1;
                ++visited;
                q.push(y);
            }
    }
    return visited == n;
}

std::vector<std::pair<int, int>> sample_edges(Topology topology, int n, const TopologyParams& p,
                                              Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    switch (topology) {
        case Topology::Line: {
            for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
            break;
        }
        case Topology::Grid: {
            const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
            if (side * side != n)
                throw Error(ErrorCode::INVALID_PARAM, "grid topology needs a square node count");
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c) {
                    const int id = r * side + c;
                    if (c + 1 < side) edges.emplace_back(id, id + 1);
                    if (r + 1 < side) edges.emplace_back(id, id + side);
                }
            break;
        }
        case Topology::RandomGeometric: {
            double radius = p.radius;
            if (radius <= 0.0)
                radius = std::max(0.18, 1.8 * std::sqrt(std::log(std::max(2, n)) / (M_PI * n)));
            std::vector<std::pair<double, double>> pts(n);
            for (auto& pt : pts) pt = {rng.uniform(), rng.uniform()};
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    const double dx = pts[i].first - pts[j].first;
                    const double dy = pts[i].second - pts[j].second;
                    if (dx * dx + dy * dy <= radius * radius) edges.emplace_back(i, j);
                }
            break;
        }
        case Topology::SmallWorld: {
            const int k = p.ring_degree;
            if (k < 2 || k % 2 != 0 || k >= n)
                throw Error(ErrorCode::INVALID_PARAM, "small world ring degree must be even and < n");
            if (p.rewire_prob < 0.0 || p.rewire_prob > 1.0)
                throw Error(ErrorCode::INVALID_PARAM, "rewiring probability outside [0,1]");
            // Watts-Strogatz: ring lattice, then rewire the far endpoint.
            std::vector<std::vector<char>> has(n, std::vector<char>(n, 0));
            auto add = [&](int a, int b) {
                if (a != b && !has[a][b]) {
                    has[a][b] = has[b][a] = 1;
                    edges.emplace_back(std::min(a, b), std::max(a, b));
                }
            };
            for (int i = 0; i < n; ++i)
                for (int d = 1; d <= k / 2; ++d) add(i, (i + d) % n);
            for (auto& e : edges) {
                if (rng.uniform() < p.rewire_prob) {
                    const int a = e.first;
                    int b = static_cast<int>(rng.uniform_int(n));
                    int guard = 0;
                    while ((b == a || has[a][b]) && guard++ < 4 * n)
                        b = static_cast<int>(rng.uniform_int(n));
                    if (guard < 4 * n) {
                        has[e.first][e.second] = has[e.second][e.first] = 0;
                        has[a][b] = has[b][a] = 1;
                        e = {std::min(a, b), std::max(a, b)};
                    }
                }
            }
            break;
        }
    }
    return edges;
}

void ledger_push(NetworkGraph& g, MemoryEvent ev, int delta) {
    g.ledger.push_back({ev, delta, g.time});
}

void store_pair(NetworkGraph& g, LinkId l) {
    g.nodes[g.links[l].u].occupancy += 1;
    g.nodes[g.links[l].v].occupancy += 1;
    g.links[l].pairs += 1;
    ledger_push(g, MemoryEvent::Store, 2);
}

void drop_pair(NetworkGraph& g, LinkId l, MemoryEvent ev) {
    g.nodes[g.links[l].u].occupancy -= 1;
    g.nodes[g.links[l].v].occupancy -= 1;
    g.links[l].pairs -= 1;
    ledger_push(g, ev, -2);
    if (g.links[l].pairs == 0) g.links[l].alive = false;
}

}  // namespace

std::vector<int> NetworkGraph::recomputed_occupancy() const {
    std::vector<int> mu(nodes.size(), 0);
    for (const auto& l : links) {
        if (l.pairs > 0) {
            mu[l.u] += l.pairs;
            mu[l.v] += l.pairs;
        }
    }
    return mu;
}

LinkId NetworkGraph::find_link(NodeId a, NodeId b) const {
    for (LinkId i = 0; i < link_count(); ++i) {
        const auto& l = links[i];
        if (l.alive && ((l.u == a && l.v == b) || (l.u == b && l.v == a))) return i;
    }
    return -1;
}

NetworkGraph build_network(Topology topology, int n, const TopologyParams& params,
                           std::uint64_t seed) {
    if (n < 2) throw Error(ErrorCode::INVALID_PARAM, "need at least 2 nodes");
    if (params.f_min < kFidelityFloor || params.f_max > 1.0 || params.f_min > params.f_max)
        throw Error(ErrorCode::INVALID_PARAM, "fidelity range outside [0.25, 1]");
    if (params.memory_capacity < 1)
        throw Error(ErrorCode::INVALID_PARAM, "memory capacity must be positive");

    Rng rng(derive_seed(seed, 0, /*purpose=*/1));
    std::vector<std::pair<int, int>> edges;
    bool ok = false;
    for (int attempt = 0; attempt < params.retry_budget; ++attempt) {
        edges = sample_edges(topology, n, params, rng);
        if (is_connected(n, edges)) {
            ok = true;
            break;
        }
        // Deterministic topologies cannot improve by retrying.
        if (topology == Topology::Line || topology == Topology::Grid) break;
    }
    if (!ok) throw Error(ErrorCode::UNCONNECTABLE, "connectivity not achieved within retry budget");

    NetworkGraph g;
    g.rng_seed = seed;
    g.noise = Rng(derive_seed(seed, 0, /*purpose=*/2));
    g.nodes.assign(n, NodeState{params.memory_capacity, 0, 0});
    g.params.entangle_f_min = params.f_min;
    g.params.entangle_f_max = params.f_max;

    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& [a, b] : edges) {
        LinkState l;
        l.u = a;
        l.v = b;
        l.fidelity = rng.uniform(params.f_min, params.f_max);
        l.decay_rate = rng.uniform(params.gamma_min, params.gamma_max);
        l.pur_gain = rng.uniform(params.eta_min, params.eta_max);
        l.t2_ms = rng.uniform(params.t2_min, params.t2_max);
        l.age = 0;
        l.pairs = 0;
        l.alive = false;
        g.links.push_back(l);
    }
    // Pre-establish one pair per link where memory permits (in link-id order);
    // remaining links start empty and can be revived by entangle actions.
    for (LinkId i = 0; i < g.link_count(); ++i) {
        const auto& l = g.links[i];
        if (g.nodes[l.u].occupancy < g.nodes[l.u].memory_capacity &&
            g.nodes[l.v].occupancy < g.nodes[l.v].memory_capacity) {
            g.links[i].alive = true;
            store_pair(g, i);
        }
    }
    g.ledger.clear();  // pre-established pairs belong to the initial condition
    return g;
}

void step_decoherence(NetworkGraph& g, double dt_ms) {
    if (dt_ms <= 0.0) throw Error(ErrorCode::INVALID_PARAM, "dt must be positive");
    for (auto& l : g.links) {
        if (!l.alive) continue;
        double f = l.fidelity * std::exp(-l.decay_rate * dt_ms);
        if (g.params.kappa > 0.0) {
            const double band = std::max(0.0, l.fidelity * (1.0 - l.fidelity));
            f += std::sqrt(g.params.kappa * band * dt_ms) * g.noise.normal();
        }
        l.fidelity = clamp(f, kFidelityFloor, 1.0);
        l.age += 1;
        if (l.fidelity < g.params.kill_threshold) l.alive = false;
    }
    g.time += 1;
}

bool apply_purification(NetworkGraph& g, LinkId link) {
    auto& l = g.links.at(link);
    if (!l.alive || l.pairs < 2)
        throw Error(ErrorCode::NO_AUXILIARY_PAIR, "purification needs two stored pairs");
    const bool success = g.noise.bernoulli(g.params.p_pur);
    // The auxiliary pair is consumed whether or not the protocol succeeds.
    drop_pair(g, link, MemoryEvent::PurifyConsume);
    if (success) l.fidelity = clamp(purification_fidelity(l.fidelity, l.pur_gain), kFidelityFloor, 1.0);
    return success;
}

LinkId apply_swap(NetworkGraph& g, LinkId left, LinkId right, NodeId via) {
    auto& a = g.links.at(left);
    auto& b = g.links.at(right);
    if (!a.touches(via) || !b.touches(via) || left == right)
        throw Error(ErrorCode::NOT_ADJACENT, "swap links must share the via node");
    if (!a.alive || !b.alive || a.pairs < 1 || b.pairs < 1)
        throw Error(ErrorCode::NOT_ADJACENT, "swap inputs must be alive with stored pairs");

    const NodeId outer_u = a.other(via);
    const NodeId outer_v = b.other(via);
    const double f_new = swap_fidelity(a.fidelity, b.fidelity);
    const double gamma_new = std::max(a.decay_rate, b.decay_rate);
    const double eta_new = std::min(a.pur_gain, b.pur_gain);
    const double t2_new = std::min(a.t2_ms, b.t2_ms);
    const int age_new = std::max(a.age, b.age);
    const int span_new = a.span + b.span;

    // Both halves measured at `via` are consumed; the outer halves survive as
    // the product pair, so Σμ drops by exactly 2 (both at `via`).
    g.nodes[a.u].occupancy -= 1;
    g.nodes[a.v].occupancy -= 1;
    g.nodes[b.u].occupancy -= 1;
    g.nodes[b.v].occupancy -= 1;
    a.pairs -= 1;
    b.pairs -= 1;
    if (a.pairs == 0) a.alive = false;
    if (b.pairs == 0) b.alive = false;
    ledger_push(g, MemoryEvent::SwapConsume, -2);

    LinkId out = g.find_link(outer_u, outer_v);
    if (out >= 0 && g.links[out].alive) {
        // Reuse the existing link; its fidelity takes the swap product
        // (single-fidelity-per-link model).
        g.links[out].fidelity = clamp(f_new, kFidelityFloor, 1.0);
        g.links[out].age = std::max(g.links[out].age, age_new);
        g.links[out].span = std::min(g.links[out].span, span_new);
    } else {
        LinkState nl;
        nl.u = outer_u;
        nl.v = outer_v;
        nl.fidelity = clamp(f_new, kFidelityFloor, 1.0);
        nl.decay_rate = gamma_new;
        nl.pur_gain = eta_new;
        nl.t2_ms = t2_new;
        nl.age = age_new;
        nl.span = span_new;
        nl.pairs = 0;
        nl.alive = true;
        nl.is_virtual = true;
        g.links.push_back(nl);
        out = static_cast<LinkId>(g.links.size()) - 1;
    }
    g.links[out].alive = true;
    g.links[out].pairs += 1;
    g.nodes[outer_u].occupancy += 1;
    g.nodes[outer_v].occupancy += 1;

    if (g.links[out].fidelity < g.params.kill_threshold) {
        // Swap product immediately below threshold: discard it.
        drop_pair(g, out, MemoryEvent::Release);
    }
    return out;
}

bool apply_entangle(NetworkGraph& g, LinkId link) {
    auto& l = g.links.at(link);
    if (l.is_virtual) throw Error(ErrorCode::INVALID_PARAM, "cannot regenerate a virtual link");
    if (g.nodes[l.u].occupancy >= g.nodes[l.u].memory_capacity ||
        g.nodes[l.v].occupancy >= g.nodes[l.v].memory_capacity)
        throw Error(ErrorCode::INVALID_PARAM, "no free memory slot for a new pair");
    const bool success = g.noise.bernoulli(g.params.p_entangle);
    if (!success) return false;
    const double f = g.noise.uniform(g.params.entangle_f_min, g.params.entangle_f_max);
    if (l.pairs == 0) {
        l.fidelity = f;
        l.age = 0;
    } else {
        // Additional pair on an already-live link: keep the link fidelity as
        // the running state (single-fidelity-per-link model).
        l.fidelity = std::max(l.fidelity, f);
    }
    l.alive = true;
    store_pair(g, link);
    return true;
}

void apply_release(NetworkGraph& g, LinkId link) {
    auto& l = g.links.at(link);
    if (l.pairs < 1) throw Error(ErrorCode::INVALID_PARAM, "no stored pair to release");
    drop_pair(g, link, MemoryEvent::Release);
}

double apply_delivery(NetworkGraph& g, LinkId link) {
    auto& l = g.links.at(link);
    if (l.pairs < 1) throw Error(ErrorCode::INVALID_PARAM, "no stored pair to deliver");
    const double f = l.fidelity;
    drop_pair(g, link, MemoryEvent::Delivery);
    return f;
}

void apply_adversary(NetworkGraph& g, const AdversaryConfig& cfg) {
    if (cfg.epsilon_adv < 0.0 || cfg.epsilon_adv >= 1.0)
        throw Error(ErrorCode::INVALID_PARAM, "epsilon_adv must lie in [0, 1)");
    if (cfg.target_selection == AdversaryTarget::None) return;

    std::vector<LinkId> targets;
    std::vector<LinkId> alive;
    for (LinkId i = 0; i < g.link_count(); ++i)
        if (g.links[i].alive) alive.push_back(i);
    if (alive.empty()) return;

    if (cfg.target_selection == AdversaryTarget::WorstLink) {
        // "Worst" from the network's perspective: the adversary hits the
        // highest-fidelity links to maximize damage.
        std::sort(alive.begin(), alive.end(), [&](LinkId a, LinkId b) {
            if (g.links[a].fidelity != g.links[b].fidelity)
                return g.links[a].fidelity > g.links[b].fidelity;
            return a < b;
        });
        for (int i = 0; i < cfg.n_link_targets && i < static_cast<int>(alive.size()); ++i)
            targets.push_back(alive[i]);
    } else {
        for (int i = 0; i < cfg.n_link_targets && !alive.empty(); ++i) {
            const auto k = g.noise.uniform_int(alive.size());
            targets.push_back(alive[k]);
            alive.erase(alive.begin() + static_cast<long>(k));
        }
    }

    for (LinkId t : targets) {
        auto& l = g.links[t];
        l.fidelity = clamp(l.fidelity * (1.0 - cfg.epsilon_adv), kFidelityFloor, 1.0);
        if (l.fidelity < g.params.kill_threshold) l.alive = false;
    }

    if (cfg.delta_mu_bound > 0.0) {
        const int bound = static_cast<int>(std::floor(cfg.delta_mu_bound));
        for (auto& n : g.nodes) {
            // Corrupts the occupancy *report* (classical side information),
            // not the stored qubits themselves; the memory ledger is physical.
            const int delta = static_cast<int>(g.noise.uniform_int(2 * bound + 1)) - bound;
            n.report_bias = delta;
        }
    }
}

std::vector<Request> generate_requests(const std::vector<std::vector<double>>& demand, int step,
                                       double min_fidelity, int deadline_steps, Rng& stream) {
    const std::size_t n = demand.size();
    std::vector<Request> out;
    for (std::size_t s = 0; s < n; ++s) {
        if (demand[s].size() != n) throw Error(ErrorCode::INVALID_DEMAND, "demand matrix not square");
        for (std::size_t d = 0; d < n; ++d) {
            const double lambda = demand[s][d];
            if (lambda < 0.0) throw Error(ErrorCode::INVALID_DEMAND, "negative demand entry");
            if (s == d || lambda == 0.0) continue;
            const int k = stream.poisson(lambda);
            for (int i = 0; i < k; ++i) {
                Request r;
                r.source = static_cast<NodeId>(s);
                r.destination = static_cast<NodeId>(d);
                r.min_fidelity = min_fidelity;
                r.issued_at = step;
                r.deadline = step + deadline_steps;
                out.push_back(r);
            }
        }
    }
    return out;
}

Observation observe(const NetworkGraph& g, const std::vector<LinkId>& touched, double g_flip,
                    double threshold, Rng& stream) {
    if (g_flip < 0.0 || g_flip >= 0.5)
        throw Error(ErrorCode::INVALID_PARAM, "g_flip must lie in [0, 0.5)");
    Observation obs;
    for (LinkId t : touched) {
        const auto& l = g.links.at(t);
        bool high = l.fidelity >= threshold;
        if (stream.bernoulli(g_flip)) high = !high;
        obs.symbols.push_back({t, high});
    }
    obs.reported_mu.reserve(g.nodes.size());
    obs.true_mu.reserve(g.nodes.size());
    for (const auto& n : g.nodes) {
        obs.true_mu.push_back(n.occupancy);
        obs.reported_mu.push_back(
            std::clamp(n.occupancy + n.report_bias, 0, n.memory_capacity));
    }
    obs.link_age.reserve(g.links.size());
    obs.link_pairs.reserve(g.links.size());
    for (const auto& l : g.links) {
        obs.link_age.push_back(l.alive ? l.age : -1);
        obs.link_pairs.push_back(l.pairs);
    }
    return obs;
}

bool action_feasible(const NetworkGraph& g, const Action& a, const std::vector<int>& mu_view) {
    auto pairs = [&](LinkId l) { return l >= 0 && l < g.link_count() ? g.links[l].pairs : 0; };
    switch (a.type) {
        case ActionType::Idle:
            return true;
        case ActionType::Entangle: {
            if (a.link_a < 0 || a.link_a >= g.link_count()) return false;
            const auto& l = g.links[a.link_a];
            if (l.is_virtual) return false;
            return mu_view[l.u] < g.nodes[l.u].memory_capacity &&
                   mu_view[l.v] < g.nodes[l.v].memory_capacity;
        }
        case ActionType::Purify:
            return a.link_a >= 0 && a.link_a < g.link_count() && g.links[a.link_a].alive &&
                   pairs(a.link_a) >= 2;
        case ActionType::Swap: {
            if (a.link_a < 0 || a.link_b < 0 || a.link_a == a.link_b) return false;
            if (a.link_a >= g.link_count() || a.link_b >= g.link_count()) return false;
            const auto& l1 = g.links[a.link_a];
            const auto& l2 = g.links[a.link_b];
            return l1.alive && l2.alive && l1.pairs >= 1 && l2.pairs >= 1 &&
                   l1.touches(a.via) && l2.touches(a.via);
        }
        case ActionType::Release:
            return a.link_a >= 0 && a.link_a < g.link_count() && pairs(a.link_a) >= 1;
    }
    return false;
}

ActionOutcome apply_action(NetworkGraph& g, const Action& a) {
    ActionOutcome out;
    if (!action_feasible(g, a, [&] {
            std::vector<int> mu(g.nodes.size());
            for (std::size_t i = 0; i < g.nodes.size(); ++i) mu[i] = g.nodes[i].occupancy;
            return mu;
        }())) {
        return out;  // infeasible against the true state: no-op
    }
    out.executed = true;
    switch (a.type) {
        case ActionType::Idle:
            break;
        case ActionType::Entangle:
            out.success = apply_entangle(g, a.link_a);
            out.touched.push_back(a.link_a);
            break;
        case ActionType::Purify:
            out.success = apply_purification(g, a.link_a);
            out.touched.push_back(a.link_a);
            break;
        case ActionType::Swap:
            out.new_link = apply_swap(g, a.link_a, a.link_b, a.via);
            out.success = true;
            out.touched.push_back(a.link_a);
            out.touched.push_back(a.link_b);
            if (out.new_link >= 0 && g.links[out.new_link].alive) out.touched.push_back(out.new_link);
            break;
        case ActionType::Release:
            apply_release(g, a.link_a);
            out.success = true;
            break;
    }
    return out;
}

std::vector<Action> enumerate_actions(const NetworkGraph& g, const std::vector<int>& mu_view) {
    std::vector<Action> out;
    out.push_back(Action{});  // idle is always feasible
    for (LinkId l = 0; l < g.link_count(); ++l) {
        Action a;
        a.type = ActionType::Entangle;
        a.link_a = l;
        if (action_feasible(g, a, mu_view)) out.push_back(a);
    }
    for (LinkId l = 0; l < g.link_count(); ++l) {
        Action a;
        a.type = ActionType::Purify;
        a.link_a = l;
        if (action_feasible(g, a, mu_view)) out.push_back(a);
    }
    for (LinkId l1 = 0; l1 < g.link_count(); ++l1) {
        if (!g.links[l1].alive || g.links[l1].pairs < 1) continue;
        for (LinkId l2 = l1 + 1; l2 < g.link_count(); ++l2) {
            if (!g.links[l2].alive || g.links[l2].pairs < 1) continue;
            for (NodeId via : {g.links[l1].u, g.links[l1].v}) {
                if (!g.links[l2].touches(via)) continue;
                // Skip swaps that would merely rebuild a parallel pair between
                // the same endpoints.
                if (g.links[l1].other(via) == g.links[l2].other(via)) continue;
                Action a;
                a.type = ActionType::Swap;
                a.link_a = l1;
                a.link_b = l2;
                a.via = via;
                if (action_feasible(g, a, mu_view)) out.push_back(a);
                break;
            }
        }
    }
    for (LinkId l = 0; l < g.link_count(); ++l) {
        Action a;
        a.type = ActionType::Release;
        a.link_a = l;
        if (action_feasible(g, a, mu_view)) out.push_back(a);
    }
    return out;
}

bool audit_memory(const NetworkGraph& g, int initial_occupancy, std::string* why) {
    const auto recomputed = g.recomputed_occupancy();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (recomputed[i] != g.nodes[i].occupancy) {
            if (why) *why = "stored occupancy diverges from pair recount at node " + std::to_string(i);
            return false;
        }
        if (g.nodes[i].occupancy < 0 || g.nodes[i].occupancy > g.nodes[i].memory_capacity) {
            if (why) *why = "occupancy outside [0, capacity] at node " + std::to_string(i);
            return false;
        }
    }
    int delta = 0;
    for (const auto& e : g.ledger) delta += e.delta;
    if (initial_occupancy + delta != g.total_occupancy()) {
        if (why) *why = "ledger deltas do not account for the occupancy change";
        return false;
    }
    return true;
}

}  // namespace qroute::netmodel
