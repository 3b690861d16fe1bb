#include "qroute/planner.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "qroute/error.hpp"
#include "qroute/rng.hpp"

namespace qroute::planner {

AggregatedMDP build_cluster_mdp(const aggregate::ClusterSet& clusters,
                                const std::vector<RolloutSample>& rollouts, int n_actions,
                                double gamma) {
    if (rollouts.empty()) throw Error(ErrorCode::EMPTY_ROLLOUTS, "no rollouts to estimate from");
    if (gamma <= 0.0 || gamma >= 1.0)
        throw Error(ErrorCode::INVALID_PARAM, "gamma must lie in (0, 1)");
    const int k = clusters.k();
    AggregatedMDP m;
    m.n_states = k;
    m.n_actions = n_actions;
    m.gamma = gamma;
    std::vector<double> counts(static_cast<std::size_t>(k) * n_actions * k, 0.0);
    std::vector<double> reward_sum(static_cast<std::size_t>(k) * n_actions, 0.0);
    std::vector<double> totals(static_cast<std::size_t>(k) * n_actions, 0.0);

    for (const auto& s : rollouts) {
        const int q = aggregate::assign(clusters, s.features);
        const int q2 = aggregate::assign(clusters, s.next_features);
        counts[(static_cast<std::size_t>(q) * n_actions + s.action) * k + q2] += 1.0;
        reward_sum[static_cast<std::size_t>(q) * n_actions + s.action] += s.reward;
        totals[static_cast<std::size_t>(q) * n_actions + s.action] += 1.0;
    }

    m.trans.assign(static_cast<std::size_t>(k) * n_actions * k, 0.0);
    m.reward.assign(static_cast<std::size_t>(k) * n_actions, 0.0);
    m.visited.assign(static_cast<std::size_t>(k) * n_actions, 0);
    for (int q = 0; q < k; ++q)
        for (int a = 0; a < n_actions; ++a) {
            const std::size_t qa = static_cast<std::size_t>(q) * n_actions + a;
            if (totals[qa] > 0.0) {
                m.visited[qa] = 1;
                m.reward[qa] = reward_sum[qa] / totals[qa];
                const double denom = totals[qa] + k;  // Laplace alpha = 1
                for (int q2 = 0; q2 < k; ++q2)
                    m.trans[qa * k + q2] = (counts[qa * k + q2] + 1.0) / denom;
            } else {
                m.trans[qa * k + q] = 1.0;  // flagged self-loop, reward 0
            }
        }
    return m;
}

ValueTable value_iteration(const AggregatedMDP& m, double tol) {
    if (m.gamma <= 0.0 || m.gamma >= 1.0)
        throw Error(ErrorCode::INVALID_PARAM, "gamma must lie in (0, 1)");
    if (tol <= 0.0) throw Error(ErrorCode::INVALID_PARAM, "tolerance must be positive");
    ValueTable vt;
    vt.v.assign(m.n_states, 0.0);
    vt.q.assign(static_cast<std::size_t>(m.n_states) * m.n_actions, 0.0);
    Vec next(m.n_states, 0.0);
    constexpr int kMaxIters = 100000;
    for (int iter = 1; iter <= kMaxIters; ++iter) {
        double residual = 0.0;
        for (int s = 0; s < m.n_states; ++s) {
            double best = -1e300;
            for (int a = 0; a < m.n_actions; ++a) {
                double q = m.r(s, a);
                for (int s2 = 0; s2 < m.n_states; ++s2) {
                    const double p = m.p(s, a, s2);
                    if (p > 0.0) q += m.gamma * p * vt.v[s2];
                }
                if (!std::isfinite(q))
                    throw Error(ErrorCode::NONCONVERGENCE, "non-finite value encountered");
                vt.q[static_cast<std::size_t>(s) * m.n_actions + a] = q;
                best = std::max(best, q);
            }
            next[s] = best;
            residual = std::max(residual, std::fabs(next[s] - vt.v[s]));
        }
        vt.v = next;
        vt.iterations = iter;
        vt.residual = residual;
        vt.residual_history.push_back(residual);
        if (residual < tol) return vt;
    }
    throw Error(ErrorCode::NONCONVERGENCE, "value iteration hit the sweep cap");
}

Vec policy_from_q(const ValueTable& vt, int cluster, int n_actions, double t_softmax) {
    if (t_softmax <= 0.0) throw Error(ErrorCode::INVALID_PARAM, "temperature must be positive");
    Vec logits(n_actions);
    for (int a = 0; a < n_actions; ++a) logits[a] = vt.q_at(cluster, a, n_actions) / t_softmax;
    return softmax(logits);
}

Vec pomdp_policy(const ValueTable& vt, const aggregate::ClusterSet& clusters,
                 const Vec& features, int n_actions, double t_softmax) {
    return policy_from_q(vt, aggregate::assign(clusters, features), n_actions, t_softmax);
}

std::string to_json(const AggregatedMDP& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["gamma"] = m.gamma;
    j["trans"] = m.trans;
    j["reward"] = m.reward;
    j["visited"] = m.visited;
    return j.dump();
}

std::string to_json(const ValueTable& vt, int n_actions) {
    nlohmann::json j;
    j["version"] = 1;
    j["n_actions"] = n_actions;
    j["v"] = vt.v;
    j["q"] = vt.q;
    j["iterations"] = vt.iterations;
    j["residual"] = vt.residual;
    return j.dump();
}

// ---------------------------------------------------------------------------

namespace {

// Measured Lipschitz constant of V* w.r.t. the feature embedding (here the
// belief coordinates themselves) over all grid pairs.
double measure_l_v(const tiny::SolvedGrid& s) {
    double l_v = 0.0;
    const int n = s.grid.size();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = l2_distance(s.grid.points[i], s.grid.points[j]);
            if (d < 1e-12) continue;
            l_v = std::max(l_v, std::fabs(s.v_star[i] - s.v_star[j]) / d);
        }
    return l_v;
}

double measure_l_phi(const tiny::SolvedGrid& s) {
    double l_phi = 0.0;
    const int n = s.grid.size();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double l1 = l1_distance(s.grid.points[i], s.grid.points[j]);
            if (l1 < 1e-12) continue;
            l_phi = std::max(l_phi, l2_distance(s.grid.points[i], s.grid.points[j]) / l1);
        }
    return l_phi;
}

struct PrototypeClustering {
    std::vector<int> prototype;  // cluster -> grid index
    std::vector<int> member;     // grid index -> cluster
    double eps = 0.0;            // max distance grid point -> its prototype
};

// K-means over the grid, centers snapped to their nearest grid point so each
// cluster owns a concrete prototypical belief (as the analysis assumes).
PrototypeClustering prototype_clusters(const tiny::SolvedGrid& s, int k, std::uint64_t seed) {
    const auto& pts = s.grid.points;
    auto km = aggregate::cluster(pts, k, seed);
    PrototypeClustering pc;
    pc.prototype.resize(km.k());
    for (int q = 0; q < km.k(); ++q) pc.prototype[q] = s.grid.nearest(km.centers[q]);
    pc.member.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        int best = 0;
        double bd = l2_distance(pts[i], pts[pc.prototype[0]]);
        for (int q = 1; q < km.k(); ++q) {
            const double d = l2_distance(pts[i], pts[pc.prototype[q]]);
            if (d < bd - 1e-15) {
                bd = d;
                best = q;
            }
        }
        pc.member[i] = best;
        pc.eps = std::max(pc.eps, bd);
    }
    return pc;
}

// Fixed point of the cluster-level Bellman equation driven by prototypes.
Vec solve_clustered(const tiny::TinyPomdp& p, const tiny::SolvedGrid& s,
                    const PrototypeClustering& pc) {
    const int k = static_cast<int>(pc.prototype.size());
    Vec v(k, 0.0), next(k, 0.0);
    for (int iter = 0; iter < 200000; ++iter) {
        double residual = 0.0;
        for (int q = 0; q < k; ++q) {
            const int proto = pc.prototype[q];
            double best = -1e300;
            for (int a = 0; a < p.n_actions; ++a) {
                double val = s.r_at(proto, a);
                for (int o = 0; o < p.n_obs; ++o) {
                    const int j = s.succ_at(proto, a, o);
                    if (j >= 0) val += p.gamma * s.prob_at(proto, a, o) * v[pc.member[j]];
                }
                best = std::max(best, val);
            }
            next[q] = best;
            residual = std::max(residual, std::fabs(next[q] - v[q]));
        }
        v.swap(next);
        if (residual < 1e-12) return v;
    }
    throw Error(ErrorCode::NONCONVERGENCE, "clustered value iteration did not converge");
}

}  // namespace

std::vector<AggregationBoundRow> check_aggregation_bound(const tiny::TinyPomdp& p,
                                                         const std::vector<int>& k_values,
                                                         int resolution, std::uint64_t seed,
                                                         double slack) {
    const auto s = tiny::solve(p, resolution);
    const double l_v = measure_l_v(s);
    std::vector<AggregationBoundRow> rows;
    for (int k : k_values) {
        const int k_eff = std::min<int>(k, s.grid.size());
        const auto pc = prototype_clusters(s, k_eff, derive_seed(seed, k));
        const auto v_clustered = solve_clustered(p, s, pc);
        double err = 0.0;
        for (int i = 0; i < s.grid.size(); ++i)
            err = std::max(err, std::fabs(s.v_star[i] - v_clustered[pc.member[i]]));
        AggregationBoundRow row;
        row.k = k_eff;
        row.eps = pc.eps;
        row.l_v = l_v;
        row.error = err;
        row.bound = l_v * pc.eps / (1.0 - p.gamma) + slack;
        row.margin = row.bound - err;
        row.pass = err <= row.bound;
        rows.push_back(row);
    }
    return rows;
}

std::vector<PropagationRow> check_estimation_propagation(const tiny::TinyPomdp& p, int k,
                                                         const std::vector<double>& eps_levels,
                                                         int resolution, int n_samples,
                                                         std::uint64_t seed, double slack) {
    const auto s = tiny::solve(p, resolution);
    const double l_v = measure_l_v(s);
    const double l_phi = measure_l_phi(s);
    const int k_eff = std::min<int>(k, s.grid.size());
    const auto pc = prototype_clusters(s, k_eff, derive_seed(seed, 1));
    const auto v_clustered = solve_clustered(p, s, pc);
    const double agg_term = l_v * pc.eps / (1.0 - p.gamma);

    Rng rng(derive_seed(seed, 2));
    std::vector<PropagationRow> rows;
    for (double eps : eps_levels) {
        PropagationRow row;
        row.eps_est = eps;
        double worst = -1e300;
        double max_err = 0.0;
        for (int n = 0; n < n_samples; ++n) {
            const int i = static_cast<int>(rng.uniform_int(s.grid.size()));
            Vec b = s.grid.points[i];
            // move mass between two coordinates, then snap back onto the grid
            const int from = static_cast<int>(rng.uniform_int(p.n_states));
            const int to = static_cast<int>(rng.uniform_int(p.n_states));
            const double amount = std::min(b[from], rng.uniform(0.0, eps / 2.0));
            b[from] -= amount;
            b[to] += amount;
            const int j = s.grid.nearest(b);
            const double actual_eps = l1_distance(s.grid.points[i], s.grid.points[j]);
            if (actual_eps > eps) continue;  // the snap overshot the requested level
            const double err = std::fabs(s.v_star[i] - v_clustered[pc.member[j]]);
            const double bound = l_v * l_phi * actual_eps / (1.0 - p.gamma) + agg_term + slack;
            max_err = std::max(max_err, err);
            worst = std::max(worst, err - bound);
        }
        row.worst_violation = worst;
        row.max_error = max_err;
        row.pass = worst <= 0.0;
        rows.push_back(row);
    }
    return rows;
}

EntanglementProbeResult entanglement_error_probe(std::uint64_t seed) {
    // Two binary links: joint hidden state (F1, F2) in {lo, hi}^2, states
    // indexed s = 2*f1 + f2. Action 0 probes link 1 (informative observation,
    // no reward); action 1 consumes link 2 (reward iff F2 = hi); action 2
    // idles. Static dynamics, so correlation carries real decision value.
    tiny::TinyPomdp p;
    p.n_states = 4;
    p.n_actions = 3;
    p.n_obs = 2;
    p.gamma = 0.9;
    p.trans.assign(3 * 4 * 4, 0.0);
    for (int a = 0; a < 3; ++a)
        for (int s = 0; s < 4; ++s) p.trans[(a * 4 + s) * 4 + s] = 1.0;
    p.obs.assign(3 * 4 * 2, 0.0);
    const double g_flip = 0.1;
    for (int s2 = 0; s2 < 4; ++s2) {
        const int f1 = s2 / 2;
        // probe reads link 1
        p.obs[(0 * 4 + s2) * 2 + 1] = f1 == 1 ? 1.0 - g_flip : g_flip;
        p.obs[(0 * 4 + s2) * 2 + 0] = f1 == 1 ? g_flip : 1.0 - g_flip;
        // other actions are uninformative
        for (int a = 1; a < 3; ++a)
            for (int o = 0; o < 2; ++o) p.obs[(a * 4 + s2) * 2 + o] = 0.5;
    }
    p.reward.assign(4 * 3, 0.0);
    for (int s = 0; s < 4; ++s) {
        const int f2 = s % 2;
        p.reward[s * 3 + 1] = f2 == 1 ? 1.0 : -0.6;  // consuming a bad pair hurts
    }

    const auto solved = tiny::solve(p, 8);

    auto factored_error = [&](const Vec& b) {
        // project onto the product of marginals
        const double p1 = b[2] + b[3];
        const double p2 = b[1] + b[3];
        Vec prod{(1 - p1) * (1 - p2), (1 - p1) * p2, p1 * (1 - p2), p1 * p2};
        const int bi = solved.grid.nearest(b);
        const int pi = solved.grid.nearest(prod);
        return std::fabs(solved.v_star[bi] - solved.v_star[pi]);
    };

    EntanglementProbeResult res;
    Rng rng(seed);
    // correlated prior: mass only on (lo,lo) and (hi,hi)
    for (int trial = 0; trial < 50; ++trial) {
        const double w = rng.uniform(0.2, 0.8);
        res.correlated_error = std::max(res.correlated_error,
                                        factored_error(Vec{1.0 - w, 0.0, 0.0, w}));
        // independent prior with the same marginals
        const double q1 = w, q2 = w;
        res.independent_error =
            std::max(res.independent_error,
                     factored_error(Vec{(1 - q1) * (1 - q2), (1 - q1) * q2, q1 * (1 - q2), q1 * q2}));
    }
    return res;
}

}  // namespace qroute::planner
