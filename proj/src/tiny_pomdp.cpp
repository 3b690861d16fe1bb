#include "qroute/tiny_pomdp.hpp"

#include <cmath>

#include "qroute/error.hpp"

namespace qroute::planner::tiny {

double TinyPomdp::r_max() const {
    double m = 0.0;
    for (double x : reward) m = std::max(m, std::fabs(x));
    return m;
}

TinyPomdp random_instance(Rng& rng, int n_states, int n_actions, int n_obs, double gamma) {
    TinyPomdp p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.n_obs = n_obs;
    p.gamma = gamma;
    p.trans.resize(static_cast<std::size_t>(n_actions) * n_states * n_states);
    p.obs.resize(static_cast<std::size_t>(n_actions) * n_states * n_obs);
    p.reward.resize(static_cast<std::size_t>(n_states) * n_actions);

    for (int a = 0; a < n_actions; ++a)
        for (int s = 0; s < n_states; ++s) {
            double z = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double w = rng.uniform(0.05, 1.0);
                if (s2 == (s + a) % n_states) w += 2.0;  // give each action structure
                p.trans[(static_cast<std::size_t>(a) * n_states + s) * n_states + s2] = w;
                z += w;
            }
            for (int s2 = 0; s2 < n_states; ++s2)
                p.trans[(static_cast<std::size_t>(a) * n_states + s) * n_states + s2] /= z;
        }
    for (int a = 0; a < n_actions; ++a)
        for (int s2 = 0; s2 < n_states; ++s2) {
            double z = 0.0;
            for (int o = 0; o < n_obs; ++o) {
                double w = rng.uniform(0.05, 1.0);
                if (o == s2 % n_obs) w += 3.0;  // informative channel
                p.obs[(static_cast<std::size_t>(a) * n_states + s2) * n_obs + o] = w;
                z += w;
            }
            for (int o = 0; o < n_obs; ++o)
                p.obs[(static_cast<std::size_t>(a) * n_states + s2) * n_obs + o] /= z;
        }
    for (double& x : p.reward) x = rng.uniform(0.0, 1.0);
    return p;
}

int BeliefGrid::nearest(const Vec& b) const {
    int best = 0;
    double bd = l2_distance(points[0], b);
    for (int i = 1; i < size(); ++i) {
        const double d = l2_distance(points[i], b);
        if (d < bd - 1e-15) {
            bd = d;
            best = i;
        }
    }
    return best;
}

namespace {

void compositions(int slots, int total, Vec& scratch, int idx, int left,
                  std::vector<Vec>& out, int resolution) {
    if (idx == slots - 1) {
        scratch[idx] = static_cast<double>(left) / resolution;
        out.push_back(scratch);
        return;
    }
    for (int k = 0; k <= left; ++k) {
        scratch[idx] = static_cast<double>(k) / resolution;
        compositions(slots, total, scratch, idx + 1, left - k, out, resolution);
    }
}

}  // namespace

BeliefGrid make_grid(int n_states, int resolution) {
    BeliefGrid g;
    g.n_states = n_states;
    g.resolution = resolution;
    Vec scratch(n_states, 0.0);
    compositions(n_states, resolution, scratch, 0, resolution, g.points, resolution);
    return g;
}

Vec belief_update(const TinyPomdp& p, const Vec& b, int a, int o) {
    Vec next(p.n_states, 0.0);
    double z = 0.0;
    for (int s2 = 0; s2 < p.n_states; ++s2) {
        double pred = 0.0;
        for (int s = 0; s < p.n_states; ++s) pred += p.t(a, s, s2) * b[s];
        next[s2] = pred * p.z(a, s2, o);
        z += next[s2];
    }
    if (z <= 0.0) return {};
    for (double& x : next) x /= z;
    return next;
}

SolvedGrid solve(const TinyPomdp& p, int resolution, double tol) {
    SolvedGrid s;
    s.grid = make_grid(p.n_states, resolution);
    s.n_actions = p.n_actions;
    s.n_obs = p.n_obs;
    const int n = s.grid.size();
    s.reward.assign(static_cast<std::size_t>(n) * p.n_actions, 0.0);
    s.succ.assign(static_cast<std::size_t>(n) * p.n_actions * p.n_obs, -1);
    s.obs_prob.assign(static_cast<std::size_t>(n) * p.n_actions * p.n_obs, 0.0);

    for (int i = 0; i < n; ++i) {
        const Vec& b = s.grid.points[i];
        for (int a = 0; a < p.n_actions; ++a) {
            double r = 0.0;
            for (int st = 0; st < p.n_states; ++st) r += b[st] * p.r(st, a);
            s.reward[static_cast<std::size_t>(i) * p.n_actions + a] = r;
            for (int o = 0; o < p.n_obs; ++o) {
                double prob = 0.0;
                for (int s2 = 0; s2 < p.n_states; ++s2) {
                    double pred = 0.0;
                    for (int st = 0; st < p.n_states; ++st) pred += p.t(a, st, s2) * b[st];
                    prob += pred * p.z(a, s2, o);
                }
                const std::size_t idx =
                    (static_cast<std::size_t>(i) * p.n_actions + a) * p.n_obs + o;
                s.obs_prob[idx] = prob;
                if (prob > 1e-14) {
                    const Vec nb = belief_update(p, b, a, o);
                    s.succ[idx] = s.grid.nearest(nb);
                }
            }
        }
    }

    s.v_star.assign(n, 0.0);
    s.q_star.assign(static_cast<std::size_t>(n) * p.n_actions, 0.0);
    Vec next(n, 0.0);
    for (int iter = 0; iter < 200000; ++iter) {
        double residual = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = -1e300;
            for (int a = 0; a < p.n_actions; ++a) {
                double q = s.r_at(i, a);
                for (int o = 0; o < p.n_obs; ++o) {
                    const int j = s.succ_at(i, a, o);
                    if (j >= 0) q += p.gamma * s.prob_at(i, a, o) * s.v_star[j];
                }
                s.q_star[static_cast<std::size_t>(i) * p.n_actions + a] = q;
                best = std::max(best, q);
            }
            next[i] = best;
            residual = std::max(residual, std::fabs(next[i] - s.v_star[i]));
        }
        s.v_star.swap(next);
        if (residual < tol) return s;
    }
    throw Error(ErrorCode::NONCONVERGENCE, "tiny POMDP grid value iteration did not converge");
}

Vec evaluate_policy(const TinyPomdp& p, const SolvedGrid& s, const std::vector<Vec>& policy,
                    double tol) {
    const int n = s.grid.size();
    Vec v(n, 0.0), next(n, 0.0);
    for (int iter = 0; iter < 200000; ++iter) {
        double residual = 0.0;
        for (int i = 0; i < n; ++i) {
            double val = 0.0;
            for (int a = 0; a < p.n_actions; ++a) {
                const double w = policy[i][a];
                if (w == 0.0) continue;
                double q = s.r_at(i, a);
                for (int o = 0; o < p.n_obs; ++o) {
                    const int j = s.succ_at(i, a, o);
                    if (j >= 0) q += p.gamma * s.prob_at(i, a, o) * v[j];
                }
                val += w * q;
            }
            next[i] = val;
            residual = std::max(residual, std::fabs(next[i] - v[i]));
        }
        v.swap(next);
        if (residual < tol) return v;
    }
    throw Error(ErrorCode::NONCONVERGENCE, "policy evaluation did not converge");
}

std::vector<int> greedy_actions(const SolvedGrid& s) {
    const int n = s.grid.size();
    std::vector<int> acts(n, 0);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int a = 1; a < s.n_actions; ++a)
            if (s.q_star[static_cast<std::size_t>(i) * s.n_actions + a] >
                s.q_star[static_cast<std::size_t>(i) * s.n_actions + best])
                best = a;
        acts[i] = best;
    }
    return acts;
}

}  // namespace qroute::planner::tiny
