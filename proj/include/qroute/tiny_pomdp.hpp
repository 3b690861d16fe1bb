#pragma once

#include <cstdint>
#include <vector>

#include "qroute/mathutil.hpp"
#include "qroute/rng.hpp"

namespace qroute::planner::tiny {

// Small finite POMDP solved exactly (up to grid discretization) by dense value
// iteration over the belief simplex. This is the brute-force oracle behind the
// aggregation / estimation / hybrid bound checks.
struct TinyPomdp {
    int n_states = 0;
    int n_actions = 0;
    int n_obs = 0;
    Vec trans;    // [a][s][s']
    Vec obs;      // [a][s'][o]
    Vec reward;   // [s][a], in [0, r_max]
    double gamma = 0.9;

    double t(int a, int s, int s2) const {
        return trans[(static_cast<std::size_t>(a) * n_states + s) * n_states + s2];
    }
    double z(int a, int s2, int o) const {
        return obs[(static_cast<std::size_t>(a) * n_states + s2) * n_obs + o];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    double r_max() const;
};

// Uniformly random instance with rewards in [0, 1]; observation channels are
// biased enough to be informative.
TinyPomdp random_instance(Rng& rng, int n_states, int n_actions, int n_obs, double gamma);

// Regular grid over the probability simplex: all compositions of `resolution`
// into n_states parts, normalized.
struct BeliefGrid {
    int n_states = 0;
    int resolution = 0;
    std::vector<Vec> points;

    int size() const { return static_cast<int>(points.size()); }
    // Euclidean nearest grid point (ties toward the lowest index).
    int nearest(const Vec& b) const;
};

BeliefGrid make_grid(int n_states, int resolution);

// Exact Bayes update for the tiny model. Returns an empty vector when the
// observation has zero probability under (b, a).
Vec belief_update(const TinyPomdp& p, const Vec& b, int a, int o);

// Pre-expanded grid dynamics plus the optimal value on the grid.
struct SolvedGrid {
    BeliefGrid grid;
    Vec v_star;            // optimal value per grid point
    Vec q_star;            // [i][a]
    Vec reward;            // [i][a] expected immediate reward
    std::vector<int> succ; // [i][a][o] successor grid index (-1: impossible obs)
    Vec obs_prob;          // [i][a][o]
    int n_actions = 0;
    int n_obs = 0;

    int succ_at(int i, int a, int o) const {
        return succ[(static_cast<std::size_t>(i) * n_actions + a) * n_obs + o];
    }
    double prob_at(int i, int a, int o) const {
        return obs_prob[(static_cast<std::size_t>(i) * n_actions + a) * n_obs + o];
    }
    double r_at(int i, int a) const { return reward[static_cast<std::size_t>(i) * n_actions + a]; }
};

SolvedGrid solve(const TinyPomdp& p, int resolution, double tol = 1e-12);

// Value of a stochastic policy given per-grid-point action distributions.
Vec evaluate_policy(const TinyPomdp& p, const SolvedGrid& s, const std::vector<Vec>& policy,
                    double tol = 1e-12);

// Greedy (argmax_a Q*) action per grid point.
std::vector<int> greedy_actions(const SolvedGrid& s);

}  // namespace qroute::planner::tiny
