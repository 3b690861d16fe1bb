#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/aggregate.hpp"
#include "qroute/mathutil.hpp"
#include "qroute/tiny_pomdp.hpp"

namespace qroute::planner {

// Cluster-level MDP estimated from rollouts. Transitions carry Laplace
// smoothing (alpha = 1); (q, a) pairs never visited get a self-loop with
// reward 0 and are flagged.
struct AggregatedMDP {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.95;
    Vec trans;                 // [q][a][q']
    Vec reward;                // [q][a]
    std::vector<char> visited; // [q][a]

    double p(int q, int a, int q2) const {
        return trans[(static_cast<std::size_t>(q) * n_actions + a) * n_states + q2];
    }
    double r(int q, int a) const { return reward[static_cast<std::size_t>(q) * n_actions + a]; }
    bool seen(int q, int a) const { return visited[static_cast<std::size_t>(q) * n_actions + a] != 0; }
};

struct RolloutSample {
    Vec features;       // φ(b)
    int action = 0;
    double reward = 0.0;
    Vec next_features;  // φ(b')
};

AggregatedMDP build_cluster_mdp(const aggregate::ClusterSet& clusters,
                                const std::vector<RolloutSample>& rollouts, int n_actions,
                                double gamma);

struct ValueTable {
    Vec v;   // length K
    Vec q;   // K x |A|
    int iterations = 0;
    double residual = 0.0;
    Vec residual_history;

    double q_at(int s, int a, int n_actions) const {
        return q[static_cast<std::size_t>(s) * n_actions + a];
    }
};

// Sup-norm value iteration; throws NONCONVERGENCE past 1e5 sweeps (only
// reachable through non-finite inputs, since the operator is a contraction).
ValueTable value_iteration(const AggregatedMDP& m, double tol);

// Softmax over Q[q, .] at temperature t_softmax; strictly positive everywhere
// so downstream KL terms stay finite.
Vec policy_from_q(const ValueTable& vt, int cluster, int n_actions, double t_softmax);

Vec pomdp_policy(const ValueTable& vt, const aggregate::ClusterSet& clusters,
                 const Vec& features, int n_actions, double t_softmax);

std::string to_json(const AggregatedMDP& m);
std::string to_json(const ValueTable& vt, int n_actions);

// ---------------------------------------------------------------------------
// Numerical checks of the aggregation guarantees on exactly solved instances.

struct AggregationBoundRow {
    int k = 0;
    double eps = 0.0;       // covering radius w.r.t. cluster prototypes
    double l_v = 0.0;       // measured value Lipschitz constant over the grid
    double error = 0.0;     // ||V* - V~||_inf over the grid
    double bound = 0.0;     // L_V eps / (1 - gamma) + slack
    double margin = 0.0;    // bound - error
    bool pass = false;
};

// Clusters the solved belief grid at each requested K (centers snapped to
// grid prototypes), solves the cluster-level fixed point, and compares the
// sup error against L_V eps / (1 - gamma).
std::vector<AggregationBoundRow> check_aggregation_bound(const tiny::TinyPomdp& p,
                                                         const std::vector<int>& k_values,
                                                         int resolution, std::uint64_t seed,
                                                         double slack = 1e-6);

struct PropagationRow {
    double eps_est = 0.0;     // requested perturbation level (L1)
    double worst_violation = 0.0;  // max over samples of error - bound (<= 0 passes)
    double max_error = 0.0;
    bool pass = false;
};

// Perturbs grid beliefs by total-variation eps_est, re-evaluates the clustered
// value at the perturbed belief and checks
//   |V*(b) - V~(b_hat)| <= L_V L_phi eps_est/(1-gamma) + L_V eps/(1-gamma) + slack.
std::vector<PropagationRow> check_estimation_propagation(const tiny::TinyPomdp& p, int k,
                                                         const std::vector<double>& eps_levels,
                                                         int resolution, int n_samples,
                                                         std::uint64_t seed, double slack = 1e-6);

// Directional probe of the factored-belief error: on a two-link hidden state,
// the value loss from projecting beliefs onto product form must be strictly
// larger under maximal correlation than under independence.
struct EntanglementProbeResult {
    double correlated_error = 0.0;
    double independent_error = 0.0;
};
EntanglementProbeResult entanglement_error_probe(std::uint64_t seed);

}  // namespace qroute::planner
