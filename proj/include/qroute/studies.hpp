#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/episode.hpp"
#include "qroute/train.hpp"

namespace qroute::harness {

// Runs n_seeds episodes in parallel (per-episode seeded streams keep results
// independent of the thread schedule).
std::vector<EpisodeSummary> run_many(const Scenario& sc, const PolicyBundle& bundle,
                                     PolicyKind kind, int n_seeds, const RunOptions& opt = {},
                                     int threads = 2);

// ---------------------------------------------------------------------------
struct AblationRow {
    std::string variant;
    double mean_fidelity = 0.0;
    double std_fidelity = 0.0;
    double mean_delivery = 0.0;
    int seeds = 0;
};

struct AblationResult {
    std::vector<AblationRow> rows;  // full, no_pomdp, fixed_alpha, no_gnn
    bool ordering_holds = false;    // full > no_pomdp > fixed_alpha > no_gnn
    bool inconclusive = false;      // degenerate config: all variants identical
};

AblationResult run_ablation(const Scenario& sc, const PolicyBundle& bundle, int n_seeds);

// ---------------------------------------------------------------------------
// Non-stationary drift study on the scenario's link-level decision process:
// fidelity bins + an empty state, actions {idle, purify, deliver/regenerate},
// transitions from the filter's decay kernels at the drifting decay rate.
// The oracle re-solves the MDP every step; the executed policy stays frozen
// at the initial parameters.

struct RegretTrace {
    double delta = 0.0;
    Vec instantaneous;        // per-step regret (>= 0)
    Vec cumulative;           // exact prefix sums
    double total = 0.0;       // R_T
    double l_f_hat = 0.0;     // measured Lipschitz constant of the operator in Gamma
    double max_value_step = 0.0;   // max ||V_t - V_{t-1}||_inf
    double stability_bound = 0.0;  // gamma L_F R_max delta / (1-gamma)^2 + slack
    bool stability_ok = false;
};

struct DriftStudy {
    std::vector<RegretTrace> traces;
    LinearFit fit;            // R_T against delta * T
};

DriftStudy run_drift_study(const Scenario& sc, const std::vector<double>& deltas, int horizon,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
struct SweepRow {
    std::string policy;
    double x = 0.0;            // demand rate / network size / epsilon
    double delivery_rate = 0.0;
    double avg_fidelity = 0.0;
    double decision_ms = 0.0;  // median per-step decision time
    double mem_pct = 0.0;
};

std::vector<SweepRow> sweep_demand(const Scenario& sc, const PolicyBundle& bundle,
                                   const std::vector<PolicyKind>& policies,
                                   const std::vector<double>& demand_rates, int n_seeds);

// Network-size sweep; the graph policy transfers across sizes, the planner is
// re-estimated per size (cheap) with `planner_seed`.
std::vector<SweepRow> sweep_size(const Scenario& sc, const PolicyBundle& bundle,
                                 const std::vector<PolicyKind>& policies,
                                 const std::vector<int>& sizes, int n_seeds,
                                 std::uint64_t planner_seed);

struct AdversaryImpact {
    std::string policy;
    double clean_fidelity = 0.0;
    double attacked_fidelity = 0.0;
    double relative_drop = 0.0;  // (clean - attacked) / clean
    double clean_delivery = 0.0;
    double attacked_delivery = 0.0;
};

std::vector<AdversaryImpact> adversary_sweep(const Scenario& sc, const PolicyBundle& bundle,
                                             const std::vector<PolicyKind>& policies,
                                             double epsilon, int n_seeds);

// ---------------------------------------------------------------------------
struct ScalabilityRow {
    int n_nodes = 0;
    double mean_decision_ms = 0.0;  // measured E[C_hybrid]
    double c_gnn_ms = 0.0;          // mean learned-policy cost per step
    double c_pomdp_ms = 0.0;        // mean planner cost per call
    double alpha_bar = 0.0;
    double planner_call_fraction = 0.0;
    double predicted_ms = 0.0;      // (1 - alpha_bar) C_POMDP + C_GNN
    double relative_error = 0.0;
    bool within_tolerance = false;  // 15%
};

std::vector<ScalabilityRow> scalability_decomposition(const Scenario& sc,
                                                      const PolicyBundle& bundle,
                                                      const std::vector<int>& sizes, int n_seeds,
                                                      std::uint64_t planner_seed);

// ---------------------------------------------------------------------------
std::vector<hybrid::AlphaStats> feasibility_stats(const Scenario& sc, const PolicyBundle& bundle,
                                                  const std::vector<double>& alphas, int n_seeds);

// ---------------------------------------------------------------------------
struct BeliefErrorRow {
    int n_nodes = 0;
    double gamma_scale = 0.0;
    double mean_belief_error = 0.0;
};
std::vector<BeliefErrorRow> belief_error_sweep(const Scenario& sc, const PolicyBundle& bundle,
                                               const std::vector<int>& sizes,
                                               const std::vector<double>& gamma_scales, int n_seeds,
                                               std::uint64_t planner_seed);

struct FeatureDimRow {
    int feature_dim = 0;
    int memory_capacity = 0;
    double mean_fidelity = 0.0;
};
std::vector<FeatureDimRow> feature_dim_sweep(const Scenario& sc,
                                             const std::vector<int>& dims,
                                             const std::vector<int>& capacities, int n_seeds,
                                             std::uint64_t seed);

}  // namespace qroute::harness
