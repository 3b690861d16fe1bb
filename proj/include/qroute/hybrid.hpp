#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qroute/error.hpp"
#include "qroute/mathutil.hpp"
#include "qroute/tiny_pomdp.hpp"

namespace qroute::hybrid {

// Probability floor applied to the reference distribution before KL, so the
// divergence stays finite without an absolute-continuity assumption.
constexpr double kKlFloor = 1e-12;

// Sum p log(p/q) with the 0 log 0 = 0 convention and q floored at 1e-12.
// Throws ACTION_SET_MISMATCH when the supports have different sizes.
double kl_divergence(const Vec& p, const Vec& q);

// Trust coefficient: sigmoid(-kappa * KL), always in (0, 0.5].
double trust(double kl, double kappa_alpha);

// Recalibrated variant sigmoid(c0 - kappa * KL); c0 = 0 recovers trust().
// Exposed because an adaptive scheme that can exceed 0.5 once the learned
// policy earns trust needs a positive intercept.
double trust_recalibrated(double kl, double kappa_alpha, double c0);

struct TrustState {
    double kappa_alpha = 1.0;
    double c0 = 0.0;
    double last_alpha = 0.5;
    double last_kl = 0.0;

    double update(double kl) {
        last_kl = kl;
        last_alpha = trust_recalibrated(kl, kappa_alpha, c0);
        return last_alpha;
    }
};

// Pointwise convex combination alpha * pi_gnn + (1 - alpha) * pi_pomdp.
Vec fuse(const Vec& pi_gnn, const Vec& pi_pomdp, double alpha);

// ---------------------------------------------------------------------------
// Hybrid performance bound on exactly evaluable tiny instances.

struct HybridBoundRow {
    double kl_level = 0.0;       // per-belief KL(pi_GNN || pi_POMDP), equalized
    double penalty = 0.0;        // (2 gamma R_max / (1-gamma)^2) sqrt(KL/2)
    double min_slack = 0.0;      // min over beliefs of V_hyb - (max(Vg,Vp) - penalty)
    double direct_gap = 0.0;     // min over beliefs of V_hyb - max(Vg,Vp)
    bool pass = false;
};

// Builds pi_POMDP = softmax(Q*/T) on the solved grid, perturbs it into pi_GNN
// at `n_levels` exact KL levels (per-belief logit noise, bisected to the
// target divergence), fuses with the adaptive trust factor, and verifies
//   V_hybrid(b) >= max(V_GNN(b), V_POMDP(b)) - penalty - 1e-9  at every b.
std::vector<HybridBoundRow> check_hybrid_bound(const planner::tiny::TinyPomdp& p, int resolution,
                                               int n_levels, std::uint64_t seed,
                                               double kappa_alpha = 1.0, double t_softmax = 0.5);

// ---------------------------------------------------------------------------
// Policy sensitivity to a depolarizing perturbation of the inputs.

struct SensitivityReport {
    double l_pi_hat = 0.0;                       // max TV / eps over the sweep
    LinearFit fit;                               // TV vs eps
    std::vector<std::pair<double, double>> tv;   // (eps, TV)
};

// `policy_at` maps a depolarizing strength eps to the policy output computed
// on the correspondingly perturbed inputs; eps = 0 must give the base policy.
SensitivityReport check_policy_sensitivity(const std::function<Vec(double)>& policy_at,
                                           const std::vector<double>& eps_levels);

// ---------------------------------------------------------------------------
// Feasibility accounting over per-alpha episode statistics.

struct AlphaStats {
    double alpha = 0.0;
    int episodes = 0;
    double mean_total_mu = 0.0;   // E over episodes of per-step mean sum_v mu_v
    double sd_total_mu = 0.0;     // std over episodes
    double deadline_ok_rate = 0.0;
};

struct FeasibilityRow {
    double alpha = 0.0;
    bool memory_ok = false;
    bool deadline_ok = false;
    double mixture_gap = 0.0;     // |E_alpha - (alpha E_1 + (1-alpha) E_0)|
    double mixture_tol = 0.0;     // 2 sigma Monte Carlo band
    bool mixture_ok = false;
};

struct FeasibilityReport {
    std::vector<FeasibilityRow> rows;
    bool baseline_feasible = false;  // alpha = 0 satisfied the constraints
    bool pass = false;               // all alphas feasible whenever baseline is
};

FeasibilityReport check_feasibility(const std::vector<AlphaStats>& stats, double memory_budget,
                                    double deadline_rate_min);

}  // namespace qroute::hybrid
