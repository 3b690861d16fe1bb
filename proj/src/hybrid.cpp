#include "qroute/hybrid.hpp"

#include <algorithm>
#include <cmath>

#include "qroute/error.hpp"
#include "qroute/rng.hpp"

namespace qroute::hybrid {

double kl_divergence(const Vec& p, const Vec& q) {
    if (p.size() != q.size())
        throw Error(ErrorCode::ACTION_SET_MISMATCH, "distributions over different action sets");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;  // 0 log 0 = 0
        kl += p[i] * std::log(p[i] / std::max(q[i], kKlFloor));
    }
    return kl;
}

double trust(double kl, double kappa_alpha) {
    if (kl < 0.0 || kappa_alpha <= 0.0)
        throw Error(ErrorCode::INVALID_PARAM, "trust needs kl >= 0 and kappa > 0");
    return sigmoid(-kappa_alpha * kl);
}

double trust_recalibrated(double kl, double kappa_alpha, double c0) {
    if (kl < 0.0 || kappa_alpha <= 0.0)
        throw Error(ErrorCode::INVALID_PARAM, "trust needs kl >= 0 and kappa > 0");
    return sigmoid(c0 - kappa_alpha * kl);
}

Vec fuse(const Vec& pi_gnn, const Vec& pi_pomdp, double alpha) {
    if (pi_gnn.size() != pi_pomdp.size())
        throw Error(ErrorCode::ACTION_SET_MISMATCH, "fusing distributions of different sizes");
    if (alpha < 0.0 || alpha > 1.0) throw Error(ErrorCode::INVALID_PARAM, "alpha outside [0,1]");
    Vec out(pi_gnn.size());
    double z = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i)
        z += (out[i] = alpha * pi_gnn[i] + (1.0 - alpha) * pi_pomdp[i]);
    if (std::fabs(z - 1.0) > 1e-12)
        for (double& x : out) x /= z;
    return out;
}

namespace {

using planner::tiny::SolvedGrid;
using planner::tiny::TinyPomdp;

// Perturbs log pi with a fixed zero-mean direction, scaled so that
// KL(softmax(log pi + beta xi) || pi) hits `target` exactly (bisection).
Vec perturb_to_kl(const Vec& pi, const Vec& xi, double target) {
    Vec logits(pi.size());
    for (std::size_t i = 0; i < pi.size(); ++i) logits[i] = std::log(std::max(pi[i], 1e-300));
    auto at = [&](double beta) {
        Vec shifted(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) shifted[i] = logits[i] + beta * xi[i];
        return softmax(shifted);
    };
    auto kl_at = [&](double beta) { return kl_divergence(at(beta), pi); };
    double hi = 1.0;
    for (int i = 0; i < 200 && kl_at(hi) < target; ++i) hi *= 1.5;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (kl_at(mid) < target ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

}  // namespace

std::vector<HybridBoundRow> check_hybrid_bound(const TinyPomdp& p, int resolution, int n_levels,
                                               std::uint64_t seed, double kappa_alpha,
                                               double t_softmax) {
    const auto s = planner::tiny::solve(p, resolution);
    const int n = s.grid.size();
    const double r_max = p.r_max();

    std::vector<Vec> pi_pomdp(n);
    for (int i = 0; i < n; ++i) {
        Vec logits(p.n_actions);
        for (int a = 0; a < p.n_actions; ++a)
            logits[a] = s.q_star[static_cast<std::size_t>(i) * p.n_actions + a] / t_softmax;
        pi_pomdp[i] = softmax(logits);
    }
    const Vec v_pomdp = planner::tiny::evaluate_policy(p, s, pi_pomdp);

    Rng rng(seed);
    std::vector<HybridBoundRow> rows;
    for (int lvl = 0; lvl < n_levels; ++lvl) {
        const double kl_target =
            std::pow(10.0, -4.0 + 4.0 * static_cast<double>(lvl) / std::max(1, n_levels - 1)) * 0.5;
        std::vector<Vec> pi_gnn(n), pi_hyb(n);
        for (int i = 0; i < n; ++i) {
            Vec xi(p.n_actions);
            double mean = 0.0;
            for (double& x : xi) mean += (x = rng.uniform(-1.0, 1.0)) / p.n_actions;
            for (double& x : xi) x -= mean;  // constant shifts do not move the softmax
            double norm = l2_norm(xi);
            if (norm < 1e-9) {
                xi.assign(p.n_actions, 0.0);
                xi[0] = 1.0;
                xi[p.n_actions - 1] = -1.0;
                norm = l2_norm(xi);
            }
            for (double& x : xi) x /= norm;
            pi_gnn[i] = perturb_to_kl(pi_pomdp[i], xi, kl_target);
            const double alpha = trust(kl_divergence(pi_pomdp[i], pi_gnn[i]), kappa_alpha);
            pi_hyb[i] = fuse(pi_gnn[i], pi_pomdp[i], alpha);
        }
        const Vec v_gnn = planner::tiny::evaluate_policy(p, s, pi_gnn);
        const Vec v_hyb = planner::tiny::evaluate_policy(p, s, pi_hyb);

        HybridBoundRow row;
        row.kl_level = kl_target;
        row.penalty = 2.0 * p.gamma * r_max / ((1.0 - p.gamma) * (1.0 - p.gamma)) *
                      std::sqrt(0.5 * kl_target);
        row.min_slack = 1e300;
        row.direct_gap = 1e300;
        for (int i = 0; i < n; ++i) {
            const double best = std::max(v_gnn[i], v_pomdp[i]);
            row.min_slack = std::min(row.min_slack, v_hyb[i] - (best - row.penalty));
            row.direct_gap = std::min(row.direct_gap, v_hyb[i] - best);
        }
        row.pass = row.min_slack >= -1e-9;
        rows.push_back(row);
    }
    return rows;
}

SensitivityReport check_policy_sensitivity(const std::function<Vec(double)>& policy_at,
                                           const std::vector<double>& eps_levels) {
    SensitivityReport rep;
    const Vec base = policy_at(0.0);
    Vec xs, ys;
    for (double eps : eps_levels) {
        const Vec perturbed = policy_at(eps);
        double tv = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) tv += std::fabs(perturbed[i] - base[i]);
        tv *= 0.5;
        rep.tv.emplace_back(eps, tv);
        if (eps > 0.0) rep.l_pi_hat = std::max(rep.l_pi_hat, tv / eps);
        xs.push_back(eps);
        ys.push_back(tv);
    }
    rep.fit = linear_fit(xs, ys);
    return rep;
}

FeasibilityReport check_feasibility(const std::vector<AlphaStats>& stats, double memory_budget,
                                    double deadline_rate_min) {
    FeasibilityReport rep;
    const AlphaStats* a0 = nullptr;
    const AlphaStats* a1 = nullptr;
    for (const auto& s : stats) {
        if (s.alpha == 0.0) a0 = &s;
        if (s.alpha == 1.0) a1 = &s;
    }
    if (a0) rep.baseline_feasible = a0->mean_total_mu <= memory_budget &&
                                    a0->deadline_ok_rate >= deadline_rate_min;
    rep.pass = true;
    for (const auto& s : stats) {
        FeasibilityRow row;
        row.alpha = s.alpha;
        row.memory_ok = s.mean_total_mu <= memory_budget;
        row.deadline_ok = s.deadline_ok_rate >= deadline_rate_min;
        if (a0 && a1 && s.episodes > 0) {
            const double expected = s.alpha * a1->mean_total_mu + (1.0 - s.alpha) * a0->mean_total_mu;
            row.mixture_gap = std::fabs(s.mean_total_mu - expected);
            const double se = [&] {
                auto sem = [](const AlphaStats& x) {
                    return x.episodes > 0 ? x.sd_total_mu / std::sqrt(static_cast<double>(x.episodes))
                                          : 0.0;
                };
                const double s0 = sem(*a0), s1 = sem(*a1), sm = sem(s);
                return std::sqrt(sm * sm + s.alpha * s.alpha * s1 * s1 +
                                 (1.0 - s.alpha) * (1.0 - s.alpha) * s0 * s0);
            }();
            row.mixture_tol = 2.0 * se;
            row.mixture_ok = row.mixture_gap <= row.mixture_tol;
        }
        if (rep.baseline_feasible && !(row.memory_ok && row.deadline_ok)) rep.pass = false;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace qroute::hybrid
