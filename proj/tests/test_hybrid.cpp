#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qroute/error.hpp"
#include "qroute/hybrid.hpp"

using namespace qroute;
using namespace qroute::hybrid;

namespace {

Vec random_dist(Rng& rng, int n) {
    Vec d(n);
    double z = 0.0;
    for (double& x : d) z += (x = rng.uniform(0.01, 1.0));
    for (double& x : d) x /= z;
    return d;
}

}  // namespace

TEST_CASE("kl_divergence: identity, hand value, non-negativity, mismatch") {
    Vec p{0.4, 0.6};
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
    CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng(7);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto a = random_dist(rng, 2 + static_cast<int>(rng.uniform_int(5)));
        const auto b = random_dist(rng, static_cast<int>(a.size()));
        CHECK(kl_divergence(a, b) >= -1e-12);
    }
    CHECK_THROWS_AS(kl_divergence({1.0}, {0.5, 0.5}), Error);
}

TEST_CASE("trust: value at zero, saturation, arithmetic, monotonicity") {
    CHECK(trust(0.0, 1.0) == doctest::Approx(0.5));
    CHECK(trust(1e9, 1.0) < 1e-6);
    CHECK(trust(1.0, 2.0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-12));

    double prev = 0.6;
    for (double kl : {0.0, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0}) {
        const double a = trust(kl, 1.5);
        CHECK(a > 0.0);
        CHECK(a <= 0.5);
        CHECK(a < prev);
        prev = a;
    }
    CHECK_THROWS_AS(trust(-0.1, 1.0), Error);

    // recalibrated variant can exceed 0.5 and reduces to trust() at c0 = 0
    CHECK(trust_recalibrated(0.0, 1.0, 2.0) == doctest::Approx(sigmoid(2.0)));
    CHECK(trust_recalibrated(0.3, 1.0, 0.0) == doctest::Approx(trust(0.3, 1.0)));

    TrustState ts;
    ts.kappa_alpha = 2.0;
    ts.update(0.7);
    CHECK(ts.last_alpha == doctest::Approx(sigmoid(-2.0 * 0.7)));
    CHECK(ts.last_kl == doctest::Approx(0.7));
}

TEST_CASE("fuse: endpoints, arithmetic, convexity envelope") {
    Vec g{0.8, 0.2};
    Vec p{0.2, 0.8};
    CHECK(fuse(g, p, 1.0) == g);
    CHECK(fuse(g, p, 0.0) == p);
    auto mixed = fuse(g, p, 0.3);
    CHECK(mixed[0] == doctest::Approx(0.38).epsilon(1e-12));
    CHECK(mixed[1] == doctest::Approx(0.62).epsilon(1e-12));

    Rng rng(3);
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_int(5));
        const auto a = random_dist(rng, n);
        const auto b = random_dist(rng, n);
        const double alpha = rng.uniform();
        const auto h = fuse(a, b, alpha);
        double z = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(h[i] >= std::min(a[i], b[i]) - 1e-12);
            CHECK(h[i] <= std::max(a[i], b[i]) + 1e-12);
            z += h[i];
        }
        CHECK(std::fabs(z - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(fuse({1.0}, {0.5, 0.5}, 0.5), Error);
}

TEST_CASE("KL convexity: D(fuse || pomdp) <= alpha D(gnn || pomdp)") {
    Rng rng(11);
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_int(4));
        const auto g = random_dist(rng, n);
        const auto p = random_dist(rng, n);
        for (double alpha : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
            const auto h = fuse(g, p, alpha);
            CHECK(kl_divergence(h, p) <= alpha * kl_divergence(g, p) + 1e-10);
        }
    }
}

TEST_CASE("hybrid bound: identical components have zero penalty and equal value") {
    Rng rng(2);
    auto p = planner::tiny::random_instance(rng, 3, 3, 2, 0.9);
    const auto s = planner::tiny::solve(p, 5);
    std::vector<Vec> pi(s.grid.size());
    for (int i = 0; i < s.grid.size(); ++i) {
        Vec logits(p.n_actions);
        for (int a = 0; a < p.n_actions; ++a)
            logits[a] = s.q_star[static_cast<std::size_t>(i) * p.n_actions + a] / 0.5;
        pi[i] = softmax(logits);
    }
    std::vector<Vec> hyb(s.grid.size());
    for (int i = 0; i < s.grid.size(); ++i) hyb[i] = fuse(pi[i], pi[i], trust(0.0, 1.0));
    const auto v1 = planner::tiny::evaluate_policy(p, s, pi);
    const auto v2 = planner::tiny::evaluate_policy(p, s, hyb);
    for (int i = 0; i < s.grid.size(); ++i) CHECK(v2[i] == doctest::Approx(v1[i]).epsilon(1e-9));
}

TEST_CASE("hybrid bound holds across KL levels on randomized instances") {
    for (int inst = 0; inst < 5; ++inst) {
        Rng rng(derive_seed(4400, inst));
        auto p = planner::tiny::random_instance(rng, 3, 3, 2, 0.9 + 0.03 * (inst % 2));
        auto rows = check_hybrid_bound(p, 5, 8, derive_seed(4500, inst));
        for (const auto& r : rows) CHECK_MESSAGE(r.pass, "instance ", inst, " kl=", r.kl_level);
        // the raw hybrid-vs-best gap degrades (weakly) as the divergence grows
        CHECK(rows.back().direct_gap <= rows.front().direct_gap + 1e-9);
    }
}

TEST_CASE("policy sensitivity: zero at zero, finite ratio, linear trend") {
    // smooth synthetic policy: softmax of a linear function of the perturbed
    // fidelity vector under the Werner depolarizing action
    const Vec base_f{0.9, 0.8, 0.7};
    auto policy_at = [&](double eps) {
        Vec f(base_f.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = (1.0 - eps) * base_f[i] + eps / 4.0;
        Vec logits{2.0 * f[0] - f[1], f[1] + 0.5 * f[2], -f[0] + f[2]};
        return softmax(logits);
    };
    std::vector<double> levels{0.0, 0.01, 0.02, 0.05, 0.08, 0.1, 0.15, 0.2};
    auto rep = check_policy_sensitivity(policy_at, levels);
    CHECK(rep.tv[0].second == doctest::Approx(0.0));
    CHECK(rep.l_pi_hat > 0.0);
    CHECK(std::isfinite(rep.l_pi_hat));
    CHECK(rep.fit.r2 >= 0.9);
}

TEST_CASE("feasibility report: regression guard, mixture band, negative control") {
    std::vector<AlphaStats> stats;
    // alpha = 0 (pure planner) is feasible; memory rises mildly with alpha
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        AlphaStats s;
        s.alpha = alpha;
        s.episodes = 100;
        s.mean_total_mu = 10.0 + 2.0 * alpha;  // exact mixture line
        s.sd_total_mu = 1.0;
        s.deadline_ok_rate = 0.95;
        stats.push_back(s);
    }
    auto rep = check_feasibility(stats, 13.0, 0.9);
    CHECK(rep.baseline_feasible);
    CHECK(rep.pass);
    for (const auto& r : rep.rows) CHECK(r.mixture_ok);

    // negative control: a constraint-violating pure-GNN row must be flagged
    stats[4].mean_total_mu = 50.0;
    auto bad = check_feasibility(stats, 13.0, 0.9);
    CHECK_FALSE(bad.pass);
    CHECK_FALSE(bad.rows[4].memory_ok);
}
