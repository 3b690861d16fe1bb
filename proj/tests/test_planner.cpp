#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qroute/planner.hpp"

using namespace qroute;
using namespace qroute::planner;

namespace {

aggregate::ClusterSet fixed_clusters(std::vector<Vec> centers) {
    aggregate::ClusterSet c;
    c.centers = std::move(centers);
    return c;
}

}  // namespace

TEST_CASE("build_cluster_mdp: single cluster constant reward") {
    auto clusters = fixed_clusters({{0.0}});
    std::vector<RolloutSample> rollouts;
    for (int i = 0; i < 20; ++i) rollouts.push_back({{0.0}, 0, 2.5, {0.0}});
    auto m = build_cluster_mdp(clusters, rollouts, 1, 0.9);
    CHECK(m.n_states == 1);
    CHECK(m.r(0, 0) == doctest::Approx(2.5));
    CHECK(m.p(0, 0, 0) == doctest::Approx(1.0));
    CHECK(m.seen(0, 0));
}

TEST_CASE("build_cluster_mdp: deterministic 2-cluster cycle up to smoothing") {
    auto clusters = fixed_clusters({{0.0}, {1.0}});
    std::vector<RolloutSample> rollouts;
    for (int i = 0; i < 10; ++i) {
        rollouts.push_back({{0.0}, 0, 0.0, {1.0}});
        rollouts.push_back({{1.0}, 0, 0.0, {0.0}});
    }
    auto m = build_cluster_mdp(clusters, rollouts, 1, 0.9);
    // hand count: 10 transitions + Laplace 1 over denominator 10 + K(2)
    CHECK(m.p(0, 0, 1) == doctest::Approx(11.0 / 12.0));
    CHECK(m.p(0, 0, 0) == doctest::Approx(1.0 / 12.0));
    CHECK(m.p(1, 0, 0) == doctest::Approx(11.0 / 12.0));
}

TEST_CASE("build_cluster_mdp: Laplace arithmetic for a single observation") {
    auto clusters = fixed_clusters({{0.0}, {1.0}, {2.0}, {3.0}});
    std::vector<RolloutSample> rollouts{{{0.0}, 0, 1.0, {1.0}}};
    auto m = build_cluster_mdp(clusters, rollouts, 1, 0.9);
    CHECK(m.p(0, 0, 1) == doctest::Approx((1.0 + 1.0) / (1.0 + 4.0)));
    for (int q2 : {0, 2, 3}) CHECK(m.p(0, 0, q2) == doctest::Approx(1.0 / 5.0));
    // unvisited pairs: flagged self-loop with zero reward
    CHECK_FALSE(m.seen(2, 0));
    CHECK(m.p(2, 0, 2) == doctest::Approx(1.0));
    CHECK(m.r(2, 0) == 0.0);

    CHECK_THROWS_AS(build_cluster_mdp(clusters, {}, 1, 0.9), Error);
}

TEST_CASE("value_iteration: geometric series and closed-form chain") {
    AggregatedMDP m;
    m.n_states = 1;
    m.n_actions = 1;
    m.gamma = 0.9;
    m.trans = {1.0};
    m.reward = {1.0};
    m.visited = {1};
    auto vt = value_iteration(m, 1e-10);
    CHECK(vt.v[0] == doctest::Approx(10.0).epsilon(1e-8));

    // 2-state chain: state 0 moves to absorbing state 1; rewards (0, 1), gamma 0.5.
    // Hand solve: V1 = 1 + 0.5 V1 -> V1 = 2; V0 = 0 + 0.5 * V1 = 1.
    AggregatedMDP chain;
    chain.n_states = 2;
    chain.n_actions = 1;
    chain.gamma = 0.5;
    chain.trans = {0.0, 1.0, 0.0, 1.0};
    chain.reward = {0.0, 1.0};
    chain.visited = {1, 1};
    auto vt2 = value_iteration(chain, 1e-12);
    CHECK(vt2.v[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(vt2.v[1] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("value_iteration: residuals contract at rate gamma") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        AggregatedMDP m;
        m.n_states = 6;
        m.n_actions = 3;
        m.gamma = 0.85;
        m.trans.resize(6 * 3 * 6);
        m.reward.resize(6 * 3);
        m.visited.assign(6 * 3, 1);
        for (int s = 0; s < 6; ++s)
            for (int a = 0; a < 3; ++a) {
                double z = 0.0;
                for (int s2 = 0; s2 < 6; ++s2)
                    z += (m.trans[(s * 3 + a) * 6 + s2] = rng.uniform(0.01, 1.0));
                for (int s2 = 0; s2 < 6; ++s2) m.trans[(s * 3 + a) * 6 + s2] /= z;
                m.reward[s * 3 + a] = rng.uniform(0.0, 1.0);
            }
        auto vt = value_iteration(m, 1e-11);
        for (std::size_t i = 1; i < vt.residual_history.size(); ++i) {
            if (vt.residual_history[i - 1] < 1e-13) break;
            CHECK(vt.residual_history[i] <=
                  m.gamma * vt.residual_history[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("value_iteration: non-finite inputs raise NONCONVERGENCE") {
    AggregatedMDP m;
    m.n_states = 1;
    m.n_actions = 1;
    m.gamma = 0.9;
    m.trans = {1.0};
    m.reward = {std::numeric_limits<double>::quiet_NaN()};
    m.visited = {1};
    CHECK_THROWS_AS(value_iteration(m, 1e-8), Error);
}

TEST_CASE("pomdp_policy: softmax symmetry, limits, arithmetic") {
    ValueTable vt;
    vt.q = {1.0, 1.0, 1.0};
    vt.v = {1.0};
    auto uniform = policy_from_q(vt, 0, 3, 1.0);
    for (double x : uniform) CHECK(x == doctest::Approx(1.0 / 3.0));

    ValueTable vt2;
    vt2.q = {1.0, 0.0};
    vt2.v = {1.0};
    auto p = policy_from_q(vt2, 0, 2, 1.0);
    CHECK(p[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)).epsilon(1e-12));

    auto sharp = policy_from_q(vt2, 0, 2, 1e-4);
    CHECK(sharp[0] > 1.0 - 1e-10);  // T -> 0+ gives the argmax all the mass

    // strict positivity and normalization over random tables
    Rng rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        ValueTable vr;
        vr.q = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        auto d = policy_from_q(vr, 0, 4, 0.1);
        double z = 0.0;
        for (double x : d) {
            CHECK(x > 0.0);
            z += x;
        }
        CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tiny grid: belief updates normalize; grid covers the simplex") {
    Rng rng(41);
    auto p = tiny::random_instance(rng, 3, 2, 2, 0.9);
    auto grid = tiny::make_grid(3, 4);
    CHECK(grid.size() == 15);  // C(4+2, 2)
    for (const auto& b : grid.points) {
        double z = 0.0;
        for (double x : b) z += x;
        CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto nb = tiny::belief_update(p, grid.points[3], 0, 1);
    REQUIRE(!nb.empty());
    double z = 0.0;
    for (double x : nb) z += x;
    CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tiny solve: value iteration matches a hand-solved observable chain") {
    // Fully observable 2-state chain embedded as a POMDP with perfect
    // observations: V should match the MDP solution at the corner beliefs.
    tiny::TinyPomdp p;
    p.n_states = 2;
    p.n_actions = 1;
    p.n_obs = 2;
    p.gamma = 0.5;
    p.trans = {0.0, 1.0, 0.0, 1.0};       // s0 -> s1, s1 absorbing
    p.obs = {1.0, 0.0, 0.0, 1.0};         // perfect observation
    p.reward = {0.0, 1.0};
    auto s = tiny::solve(p, 4);
    // corner beliefs sit at grid points
    const int i0 = s.grid.nearest(Vec{1.0, 0.0});
    const int i1 = s.grid.nearest(Vec{0.0, 1.0});
    CHECK(s.v_star[i0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.v_star[i1] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("aggregation bound: epsilon 0 collapses to slack; bound holds across K") {
    Rng rng(2024);
    auto p = tiny::random_instance(rng, 3, 3, 2, 0.9);
    const int resolution = 5;  // 21 grid points
    auto grid = tiny::make_grid(3, resolution);
    auto rows = check_aggregation_bound(p, {grid.size(), 8, 4, 1}, resolution, 99);
    REQUIRE(rows.size() == 4);
    // every grid point its own cluster: error within slack
    CHECK(rows[0].eps == doctest::Approx(0.0));
    CHECK(rows[0].error <= 1e-6);
    for (const auto& r : rows) {
        CHECK(r.pass);
        CHECK(r.error <= r.bound);
    }
}

TEST_CASE("aggregation + propagation bounds hold on 20 randomized tiny instances") {
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(derive_seed(7000, inst));
        const int n_states = 2 + static_cast<int>(rng.uniform_int(2));  // 2 or 3
        const int n_actions = 2 + static_cast<int>(rng.uniform_int(2));
        auto p = tiny::random_instance(rng, n_states, n_actions, 2, rng.uniform(0.85, 0.95));
        const int resolution = n_states == 2 ? 10 : 5;
        auto rows = check_aggregation_bound(p, {1, 3, 6}, resolution, derive_seed(8000, inst));
        for (const auto& r : rows) CHECK_MESSAGE(r.pass, "instance ", inst, " eps=", r.eps);

        auto prop = check_estimation_propagation(p, 4, {0.0, 0.1, 0.3}, resolution, 400,
                                                 derive_seed(8100, inst));
        for (const auto& r : prop)
            CHECK_MESSAGE(r.pass, "instance ", inst, " eps_est=", r.eps_est,
                          " violation=", r.worst_violation);
    }
}

TEST_CASE("estimation propagation: eps_est 0 reduces to the aggregation bound") {
    Rng rng(3);
    auto p = tiny::random_instance(rng, 3, 2, 2, 0.9);
    auto rows = check_estimation_propagation(p, 4, {0.0}, 5, 200, 11);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].pass);
}

TEST_CASE("feature distinguishability: beliefs with different optimal actions embed apart") {
    Rng rng(12);
    auto p = tiny::random_instance(rng, 3, 3, 2, 0.9);
    auto s = tiny::solve(p, 6);
    auto acts = tiny::greedy_actions(s);
    int checked = 0;
    for (int i = 0; i < s.grid.size() && checked < 200; ++i)
        for (int j = i + 1; j < s.grid.size() && checked < 200; ++j) {
            if (acts[i] == acts[j]) continue;
            ++checked;
            CHECK(l2_distance(s.grid.points[i], s.grid.points[j]) > 0.0);
        }
    CHECK(checked > 0);
}

TEST_CASE("entanglement probe: correlation loss strictly exceeds the independent case") {
    auto res = entanglement_error_probe(515);
    CHECK(res.correlated_error > res.independent_error);
    CHECK(res.independent_error <= 1e-9);  // products project onto themselves
    CHECK(res.correlated_error > 0.1);
}

TEST_CASE("planner JSON serialization") {
    AggregatedMDP m;
    m.n_states = 2;
    m.n_actions = 1;
    m.gamma = 0.9;
    m.trans = {0.5, 0.5, 0.1, 0.9};
    m.reward = {1.0, 0.0};
    m.visited = {1, 1};
    auto vt = value_iteration(m, 1e-9);
    CHECK(to_json(m).find("\"gamma\"") != std::string::npos);
    CHECK(to_json(vt, 1).find("\"iterations\"") != std::string::npos);
}
