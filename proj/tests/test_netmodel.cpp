#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "qroute/netmodel.hpp"

using namespace qroute;
using namespace qroute::netmodel;

namespace {

NetworkGraph line_graph(int n, double fidelity, std::uint64_t seed = 7) {
    TopologyParams p;
    p.f_min = p.f_max = fidelity;
    NetworkGraph g = build_network(Topology::Line, n, p, seed);
    g.params.kappa = 0.0;
    return g;
}

std::vector<int> true_mu(const NetworkGraph& g) {
    std::vector<int> mu(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) mu[i] = g.nodes[i].occupancy;
    return mu;
}

}  // namespace

TEST_CASE("build_network: smallest line topology") {
    NetworkGraph g = build_network(Topology::Line, 2, TopologyParams{}, 7);
    CHECK(g.link_count() == 1);
    CHECK(g.links[0].u == 0);
    CHECK(g.links[0].v == 1);
    // both endpoints have degree 1
    CHECK(g.nodes.size() == 2);
}

TEST_CASE("build_network: random geometric 50 nodes is connected, fidelities in range") {
    NetworkGraph g = build_network(Topology::RandomGeometric, 50, TopologyParams{}, 1);
    // connectivity via BFS over live links
    std::vector<std::vector<int>> adj(50);
    for (const auto& l : g.links) {
        adj[l.u].push_back(l.v);
        adj[l.v].push_back(l.u);
    }
    std::vector<char> seen(50, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int visited = 1;
    while (!stack.empty()) {
        int x = stack.back();
        stack.pop_back();
        for (int y : adj[x])
            if (!seen[y]) {
                seen[y] = 1;
                ++visited;
                stack.push_back(y);
            }
    }
    CHECK(visited == 50);
    for (const auto& l : g.links) {
        CHECK(l.fidelity >= 0.70);
        CHECK(l.fidelity <= 0.95);
    }
}

TEST_CASE("build_network: 3x3 grid has 12 links") {
    // oracle: a k-by-k grid has 2*k*(k-1) edges; k=3 -> 12
    const int k = 3;
    const int expected = 2 * k * (k - 1);
    CHECK(expected == 12);
    NetworkGraph g = build_network(Topology::Grid, 9, TopologyParams{}, 3);
    CHECK(g.link_count() == expected);
}

TEST_CASE("build_network: invalid params") {
    CHECK_THROWS_AS(build_network(Topology::Line, 1, TopologyParams{}, 0), Error);
    TopologyParams bad;
    bad.f_min = 0.1;  // below the Werner floor
    CHECK_THROWS_AS(build_network(Topology::Line, 4, bad, 0), Error);
}

TEST_CASE("step_decoherence: drift-only closed form") {
    NetworkGraph g = line_graph(2, 0.85);
    g.links[0].decay_rate = 0.0;
    step_decoherence(g, 1.0);
    CHECK(g.links[0].fidelity == doctest::Approx(0.85).epsilon(1e-15));

    NetworkGraph g2 = line_graph(2, 0.85);
    g2.links[0].decay_rate = 0.05;
    step_decoherence(g2, 1.0);
    CHECK(g2.links[0].fidelity == doctest::Approx(0.85 * std::exp(-0.05)).epsilon(1e-12));
    CHECK(g2.links[0].age == 1);
}

TEST_CASE("step_decoherence: diffusion is reproducible under a fixed seed") {
    auto run = [] {
        NetworkGraph g = build_network(Topology::Line, 4, TopologyParams{}, 11);
        g.params.kappa = 0.02;
        for (int i = 0; i < 25; ++i) step_decoherence(g, 0.3);
        std::vector<double> fs;
        for (const auto& l : g.links) fs.push_back(l.fidelity);
        return fs;
    };
    const auto a = run();
    const auto b = run();
    CHECK(a == b);  // bit-exact
}

TEST_CASE("step_decoherence: decay semigroup with kappa=0") {
    for (double gamma : {0.01, 0.05, 0.1}) {
        NetworkGraph g1 = line_graph(2, 0.92);
        g1.params.kill_threshold = 0.0;
        g1.links[0].decay_rate = gamma;
        NetworkGraph g2 = g1;
        step_decoherence(g1, 0.7);
        step_decoherence(g1, 1.9);
        step_decoherence(g2, 2.6);
        CHECK(g1.links[0].fidelity ==
              doctest::Approx(g2.links[0].fidelity).epsilon(1e-12));
    }
}

TEST_CASE("apply_purification: gain map and heralds") {
    NetworkGraph g = line_graph(2, 1.0);
    g.params.p_pur = 1.0;
    g.links[0].pairs = 2;
    g.nodes[0].occupancy = 2;
    g.nodes[1].occupancy = 2;
    CHECK(apply_purification(g, 0));
    CHECK(g.links[0].fidelity == doctest::Approx(1.0));  // fixed point of the gain map
    CHECK(g.links[0].pairs == 1);

    NetworkGraph g2 = line_graph(2, 0.80);
    g2.params.p_pur = 1.0;
    g2.links[0].pur_gain = 0.75;
    g2.links[0].pairs = 2;
    g2.nodes[0].occupancy = 2;
    g2.nodes[1].occupancy = 2;
    CHECK(apply_purification(g2, 0));
    CHECK(g2.links[0].fidelity == doctest::Approx(0.80 + 0.75 * 0.20).epsilon(1e-12));

    NetworkGraph g3 = line_graph(2, 0.8);
    CHECK_THROWS_AS(apply_purification(g3, 0), Error);  // only one stored pair
}

TEST_CASE("apply_purification: empirical success rate matches p_pur") {
    NetworkGraph g = line_graph(2, 0.8, 123);
    g.params.p_pur = 0.75;
    int successes = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        g.links[0].pairs = 2;
        g.nodes[0].occupancy = 2;
        g.nodes[1].occupancy = 2;
        g.links[0].fidelity = 0.8;
        if (apply_purification(g, 0)) ++successes;
    }
    const double rate = static_cast<double>(successes) / trials;
    CHECK(std::fabs(rate - 0.75) < 0.02);
}

TEST_CASE("apply_swap: Werner composition") {
    CHECK(swap_fidelity(1.0, 1.0) == doctest::Approx(1.0));
    CHECK(swap_fidelity(0.85, 0.85) == doctest::Approx(0.7225 + 0.0225 / 3.0).epsilon(1e-12));
    CHECK(swap_fidelity(0.25, 0.25) == doctest::Approx(0.25).epsilon(1e-12));

    NetworkGraph g = line_graph(3, 0.85);
    const int mu_before = g.total_occupancy();
    const LinkId nl = apply_swap(g, 0, 1, 1);
    CHECK(g.links[nl].u == 0);
    CHECK(g.links[nl].v == 2);
    CHECK(g.links[nl].fidelity == doctest::Approx(0.73).epsilon(1e-12));
    CHECK(g.links[nl].is_virtual);
    CHECK(g.total_occupancy() == mu_before - 2);
    CHECK(g.nodes[1].occupancy == 0);
    CHECK_FALSE(g.links[0].alive);
    CHECK_FALSE(g.links[1].alive);
}

TEST_CASE("apply_swap: rejects non-adjacent links") {
    NetworkGraph g = line_graph(4, 0.9);
    CHECK_THROWS_AS(apply_swap(g, 0, 2, 1), Error);  // links 0-1 and 2-3 share no node
}

TEST_CASE("swap monotonicity over a 100x100 fidelity grid") {
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            const double f1 = 0.25 + (i + 1) * 0.0075;
            const double f2 = 0.25 + (j + 1) * 0.0075;
            CHECK(swap_fidelity(f1, f2) <= std::min(f1, f2) + 1e-12);
        }
    }
}

TEST_CASE("apply_adversary: identity, worst-link and uniform attacks") {
    NetworkGraph g = line_graph(4, 0.85);
    NetworkGraph before = g;
    AdversaryConfig none;
    apply_adversary(g, none);
    for (int i = 0; i < g.link_count(); ++i)
        CHECK(g.links[i].fidelity == before.links[i].fidelity);

    NetworkGraph g2 = line_graph(4, 0.85);
    g2.links[1].fidelity = 0.90;
    AdversaryConfig worst;
    worst.epsilon_adv = 0.5;
    worst.target_selection = AdversaryTarget::WorstLink;
    apply_adversary(g2, worst);
    CHECK(g2.links[1].fidelity == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(g2.links[0].fidelity == doctest::Approx(0.85));

    NetworkGraph g3 = line_graph(4, 0.85);
    AdversaryConfig all;
    all.epsilon_adv = 0.1;
    all.target_selection = AdversaryTarget::WorstLink;
    all.n_link_targets = g3.link_count();
    apply_adversary(g3, all);
    for (const auto& l : g3.links) CHECK(l.fidelity == doctest::Approx(0.765).epsilon(1e-12));
}

TEST_CASE("apply_adversary: post-attack bound F' >= (1-eps) F") {
    Rng seeds(42);
    for (int rep = 0; rep < 20; ++rep) {
        NetworkGraph g = build_network(Topology::RandomGeometric, 12, TopologyParams{}, seeds.next_u64());
        std::vector<double> before;
        for (const auto& l : g.links) before.push_back(l.fidelity);
        AdversaryConfig cfg;
        cfg.epsilon_adv = 0.3;
        cfg.target_selection = AdversaryTarget::Random;
        cfg.n_link_targets = 3;
        apply_adversary(g, cfg);
        for (int i = 0; i < g.link_count(); ++i)
            CHECK(g.links[i].fidelity >= (1.0 - cfg.epsilon_adv) * before[i] - 1e-12);
    }
}

TEST_CASE("generate_requests: zero demand, Poisson mean, determinism") {
    Rng stream(5);
    std::vector<std::vector<double>> zeros(3, std::vector<double>(3, 0.0));
    CHECK(generate_requests(zeros, 0, 0.8, 50, stream).empty());

    std::vector<std::vector<double>> demand(2, std::vector<double>(2, 0.0));
    demand[0][1] = 2.0;
    Rng s1(99);
    long total = 0;
    const int steps = 10000;
    for (int t = 0; t < steps; ++t) total += static_cast<long>(generate_requests(demand, t, 0.8, 50, s1).size());
    const double mean = static_cast<double>(total) / steps;
    CHECK(mean > 1.94);
    CHECK(mean < 2.06);

    auto run = [&] {
        Rng s(77);
        std::vector<int> counts;
        for (int t = 0; t < 100; ++t)
            counts.push_back(static_cast<int>(generate_requests(demand, t, 0.8, 50, s).size()));
        return counts;
    };
    CHECK(run() == run());

    std::vector<std::vector<double>> bad(2, std::vector<double>(2, 0.0));
    bad[0][1] = -1.0;
    Rng s2(1);
    CHECK_THROWS_AS(generate_requests(bad, 0, 0.8, 50, s2), Error);
}

TEST_CASE("observe: noiseless threshold symbol and flip frequency") {
    NetworkGraph g = line_graph(2, 0.9);
    Rng stream(3);
    auto obs = observe(g, {0}, 0.0, 0.8, stream);
    REQUIRE(obs.symbols.size() == 1);
    CHECK(obs.symbols[0].high);

    int highs = 0;
    const int trials = 10000;
    Rng s2(31);
    for (int i = 0; i < trials; ++i) {
        auto o = observe(g, {0}, 0.1, 0.8, s2);
        if (o.symbols[0].high) ++highs;
    }
    const double freq = static_cast<double>(highs) / trials;
    CHECK(std::fabs(freq - 0.9) < 0.02);

    // classical side info is exact
    CHECK(obs.true_mu[0] == g.nodes[0].occupancy);
    CHECK(obs.link_age[0] == g.links[0].age);
}

TEST_CASE("physicality: fidelities stay in [0.25, 1] under random op fuzzing") {
    Rng fuzz(2024);
    NetworkGraph g = build_network(Topology::RandomGeometric, 10, TopologyParams{}, 55);
    g.params.kappa = 0.05;
    for (int step = 0; step < 400; ++step) {
        const auto actions = enumerate_actions(g, true_mu(g));
        const auto& a = actions[fuzz.uniform_int(actions.size())];
        apply_action(g, a);
        step_decoherence(g, 0.5);
        if (step % 7 == 0) {
            AdversaryConfig cfg;
            cfg.epsilon_adv = 0.2;
            cfg.target_selection = AdversaryTarget::Random;
            apply_adversary(g, cfg);
        }
        for (const auto& l : g.links) {
            CHECK(l.fidelity >= kFidelityFloor);
            CHECK(l.fidelity <= 1.0);
        }
    }
}

TEST_CASE("memory ledger: conservation audit under random op fuzzing") {
    Rng fuzz(909);
    NetworkGraph g = build_network(Topology::RandomGeometric, 8, TopologyParams{}, 66);
    const int initial = g.total_occupancy();
    for (int step = 0; step < 500; ++step) {
        const auto actions = enumerate_actions(g, true_mu(g));
        apply_action(g, actions[fuzz.uniform_int(actions.size())]);
        std::string why;
        REQUIRE_MESSAGE(audit_memory(g, initial, &why), why);
    }
}

TEST_CASE("determinism: identical seeds give identical trajectories") {
    auto run = [] {
        NetworkGraph g = build_network(Topology::SmallWorld, 12, TopologyParams{}, 321);
        g.params.kappa = 0.01;
        Rng policy(17);
        std::vector<double> trace;
        for (int step = 0; step < 120; ++step) {
            const auto actions = enumerate_actions(g, true_mu(g));
            apply_action(g, actions[policy.uniform_int(actions.size())]);
            step_decoherence(g, 0.4);
            double s = 0.0;
            for (const auto& l : g.links) s += l.fidelity * (l.alive ? 1.0 : 0.25);
            trace.push_back(s);
        }
        return trace;
    };
    CHECK(run() == run());
}

TEST_CASE("enumerate_actions: deterministic order, idle first, all feasible") {
    NetworkGraph g = line_graph(3, 0.9);
    const auto actions = enumerate_actions(g, true_mu(g));
    REQUIRE(!actions.empty());
    CHECK(actions[0].type == ActionType::Idle);
    for (const auto& a : actions) CHECK(action_feasible(g, a, true_mu(g)));
    // line of 3 with one pair per link: 1 idle + 2 entangle + 1 swap + 2 release
    int swaps = 0;
    for (const auto& a : actions)
        if (a.type == ActionType::Swap) ++swaps;
    CHECK(swaps == 1);
}
