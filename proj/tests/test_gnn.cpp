#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qroute/gnn.hpp"

using namespace qroute;
using namespace qroute::gnn;

namespace {

GnnConfig small_cfg(std::uint64_t seed = 1) {
    GnnConfig cfg;
    cfg.d_node = 4;
    cfg.d_edge = 3;
    cfg.d_h = 6;
    cfg.width = 6;
    cfg.t_layers = 2;
    cfg.d_flat = 5;
    cfg.critic_width = 8;
    cfg.init_seed = seed;
    return cfg;
}

GraphInput random_graph(const GnnConfig& cfg, int n, Rng& rng, int extra_edges = 2) {
    GraphInput g;
    g.n_nodes = n;
    g.node_feats.resize(n);
    for (auto& f : g.node_feats) {
        f.resize(cfg.d_node);
        for (double& x : f) x = rng.uniform(-1, 1);
    }
    auto add_edge = [&](int u, int v) {
        GraphInput::Edge e;
        e.u = u;
        e.v = v;
        e.feats.resize(cfg.d_edge);
        for (double& x : e.feats) x = rng.uniform(-1, 1);
        g.edges.push_back(e);
    };
    for (int i = 0; i + 1 < n; ++i) add_edge(i, i + 1);
    for (int i = 0; i < extra_edges && n > 2; ++i)
        add_edge(static_cast<int>(rng.uniform_int(n)), static_cast<int>(rng.uniform_int(n - 1)));
    // candidate actions: idle plus a few typed pair actions
    g.actions.push_back({0, -1, -1, {}});
    for (int i = 0; i + 1 < n; ++i)
        g.actions.push_back({1 + i % 4, i, i + 1, {rng.uniform(), rng.uniform()}});
    g.flat.resize(cfg.d_flat);
    for (double& x : g.flat) x = rng.uniform(-1, 1);
    return g;
}

}  // namespace

TEST_CASE("zero weights give a uniform policy") {
    auto cfg = small_cfg();
    auto p = make_params(cfg);
    p.for_each_policy_param(p, [](double& w, double&) { w = 0.0; });
    Rng rng(3);
    auto g = random_graph(cfg, 5, rng);
    auto res = forward(p, g);
    auto pi = policy_distribution(res.logits);
    for (double x : pi) CHECK(x == doctest::Approx(1.0 / pi.size()).epsilon(1e-12));
}

TEST_CASE("policy_distribution: arithmetic, shift invariance, empty set") {
    auto u = policy_distribution({0.0, 0.0, 0.0});
    for (double x : u) CHECK(x == doctest::Approx(1.0 / 3));

    auto p = policy_distribution({1.0, 0.0});
    CHECK(p[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-12));

    auto a = policy_distribution({0.3, -1.2, 2.0});
    auto b = policy_distribution({0.3 + 7.5, -1.2 + 7.5, 2.0 + 7.5});
    for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

    CHECK_THROWS_AS(policy_distribution({}), Error);
}

TEST_CASE("permutation equivariance of embeddings and logits") {
    auto cfg = small_cfg(7);
    auto p = make_params(cfg);
    Rng rng(11);
    auto g = random_graph(cfg, 6, rng, 3);
    auto base = forward(p, g);

    // relabel nodes by a fixed permutation
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    GraphInput pg = g;
    for (int v = 0; v < g.n_nodes; ++v) pg.node_feats[perm[v]] = g.node_feats[v];
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        pg.edges[e].u = perm[g.edges[e].u];
        pg.edges[e].v = perm[g.edges[e].v];
    }
    for (auto& a : pg.actions) {
        if (a.s_node >= 0) a.s_node = perm[a.s_node];
        if (a.d_node >= 0) a.d_node = perm[a.d_node];
    }
    auto permuted = forward(p, pg);
    for (int v = 0; v < g.n_nodes; ++v)
        for (int i = 0; i < cfg.d_h; ++i)
            CHECK(permuted.embeddings[perm[v]][i] ==
                  doctest::Approx(base.embeddings[v][i]).epsilon(1e-9));
    for (std::size_t a = 0; a < g.actions.size(); ++a)
        CHECK(permuted.logits[a] == doctest::Approx(base.logits[a]).epsilon(1e-9));
}

TEST_CASE("single node, no edges: embedding equals an independent GRU trace") {
    auto cfg = small_cfg(5);
    cfg.d_h = 2;
    cfg.d_node = 2;
    cfg.width = 3;
    cfg.t_layers = 2;
    auto p = make_params(cfg);

    GraphInput g;
    g.n_nodes = 1;
    g.node_feats = {{0.4, -0.7}};
    g.actions.push_back({0, -1, -1, {}});
    g.flat.assign(cfg.d_flat, 0.0);
    auto res = forward(p, g);

    // independent step-by-step trace of the same equations
    auto affine = [&](const nn::Affine& a, const Vec& x) {
        Vec y(a.W.rows, 0.0);
        for (int r = 0; r < a.W.rows; ++r) {
            y[r] = a.b[r];
            for (int c = 0; c < a.W.cols; ++c) y[r] += a.W.at(r, c) * x[c];
        }
        return y;
    };
    Vec h = affine(p.input, g.node_feats[0]);
    for (double& x : h) x = std::tanh(x);
    const Vec zero_msg(cfg.d_h, 0.0);
    for (int k = 0; k < cfg.t_layers; ++k) {
        Vec z = affine(p.gru_wz, zero_msg);
        Vec zu = affine(p.gru_uz, h);
        Vec r = affine(p.gru_wr, zero_msg);
        Vec ru = affine(p.gru_ur, h);
        for (int i = 0; i < cfg.d_h; ++i) {
            z[i] = sigmoid(z[i] + zu[i]);
            r[i] = sigmoid(r[i] + ru[i]);
        }
        Vec rh(cfg.d_h);
        for (int i = 0; i < cfg.d_h; ++i) rh[i] = r[i] * h[i];
        Vec c = affine(p.gru_wc, zero_msg);
        Vec cu = affine(p.gru_uc, rh);
        for (int i = 0; i < cfg.d_h; ++i) c[i] = std::tanh(c[i] + cu[i]);
        for (int i = 0; i < cfg.d_h; ++i) h[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];
    }
    for (int i = 0; i < cfg.d_h; ++i)
        CHECK(res.embeddings[0][i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences") {
    for (std::uint64_t draw = 0; draw < 3; ++draw) {
        auto cfg = small_cfg(100 + draw);
        auto p = make_params(cfg);
        Rng rng(derive_seed(42, draw));
        auto g = random_graph(cfg, 5, rng);

        Vec upstream(g.actions.size());
        for (double& x : upstream) x = rng.uniform(-1, 1);

        ForwardTrace trace;
        forward(p, g, &trace);
        GnnParams grad = zero_like(p);
        backward(p, g, trace, upstream, grad);

        Vec analytic;
        grad.for_each_policy_param(grad, [&](double& gv, double&) { analytic.push_back(gv); });

        // collect parameter pointers to perturb them in place
        std::vector<double*> slots;
        p.for_each_policy_param(p, [&](double& w, double&) { slots.push_back(&w); });
        REQUIRE(slots.size() == analytic.size());

        const double eps = 1e-5;
        double max_rel = 0.0;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const double saved = *slots[i];
            *slots[i] = saved + eps;
            const auto up = forward(p, g).logits;
            *slots[i] = saved - eps;
            const auto dn = forward(p, g).logits;
            *slots[i] = saved;
            double fd = 0.0;
            for (std::size_t a = 0; a < upstream.size(); ++a)
                fd += upstream[a] * (up[a] - dn[a]) / (2.0 * eps);
            const double rel = std::fabs(fd - analytic[i]) /
                               std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("backward: zero upstream gradient yields zero parameter gradients") {
    auto cfg = small_cfg(9);
    auto p = make_params(cfg);
    Rng rng(5);
    auto g = random_graph(cfg, 4, rng);
    ForwardTrace trace;
    forward(p, g, &trace);
    GnnParams grad = zero_like(p);
    backward(p, g, trace, Vec(g.actions.size(), 0.0), grad);
    double total = 0.0;
    grad.for_each_policy_param(grad, [&](double& gv, double&) { total += std::fabs(gv); });
    CHECK(total == 0.0);
}

TEST_CASE("imitation: zero loss and no movement at the optimum; loss non-negative") {
    auto cfg = small_cfg(21);
    auto p = make_params(cfg);
    Rng rng(13);
    auto g = random_graph(cfg, 5, rng);
    const Vec target = policy_distribution(forward(p, g).logits);

    std::vector<ImitationSample> batch{{g, target}};
    Vec before;
    p.for_each_policy_param(p, [&](double& w, double&) { before.push_back(w); });
    const double loss = imitation_step(p, batch, 0.1);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
    Vec after;
    p.for_each_policy_param(p, [&](double& w, double&) { after.push_back(w); });
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(std::fabs(after[i] - before[i]) <= 1e-12);

    // random targets: KL >= 0 always
    for (int rep = 0; rep < 50; ++rep) {
        Vec t(g.actions.size());
        double z = 0.0;
        for (double& x : t) z += (x = rng.uniform(0.01, 1.0));
        for (double& x : t) x /= z;
        CHECK(imitation_loss(p, {{g, t}}) >= 0.0);
    }
}

TEST_CASE("imitation training reduces KL at least 10x on a frozen scenario") {
    auto cfg = small_cfg(33);
    cfg.d_h = 8;
    cfg.width = 8;
    auto p = make_params(cfg);
    auto teacher_cfg = cfg;
    teacher_cfg.init_seed = 991;
    const auto teacher = make_params(teacher_cfg);
    Rng rng(77);
    std::vector<ImitationSample> data;
    for (int i = 0; i < 6; ++i) {
        auto g = random_graph(cfg, 10, rng, 4);
        Vec t = policy_distribution(forward(teacher, g).logits);
        data.push_back({std::move(g), std::move(t)});
    }
    const double initial = imitation_loss(p, data);
    for (int step = 0; step < 2000; ++step) imitation_step(p, data, 0.05);
    const double final_loss = imitation_loss(p, data);
    CHECK(final_loss < initial / 10.0);
}

TEST_CASE("actor-critic: zero residual, hard and soft target updates") {
    auto cfg = small_cfg(55);
    auto p = make_params(cfg);
    Rng rng(19);
    std::vector<ReplaySample> batch;
    for (int i = 0; i < 4; ++i) {
        ReplaySample s;
        s.graph = random_graph(cfg, 4, rng);
        s.action = static_cast<int>(rng.uniform_int(s.graph.actions.size()));
        s.next_graph = random_graph(cfg, 4, rng);
        s.terminal = true;  // gamma-free targets
        batch.push_back(std::move(s));
    }
    // rewards equal to the critic's current predictions: residual is zero
    for (auto& s : batch)
        s.reward = critic_value(p.critic, cfg, s.graph.flat, s.graph.actions[s.action]);

    auto before = p.critic;
    ActorCriticSettings st;
    st.gamma = 0.0;
    st.lr_pi = 0.0;  // isolate the critic
    st.tau_target = 1.0;
    auto stats = actor_critic_step(p, batch, st);
    CHECK(stats.critic_mse == doctest::Approx(0.0).epsilon(1e-16));
    double moved = 0.0;
    nn::for_each(p.critic, before, [&](double& a, double& b) { moved += std::fabs(a - b); });
    CHECK(moved < 1e-8);
    // tau = 1: target equals the critic afterwards
    double diff = 0.0;
    nn::for_each(p.critic_target, p.critic, [&](double& a, double& b) { diff += std::fabs(a - b); });
    CHECK(diff == doctest::Approx(0.0));

    // tau = 0.01 moves each weight 1% of the gap
    auto p2 = make_params(small_cfg(56));
    const double w_target_before = p2.critic_target.l1.W.w[0];
    const double w_before = p2.critic.l1.W.w[0];
    // make them differ
    p2.critic.l1.W.w[0] = w_before + 1.0;
    for (auto& s : batch)
        s.reward = critic_value(p2.critic, cfg, s.graph.flat, s.graph.actions[s.action]);
    ActorCriticSettings st2;
    st2.gamma = 0.0;
    st2.lr_q = 0.0;
    st2.lr_pi = 0.0;
    st2.tau_target = 0.01;
    actor_critic_step(p2, batch, st2);
    CHECK(p2.critic_target.l1.W.w[0] ==
          doctest::Approx(0.01 * (w_before + 1.0) + 0.99 * w_target_before).epsilon(1e-12));
}

TEST_CASE("gradient variance bound: degenerate, general, and exact 4x scaling") {
    Rng rng(23);
    // identical trajectories: zero variance
    Vec score(20);
    for (double& x : score) x = rng.uniform(-1, 1);
    std::vector<std::pair<double, Vec>> same(30, {0.7, score});
    auto d = gradient_variance_bound(same, 1.0, 0.9);
    CHECK(d.variance == doctest::Approx(0.0));
    CHECK(d.holds);

    std::vector<std::pair<double, Vec>> trajs;
    for (int i = 0; i < 40; ++i) {
        Vec s(20);
        for (double& x : s) x = rng.uniform(-1, 1);
        trajs.emplace_back(rng.uniform(-1.0, 1.0), std::move(s));
    }
    auto v1 = gradient_variance_bound(trajs, 1.0, 0.9);
    CHECK(v1.holds);

    auto doubled = trajs;
    for (auto& [ret, s] : doubled) ret *= 2.0;
    auto v2 = gradient_variance_bound(doubled, 2.0, 0.9);
    CHECK(v2.variance == doctest::Approx(4.0 * v1.variance).epsilon(1e-9));
    CHECK(v2.bound == doctest::Approx(4.0 * v1.bound).epsilon(1e-12));
    CHECK(v2.holds);
}

TEST_CASE("numerical hygiene: parameters stay finite over many steps") {
    auto cfg = small_cfg(66);
    cfg.d_h = 4;
    cfg.width = 4;
    cfg.t_layers = 1;
    auto p = make_params(cfg);
    Rng rng(31);
    auto g = random_graph(cfg, 3, rng, 0);
    Vec t(g.actions.size());
    double z = 0.0;
    for (double& x : t) z += (x = rng.uniform(0.1, 1.0));
    for (double& x : t) x /= z;
    std::vector<ImitationSample> batch{{g, t}};
    for (int step = 0; step < 100000; ++step) imitation_step(p, batch, 5e-4);
    CHECK(p.all_finite());
}

TEST_CASE("checkpoint JSON round trip preserves every parameter") {
    auto cfg = small_cfg(88);
    auto p = make_params(cfg);
    auto q = checkpoint_from_json(checkpoint_to_json(p));
    double diff = 0.0;
    p.for_each_policy_param(q, [&](double& a, double& b) { diff += std::fabs(a - b); });
    nn::for_each(p.critic, q.critic, [&](double& a, double& b) { diff += std::fabs(a - b); });
    nn::for_each(p.critic_target, q.critic_target,
                 [&](double& a, double& b) { diff += std::fabs(a - b); });
    CHECK(diff == 0.0);
    CHECK(q.cfg.t_layers == cfg.t_layers);
}
