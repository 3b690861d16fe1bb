#include "qroute/train.hpp"

#include <algorithm>
#include <cmath>

#include "qroute/error.hpp"

namespace qroute::harness {

namespace {

using netmodel::ActionType;

// samples a concrete action of the requested type via the shared expansion
int sample_of_type(const decision::Context& ctx, int type, Rng& rng) {
    Vec onehot(netmodel::kNumActionTypes, 0.0);
    onehot[type] = 1.0;
    const Vec dist = decision::expand_type_policy(ctx, onehot);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) return static_cast<int>(i);
    }
    return 0;
}

gnn::GnnConfig gnn_config(const Scenario& sc, std::uint64_t seed) {
    gnn::GnnConfig cfg;
    cfg.d_node = aggregate::kNodeFeatureDim;
    cfg.d_edge = 6;
    cfg.d_h = sc.gnn_hidden;
    cfg.width = sc.gnn_hidden;
    cfg.t_layers = sc.gnn_layers;
    cfg.d_flat = sc.feature_dim;
    cfg.critic_width = 2 * sc.gnn_hidden;
    cfg.init_seed = seed;
    return cfg;
}

}  // namespace

std::string training_curve_header() { return "step,kl_loss,critic_mse,grad_norm"; }

std::vector<planner::RolloutSample> collect_rollouts(const Scenario& sc, int episodes,
                                                     std::uint64_t seed) {
    std::vector<planner::RolloutSample> rollouts;
    PolicyBundle dummy;
    for (int e = 0; e < episodes; ++e) {
        Rng explore(derive_seed(seed, e, 31));
        StepHook hook;
        hook.choose = [&](const decision::Context& ctx, const Vec&, Rng& rng) -> int {
            // epsilon-greedy over types: uniform type or the greedy baseline
            if (explore.bernoulli(0.5)) {
                std::vector<int> present;
                for (const auto& a : ctx.actions) {
                    const int t = static_cast<int>(a.type);
                    if (std::find(present.begin(), present.end(), t) == present.end())
                        present.push_back(t);
                }
                const int type = present[explore.uniform_int(present.size())];
                return sample_of_type(ctx, type, rng);
            }
            const Vec greedy = baselines::gps_policy(ctx);
            for (std::size_t i = 0; i < greedy.size(); ++i)
                if (greedy[i] == 1.0) return static_cast<int>(i);
            return 0;
        };
        hook.on_transition = [&](HookTransition&& tr) {
            planner::RolloutSample s;
            s.features = std::move(tr.flat_before);
            s.action = tr.action_type;
            s.reward = tr.reward;
            s.next_features = std::move(tr.flat_after);
            rollouts.push_back(std::move(s));
        };
        RunOptions opt;
        opt.keep_steps = false;
        opt.hook = &hook;
        run_episode(sc, dummy, PolicyKind::Gps, sc.episode_seed(9000 + e), opt);
    }
    return rollouts;
}

void train_planner(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed) {
    auto rollouts = collect_rollouts(sc, sc.planner_rollout_episodes, seed);
    if (rollouts.empty()) throw Error(ErrorCode::EMPTY_ROLLOUTS, "no rollouts collected");
    std::vector<Vec> points;
    points.reserve(rollouts.size());
    for (const auto& r : rollouts) points.push_back(r.features);
    std::vector<Vec> distinct = points;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const int k = std::min<int>(sc.planner_clusters, static_cast<int>(distinct.size()));
    bundle.clusters = aggregate::cluster(points, k, derive_seed(seed, 1, 33));
    bundle.mdp = planner::build_cluster_mdp(bundle.clusters, rollouts, netmodel::kNumActionTypes,
                                            sc.planner_gamma);
    bundle.values = planner::value_iteration(bundle.mdp, 1e-8);
    bundle.has_planner = true;
}

void train_gnn_imitation(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed,
                         std::ostream* curve) {
    if (!bundle.has_planner)
        throw Error(ErrorCode::INVALID_PARAM, "imitation needs a trained planner expert");
    if (!bundle.has_gnn) {
        bundle.net = gnn::make_params(gnn_config(sc, seed));
        bundle.has_gnn = true;
    }

    std::vector<gnn::ImitationSample> dataset;
    Rng rng(derive_seed(seed, 2, 35));
    int grad_steps = 0;
    int round = 0;
    while (grad_steps < sc.imitation_steps) {
        // behavior anneals from expert toward the learner (DAgger-style);
        // every visited state is labeled with the expert distribution
        const double beta = std::max(0.1, 1.0 - 0.2 * round);
        StepHook hook;
        hook.want_graphs = true;
        hook.on_transition = [&](HookTransition&& tr) {
            if (tr.pi_pomdp.empty()) return;  // expert distribution unavailable
            gnn::ImitationSample s;
            s.graph = std::move(tr.g_before);
            s.target = std::move(tr.pi_pomdp);
            dataset.push_back(std::move(s));
            if (dataset.size() > static_cast<std::size_t>(sc.replay_capacity))
                dataset.erase(dataset.begin());
        };
        RunOptions opt;
        opt.keep_steps = false;
        opt.hook = &hook;
        opt.alpha_override = 1.0 - beta;  // beta-expert mixture during collection
        run_episode(sc, bundle, PolicyKind::Hybrid, sc.episode_seed(7000 + round), opt);

        const int steps_this_round = std::min(sc.imitation_steps - grad_steps,
                                              std::max(50, sc.imitation_steps / 10));
        for (int s = 0; s < steps_this_round; ++s) {
            std::vector<gnn::ImitationSample> batch;
            for (int b = 0; b < sc.batch_size; ++b)
                batch.push_back(dataset[rng.uniform_int(dataset.size())]);
            const double loss = gnn::imitation_step(bundle.net, batch, sc.learning_rate * 20.0);
            ++grad_steps;
            if (curve) (*curve) << grad_steps << ',' << loss << ",0,0\n";
        }
        ++round;
    }
}

void train_actor_critic(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed,
                        std::ostream* curve) {
    if (!bundle.has_gnn || !bundle.has_planner)
        throw Error(ErrorCode::INVALID_PARAM, "actor-critic expects planner + imitation warm start");
    std::vector<gnn::ReplaySample> replay;
    Rng rng(derive_seed(seed, 3, 37));
    gnn::ActorCriticSettings settings;
    settings.gamma = sc.planner_gamma;
    settings.lr_q = sc.learning_rate * 4.0;
    settings.lr_pi = sc.learning_rate;
    settings.tau_target = 0.01;

    int updates = 0;
    int episode = 0;
    while (updates < sc.actor_critic_steps) {
        StepHook hook;
        hook.want_graphs = true;
        hook.on_transition = [&](HookTransition&& tr) {
            gnn::ReplaySample s;
            s.graph = std::move(tr.g_before);
            s.action = tr.action_index;
            s.reward = tr.reward;
            s.next_graph = std::move(tr.g_after);
            s.terminal = tr.terminal;
            replay.push_back(std::move(s));
            if (replay.size() > static_cast<std::size_t>(sc.replay_capacity))
                replay.erase(replay.begin());

            if (replay.size() < static_cast<std::size_t>(4 * sc.batch_size)) return;
            if (updates >= sc.actor_critic_steps) return;
            std::vector<gnn::ReplaySample> batch;
            for (int b = 0; b < sc.batch_size; ++b)
                batch.push_back(replay[rng.uniform_int(replay.size())]);
            const auto stats = gnn::actor_critic_step(bundle.net, batch, settings);
            ++updates;
            if (curve)
                (*curve) << updates << ",0," << stats.critic_mse << ',' << stats.actor_grad_norm
                         << "\n";
        };
        RunOptions opt;
        opt.keep_steps = false;
        opt.hook = &hook;
        run_episode(sc, bundle, PolicyKind::Hybrid, sc.episode_seed(8000 + episode), opt);
        ++episode;
        if (episode > 200) break;  // safety valve for degenerate configs
    }
}

void train_dqn(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed) {
    bundle.dqn = baselines::DqnLite::make(sc.feature_dim, 2 * sc.gnn_hidden, seed);
    bundle.dqn.gamma = sc.planner_gamma;
    bundle.has_dqn = true;
    std::vector<baselines::DqnTransition> replay;
    Rng rng(derive_seed(seed, 4, 39));
    int updates = 0;
    int episode = 0;
    while (updates < sc.dqn_steps && episode < 300) {
        const double eps = std::max(0.1, 1.0 - 0.05 * episode);
        StepHook hook;
        hook.choose = [&](const decision::Context& ctx, const Vec&, Rng& r) -> int {
            if (rng.bernoulli(eps)) {
                std::vector<int> present;
                for (const auto& a : ctx.actions) {
                    const int t = static_cast<int>(a.type);
                    if (std::find(present.begin(), present.end(), t) == present.end())
                        present.push_back(t);
                }
                return sample_of_type(ctx, present[rng.uniform_int(present.size())], r);
            }
            return -1;  // follow the greedy DQN policy computed by the engine
        };
        hook.on_transition = [&](HookTransition&& tr) {
            baselines::DqnTransition t;
            t.flat = std::move(tr.flat_before);
            t.type = tr.action_type;
            t.reward = tr.reward;
            t.next_flat = std::move(tr.flat_after);
            t.terminal = tr.terminal;
            replay.push_back(std::move(t));
            if (replay.size() > static_cast<std::size_t>(sc.replay_capacity))
                replay.erase(replay.begin());
            if (replay.size() < static_cast<std::size_t>(4 * sc.batch_size)) return;
            if (updates >= sc.dqn_steps) return;
            std::vector<baselines::DqnTransition> batch;
            for (int b = 0; b < sc.batch_size; ++b)
                batch.push_back(replay[rng.uniform_int(replay.size())]);
            baselines::train_dqn_lite(bundle.dqn, batch, sc.learning_rate * 10.0, 0.01);
            ++updates;
        };
        RunOptions opt;
        opt.keep_steps = false;
        opt.hook = &hook;
        run_episode(sc, bundle, PolicyKind::Dqn, sc.episode_seed(8500 + episode), opt);
        ++episode;
    }
}

PolicyBundle train(const Scenario& sc, const std::string& algo, std::uint64_t seed,
                   std::ostream* curve) {
    PolicyBundle bundle;
    train_planner(sc, bundle, seed);
    if (algo == "imitation") {
        train_gnn_imitation(sc, bundle, seed, curve);
    } else if (algo == "actor_critic" || algo == "joint") {
        train_gnn_imitation(sc, bundle, seed, curve);
        train_actor_critic(sc, bundle, seed, curve);
    } else if (algo == "dqn") {
        train_dqn(sc, bundle, seed);
    } else if (algo == "all") {
        train_gnn_imitation(sc, bundle, seed, curve);
        train_actor_critic(sc, bundle, seed, curve);
        train_dqn(sc, bundle, seed);
    } else {
        throw Error(ErrorCode::INVALID_PARAM, "unknown training algo " + algo);
    }
    return bundle;
}

}  // namespace qroute::harness
