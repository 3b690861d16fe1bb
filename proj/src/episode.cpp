#include "qroute/episode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "qroute/decision.hpp"
#include "qroute/error.hpp"

namespace qroute::harness {

using netmodel::Action;
using netmodel::ActionType;
using netmodel::LinkId;

PolicyKind policy_kind_from_string(const std::string& name) {
    if (name == "hybrid") return PolicyKind::Hybrid;
    if (name == "gnn_only") return PolicyKind::GnnOnly;
    if (name == "pomdp_only") return PolicyKind::PomdpOnly;
    if (name == "fixed_alpha") return PolicyKind::FixedAlpha;
    if (name == "fmsp") return PolicyKind::Fmsp;
    if (name == "qdr") return PolicyKind::Qdr;
    if (name == "gps") return PolicyKind::Gps;
    if (name == "dqn") return PolicyKind::Dqn;
    if (name == "flooding") return PolicyKind::Flooding;
    if (name == "random") return PolicyKind::RandomPolicy;
    throw Error(ErrorCode::INVALID_PARAM, "unknown policy " + name);
}

const char* policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::Hybrid: return "hybrid";
        case PolicyKind::GnnOnly: return "gnn_only";
        case PolicyKind::PomdpOnly: return "pomdp_only";
        case PolicyKind::FixedAlpha: return "fixed_alpha";
        case PolicyKind::Fmsp: return "fmsp";
        case PolicyKind::Qdr: return "qdr";
        case PolicyKind::Gps: return "gps";
        case PolicyKind::Dqn: return "dqn";
        case PolicyKind::Flooding: return "flooding";
        case PolicyKind::RandomPolicy: return "random";
    }
    return "?";
}

std::string PolicyBundle::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["has_planner"] = has_planner;
    j["has_gnn"] = has_gnn;
    j["has_dqn"] = has_dqn;
    if (has_planner) {
        j["clusters"] = nlohmann::json::parse(aggregate::to_json(clusters));
        j["mdp"] = nlohmann::json::parse(planner::to_json(mdp));
        j["values"] = nlohmann::json::parse(planner::to_json(values, mdp.n_actions));
    }
    if (has_gnn) j["gnn"] = nlohmann::json::parse(gnn::checkpoint_to_json(net));
    if (has_dqn) j["dqn"] = nlohmann::json::parse(baselines::to_json(dqn));
    return j.dump();
}

PolicyBundle PolicyBundle::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PolicyBundle b;
    b.has_planner = j.at("has_planner").get<bool>();
    b.has_gnn = j.at("has_gnn").get<bool>();
    b.has_dqn = j.at("has_dqn").get<bool>();
    if (b.has_planner) {
        b.clusters = aggregate::cluster_set_from_json(j.at("clusters").dump());
        const auto& jm = j.at("mdp");
        b.mdp.n_states = jm.at("n_states").get<int>();
        b.mdp.n_actions = jm.at("n_actions").get<int>();
        b.mdp.gamma = jm.at("gamma").get<double>();
        b.mdp.trans = jm.at("trans").get<Vec>();
        b.mdp.reward = jm.at("reward").get<Vec>();
        b.mdp.visited = jm.at("visited").get<std::vector<char>>();
        const auto& jv = j.at("values");
        b.values.v = jv.at("v").get<Vec>();
        b.values.q = jv.at("q").get<Vec>();
        b.values.iterations = jv.at("iterations").get<int>();
        b.values.residual = jv.at("residual").get<double>();
    }
    if (b.has_gnn) b.net = gnn::checkpoint_from_json(j.at("gnn").dump());
    if (b.has_dqn) b.dqn = baselines::dqn_from_json(j.at("dqn").dump());
    return b;
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ns() const {
        return std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

int sample_index(const Vec& dist, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(dist.size()) - 1;
}

}  // namespace

// Per-episode state and the per-step pipeline. Public behavior is the
// run_episode free function below.
struct EpisodeEngine {
    const Scenario& sc;
    const PolicyBundle& bundle;
    PolicyKind kind;
    RunOptions opt;

    netmodel::NetworkGraph net;
    Vec base_gamma;
    belief::BeliefState bel;
    belief::BinGrid grid;
    std::vector<netmodel::Request> open_requests;
    std::vector<std::vector<double>> demand;
    Rng stream_req, stream_policy, stream_obs;
    hybrid::TrustState trust;
    double fresh_fidelity = 0.825;

    EpisodeRecord rec;
    Vec decision_times;
    Vec last_pi_pomdp, last_pi_gnn;  // per-step components exposed to trainer hooks

    EpisodeEngine(const Scenario& s, const PolicyBundle& b, PolicyKind k, std::uint64_t seed,
                  const RunOptions& o)
        : sc(s), bundle(b), kind(k), opt(o) {
        net = netmodel::build_network(sc.topology, sc.n_nodes, sc.topo_params, seed);
        net.params = sc.net_params;
        for (const auto& l : net.links) base_gamma.push_back(l.decay_rate);
        grid = belief::BinGrid{sc.belief_bins};
        const auto view = belief::make_classical_view(net);
        bel = belief::init_belief(view, grid,
                                  sc.fidelity_range_prior ? belief::PriorKind::FidelityRange
                                                          : belief::PriorKind::Uniform,
                                  sc.topo_params.f_min, sc.topo_params.f_max);
        demand = sc.demand_matrix();
        stream_req = Rng(derive_seed(seed, 1, 21));
        stream_policy = Rng(derive_seed(seed, 2, 21));
        stream_obs = Rng(derive_seed(seed, 3, 21));
        trust.kappa_alpha = sc.trust_kappa;
        trust.c0 = sc.trust_c0;
        fresh_fidelity = 0.5 * (sc.net_params.entangle_f_min + sc.net_params.entangle_f_max);
        rec.summary.seed = seed;
        rec.summary.horizon = sc.horizon;
    }

    bool is_baseline() const {
        return kind == PolicyKind::Fmsp || kind == PolicyKind::Qdr || kind == PolicyKind::Gps ||
               kind == PolicyKind::Dqn || kind == PolicyKind::Flooding ||
               kind == PolicyKind::RandomPolicy;
    }

    Vec prior_fresh() const {
        return belief::prior_distribution(grid, belief::PriorKind::FidelityRange,
                                          sc.net_params.entangle_f_min, sc.net_params.entangle_f_max);
    }

    gnn::GraphInput build_graph_input(const belief::ClassicalView& view,
                                      const decision::Context& ctx, const Vec& flat) const {
        gnn::GraphInput g;
        g.n_nodes = view.n_nodes;
        g.node_feats = aggregate::node_feature_matrix(bel, view);
        for (const auto& m : view.links) {
            const bool usable = m.alive || !m.is_virtual;
            if (!usable) continue;
            gnn::GraphInput::Edge e;
            e.u = m.u;
            e.v = m.v;
            double ef = fresh_fidelity, var = 0.02;
            if (m.alive && bel.has(m.id)) {
                ef = belief::expected_fidelity(bel.grid, bel.dist(m.id));
                var = belief::fidelity_variance(bel.grid, bel.dist(m.id));
            }
            e.feats = {ef, var, std::log(std::max(ef, 1e-6)), m.decay_rate, m.pur_gain,
                       m.t2_ms / 10.0};
            g.edges.push_back(std::move(e));
        }
        for (const auto& a : ctx.actions) {
            gnn::ActionInput ai;
            ai.type = static_cast<int>(a.type);
            switch (a.type) {
                case ActionType::Idle:
                    break;
                case ActionType::Entangle:
                case ActionType::Purify:
                case ActionType::Release: {
                    const auto& m = view.links[a.link_a];
                    ai.s_node = m.u;
                    ai.d_node = m.v;
                    const double ef = decision::link_ef(ctx, a.link_a);
                    ai.extra = {ef, ef};
                    break;
                }
                case ActionType::Swap: {
                    const auto& m1 = view.links[a.link_a];
                    const auto& m2 = view.links[a.link_b];
                    ai.s_node = m1.u == a.via ? m1.v : m1.u;
                    ai.d_node = m2.u == a.via ? m2.v : m2.u;
                    ai.extra = {decision::link_ef(ctx, a.link_a), decision::link_ef(ctx, a.link_b)};
                    break;
                }
            }
            g.actions.push_back(std::move(ai));
        }
        g.flat = flat;
        return g;
    }

    Vec planner_policy(const decision::Context& ctx, const Vec& flat) const {
        const Vec type_probs = planner::pomdp_policy(bundle.values, bundle.clusters, flat,
                                                     netmodel::kNumActionTypes,
                                                     sc.planner_temperature);
        return decision::expand_type_policy(ctx, type_probs);
    }

    // Returns the action distribution actually sampled from, filling the
    // per-step diagnostics.
    Vec compute_policy(const decision::Context& ctx, const belief::ClassicalView& view,
                       StepRecord& step, double& gnn_ns, double& planner_ns, bool& planner_called) {
        gnn_ns = planner_ns = 0.0;
        planner_called = false;
        switch (kind) {
            case PolicyKind::Fmsp:
                return baselines::fmsp_policy(ctx);
            case PolicyKind::Qdr:
                return baselines::qdr_policy(ctx);
            case PolicyKind::Gps:
                return baselines::gps_policy(ctx);
            case PolicyKind::Flooding:
                return baselines::flooding_policy(ctx, 4);
            case PolicyKind::RandomPolicy:
                return Vec(ctx.actions.size(), 1.0 / ctx.actions.size());
            case PolicyKind::Dqn: {
                const auto f = aggregate::featurize(bel, view, sc.feature_dim);
                return baselines::dqn_policy(bundle.dqn, ctx, f.values, 0.25);
            }
            default:
                break;
        }

        const auto flat = aggregate::featurize(bel, view, sc.feature_dim).values;

        if (kind == PolicyKind::PomdpOnly) {
            Timer t;
            const Vec pi = planner_policy(ctx, flat);
            planner_ns = t.ns();
            planner_called = true;
            step.alpha = 0.0;
            last_pi_pomdp = pi;
            return pi;
        }

        // GNN forward (all remaining kinds need it)
        Timer tg;
        const auto graph = build_graph_input(view, ctx, flat);
        const auto out = gnn::forward(bundle.net, graph);
        Vec pi_gnn = gnn::policy_distribution(out.logits);
        gnn_ns = tg.ns();
        last_pi_gnn = pi_gnn;

        if (kind == PolicyKind::GnnOnly) {
            step.alpha = 1.0;
            return pi_gnn;
        }

        if (kind == PolicyKind::Hybrid && sc.lazy_planner_gating && !opt.alpha_override) {
            // mixture sampling with a stale trust estimate: with probability
            // alpha we act on the learned policy without invoking the planner
            const double alpha_hat = trust.last_alpha;
            if (stream_policy.uniform() < alpha_hat) {
                step.alpha = alpha_hat;
                step.kl = trust.last_kl;
                return pi_gnn;
            }
            Timer tp;
            const Vec pi_pomdp = planner_policy(ctx, flat);
            planner_ns = tp.ns();
            planner_called = true;
            last_pi_pomdp = pi_pomdp;
            const double kl = hybrid::kl_divergence(pi_pomdp, pi_gnn);
            trust.update(kl);
            step.alpha = alpha_hat;
            step.kl = kl;
            return pi_pomdp;
        }

        Timer tp;
        const Vec pi_pomdp = planner_policy(ctx, flat);
        planner_ns = tp.ns();
        planner_called = true;
        last_pi_pomdp = pi_pomdp;
        const double kl = hybrid::kl_divergence(pi_pomdp, pi_gnn);
        double alpha;
        if (kind == PolicyKind::FixedAlpha) {
            alpha = opt.fixed_alpha;
        } else if (opt.alpha_override) {
            alpha = *opt.alpha_override;
        } else {
            alpha = trust.update(kl);
        }
        step.alpha = alpha;
        step.kl = kl;
        return hybrid::fuse(pi_gnn, pi_pomdp, alpha);
    }

    void belief_after_action(const Action& a, const netmodel::ActionOutcome& outcome) {
        if (!outcome.executed) return;
        switch (a.type) {
            case ActionType::Idle:
                break;
            case ActionType::Purify:
                if (bel.has(a.link_a)) {
                    if (outcome.success) {
                        const auto k = belief::purify_kernel(grid, net.links[a.link_a].pur_gain);
                        bel.dist(a.link_a) = belief::apply_kernel(bel.dist(a.link_a), k);
                    }
                }
                break;
            case ActionType::Entangle:
                if (outcome.success) {
                    if (static_cast<int>(bel.link_dist.size()) <= a.link_a)
                        bel.link_dist.resize(a.link_a + 1);
                    bel.link_dist[a.link_a] = prior_fresh();
                }
                break;
            case ActionType::Swap: {
                Vec composed;
                if (bel.has(a.link_a) && bel.has(a.link_b))
                    composed = belief::swap_compose(grid, bel.dist(a.link_a), bel.dist(a.link_b));
                if (net.links[a.link_a].pairs == 0) bel.link_dist[a.link_a].clear();
                if (net.links[a.link_b].pairs == 0) bel.link_dist[a.link_b].clear();
                const LinkId nl = outcome.new_link;
                if (nl >= 0 && net.links[nl].alive) {
                    if (static_cast<int>(bel.link_dist.size()) <= nl) bel.link_dist.resize(nl + 1);
                    bel.link_dist[nl] = composed.empty() ? prior_fresh() : composed;
                    // survival conditioning: the product passed the kill check
                    condition_on_survival(nl);
                }
                break;
            }
            case ActionType::Release:
                if (net.links[a.link_a].pairs == 0 && bel.has(a.link_a))
                    bel.link_dist[a.link_a].clear();
                break;
        }
    }

    void condition_on_survival(LinkId l) {
        if (!bel.has(l)) return;
        auto& d = bel.dist(l);
        double kept = 0.0;
        for (int i = 0; i < grid.bins; ++i)
            if (grid.center(i) >= sc.net_params.kill_threshold) kept += d[i];
        if (kept < 1e-12) return;  // contradictory; keep the prediction
        for (int i = 0; i < grid.bins; ++i)
            d[i] = grid.center(i) >= sc.net_params.kill_threshold ? d[i] / kept : 0.0;
    }

    void belief_predict_decay() {
        for (LinkId l = 0; l < net.link_count(); ++l) {
            if (!bel.has(l)) continue;
            if (!net.links[l].alive) {
                bel.link_dist[l].clear();
                continue;
            }
            const auto k = belief::decay_kernel(grid, net.links[l].decay_rate, sc.dt_ms, 0.0);
            bel.dist(l) = belief::apply_kernel(bel.dist(l), k);
            condition_on_survival(l);
        }
    }

    void run() {
        rec.steps.reserve(sc.horizon);
        int closed_requests = 0;
        double fidelity_sum = 0.0;
        Vec mu_fracs;
        for (int t = 0; t < sc.horizon; ++t) {
            StepRecord step;
            step.t = t;

            // drift: shared additive offset on every link's decay rate
            const double offset = drift_offset(sc.drift, t, sc.horizon);
            for (LinkId l = 0; l < net.link_count(); ++l)
                net.links[l].decay_rate =
                    std::max(1e-4, (l < static_cast<int>(base_gamma.size()) ? base_gamma[l]
                                                                            : base_gamma.back()) +
                                       offset);

            // request arrivals, expiry
            auto fresh = netmodel::generate_requests(demand, t, sc.request_min_fidelity,
                                                     sc.request_deadline, stream_req);
            step.requests_new = static_cast<int>(fresh.size());
            rec.summary.requests_issued += step.requests_new;
            for (auto& r : fresh) open_requests.push_back(r);
            for (auto it = open_requests.begin(); it != open_requests.end();) {
                if (it->deadline < t) {
                    rec.summary.expired += 1;
                    step.expired_now += 1;
                    ++closed_requests;
                    it = open_requests.erase(it);
                } else {
                    ++it;
                }
            }

            // classical views and the candidate action set
            auto view = belief::make_classical_view(net);
            decision::Context ctx;
            ctx.belief = &bel;
            ctx.view = &view;
            ctx.mu = is_baseline() ? view.mu_reported : view.mu_ledger;
            ctx.requests = open_requests;
            ctx.fresh_fidelity = fresh_fidelity;
            ctx.actions = netmodel::enumerate_actions(net, ctx.mu);

            belief::ClassicalView policy_view = view;
            if (is_baseline()) policy_view.mu_ledger = view.mu_reported;

            Timer decision_timer;
            double gnn_ns = 0.0, planner_ns = 0.0;
            bool planner_called = false;
            last_pi_pomdp.clear();
            last_pi_gnn.clear();
            const Vec pi = compute_policy(ctx, policy_view, step, gnn_ns, planner_ns, planner_called);
            int choice = sample_index(pi, stream_policy);
            if (opt.hook && opt.hook->choose) {
                const int forced = opt.hook->choose(ctx, pi, stream_policy);
                if (forced >= 0 && forced < static_cast<int>(ctx.actions.size())) choice = forced;
            }
            step.decision_ns = decision_timer.ns();
            HookTransition hook_tr;
            if (opt.hook && opt.hook->on_transition) {
                hook_tr.flat_before = aggregate::featurize(bel, policy_view, sc.feature_dim).values;
                hook_tr.action_index = choice;
                hook_tr.action_type = static_cast<int>(ctx.actions[choice].type);
                hook_tr.pi_pomdp = last_pi_pomdp;
                hook_tr.pi_gnn = last_pi_gnn;
                if (opt.hook->want_graphs)
                    hook_tr.g_before = build_graph_input(policy_view, ctx, hook_tr.flat_before);
            }
            rec.summary.mean_gnn_ms += gnn_ns * 1e-6;
            rec.summary.mean_planner_ms += planner_ns * 1e-6;
            rec.summary.planner_call_fraction += planner_called ? 1.0 : 0.0;

            const Action action = ctx.actions[choice];
            step.action_type = static_cast<int>(action.type);
            step.link_a = action.link_a;
            step.link_b = action.link_b;
            step.via = action.via;

            const auto outcome = netmodel::apply_action(net, action);
            step.executed = outcome.executed;
            step.action_success = outcome.success;
            if (!outcome.executed) rec.summary.violations += 1;

            // adversary strikes after the action, before observation
            if (sc.adversary_period > 0 && t % sc.adversary_period == 0 &&
                sc.adversary.target_selection != netmodel::AdversaryTarget::None)
                netmodel::apply_adversary(net, sc.adversary);

            const auto obs =
                netmodel::observe(net, outcome.touched, sc.g_flip, sc.obs_threshold, stream_obs);
            std::ostringstream obs_str;
            for (const auto& sym : obs.symbols) obs_str << (sym.high ? "H@" : "L@") << sym.link << " ";
            step.observation = obs_str.str();

            belief_after_action(action, outcome);
            for (const auto& sym : obs.symbols)
                if (bel.has(sym.link) && net.links[sym.link].alive)
                    bel.dist(sym.link) = belief::bayes_update(bel.dist(sym.link), grid, sym.high,
                                                              sc.obs_threshold, sc.g_flip);

            // physical decoherence, filter prediction, dead-pair collection
            netmodel::step_decoherence(net, sc.dt_ms);
            belief_predict_decay();
            for (LinkId l = 0; l < net.link_count(); ++l)
                while (!net.links[l].alive && net.links[l].pairs > 0) netmodel::apply_release(net, l);

            // deliveries: belief-gated, physically verified
            for (auto it = open_requests.begin(); it != open_requests.end();) {
                const LinkId l = net.find_link(it->source, it->destination);
                bool delivered = false;
                if (l >= 0 && net.links[l].pairs >= 1 && bel.has(l) &&
                    belief::expected_fidelity(bel, l) >= it->min_fidelity) {
                    const double f = netmodel::apply_delivery(net, l);
                    if (!net.links[l].alive && bel.has(l)) bel.link_dist[l].clear();
                    delivered = true;
                    ++closed_requests;
                    if (f >= it->min_fidelity) {
                        step.deliveries_ok += 1;
                        step.fidelity_sum += f;
                        fidelity_sum += f;
                    } else {
                        step.deliveries_low += 1;
                    }
                }
                it = delivered ? open_requests.erase(it) : ++it;
            }
            rec.summary.delivered_ok += step.deliveries_ok;
            rec.summary.delivered_low += step.deliveries_low;

            // reward: verified deliveries minus the worst-link dephasing proxy
            double noise_proxy = 0.0;
            for (const auto& l : net.links)
                if (l.alive)
                    noise_proxy = std::max(noise_proxy, 1.0 - std::exp(-2.0 * sc.dt_ms / l.t2_ms));
            step.reward = step.deliveries_ok - sc.reward_noise_penalty * noise_proxy;
            rec.summary.total_reward += step.reward;

            step.mu_fraction =
                static_cast<double>(net.total_occupancy()) / std::max(1, net.total_capacity());
            mu_fracs.push_back(step.mu_fraction);
            step.belief_err = belief::belief_error(bel, net);
            rec.summary.mean_belief_error += step.belief_err;
            rec.summary.mean_alpha += step.alpha;
            rec.summary.mean_kl += step.kl;
            step.belief_hash = bel.hash();
            decision_times.push_back(step.decision_ns);

            if (opt.hook && opt.hook->on_transition) {
                auto view_after = belief::make_classical_view(net);
                if (is_baseline()) view_after.mu_ledger = view_after.mu_reported;
                hook_tr.flat_after = aggregate::featurize(bel, view_after, sc.feature_dim).values;
                hook_tr.reward = step.reward;
                hook_tr.terminal = t + 1 >= sc.horizon;
                if (opt.hook->want_graphs) {
                    decision::Context ctx_after;
                    ctx_after.belief = &bel;
                    ctx_after.view = &view_after;
                    ctx_after.mu = view_after.mu_ledger;
                    ctx_after.requests = open_requests;
                    ctx_after.fresh_fidelity = fresh_fidelity;
                    ctx_after.actions = netmodel::enumerate_actions(net, ctx_after.mu);
                    hook_tr.g_after = build_graph_input(view_after, ctx_after, hook_tr.flat_after);
                }
                opt.hook->on_transition(std::move(hook_tr));
            }

            bel.step = t + 1;
            if (opt.keep_steps) rec.steps.push_back(std::move(step));
        }

        auto& s = rec.summary;
        const double n = std::max(1, sc.horizon);
        s.delivery_rate = s.requests_issued > 0
                              ? static_cast<double>(s.delivered_ok) / s.requests_issued
                              : 0.0;
        s.avg_fidelity = s.delivered_ok > 0 ? fidelity_sum / s.delivered_ok : 0.0;
        s.mean_mu_fraction = mean(mu_fracs);
        s.peak_mu_fraction = mu_fracs.empty() ? 0.0 : *std::max_element(mu_fracs.begin(), mu_fracs.end());
        s.deadline_ok_rate =
            closed_requests > 0 ? static_cast<double>(s.delivered_ok) / closed_requests : 1.0;
        s.mean_decision_ms = mean(decision_times) * 1e-6;
        s.median_decision_ms = median(decision_times) * 1e-6;
        s.mean_gnn_ms /= n;
        s.mean_planner_ms /= n;
        s.planner_call_fraction /= n;
        s.mean_alpha /= n;
        s.mean_kl /= n;
        s.mean_belief_error /= n;
    }
};

EpisodeRecord run_episode(const Scenario& sc, const PolicyBundle& bundle, PolicyKind kind,
                          std::uint64_t seed, const RunOptions& opt) {
    EpisodeEngine engine(sc, bundle, kind, seed, opt);
    engine.run();
    return engine.rec;
}

EpisodeSummary summarize_steps(const EpisodeRecord& rec) {
    EpisodeSummary s;
    s.seed = rec.summary.seed;
    s.horizon = rec.summary.horizon;
    Vec mu, times;
    double fidelity_sum = 0.0;
    for (const auto& st : rec.steps) {
        s.requests_issued += st.requests_new;
        s.delivered_ok += st.deliveries_ok;
        s.delivered_low += st.deliveries_low;
        s.expired += st.expired_now;
        fidelity_sum += st.fidelity_sum;
        s.total_reward += st.reward;
        if (!st.executed) s.violations += 1;
        s.mean_alpha += st.alpha;
        s.mean_kl += st.kl;
        s.mean_belief_error += st.belief_err;
        mu.push_back(st.mu_fraction);
        times.push_back(st.decision_ns);
    }
    const double n = std::max<std::size_t>(1, rec.steps.size());
    s.delivery_rate =
        s.requests_issued > 0 ? static_cast<double>(s.delivered_ok) / s.requests_issued : 0.0;
    s.avg_fidelity = s.delivered_ok > 0 ? fidelity_sum / s.delivered_ok : 0.0;
    const int closed = s.delivered_ok + s.delivered_low + s.expired;
    s.deadline_ok_rate = closed > 0 ? static_cast<double>(s.delivered_ok) / closed : 1.0;
    s.mean_mu_fraction = mean(mu);
    s.peak_mu_fraction = mu.empty() ? 0.0 : *std::max_element(mu.begin(), mu.end());
    s.mean_decision_ms = mean(times) * 1e-6;
    s.median_decision_ms = median(times) * 1e-6;
    s.mean_alpha /= n;
    s.mean_kl /= n;
    s.mean_belief_error /= n;
    return s;
}

std::uint64_t EpisodeRecord::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& st : steps) {
        h = fnv1a(&st.t, sizeof(st.t), h);
        h = fnv1a(&st.belief_hash, sizeof(st.belief_hash), h);
        h = fnv1a(&st.action_type, sizeof(st.action_type), h);
        h = fnv1a(&st.link_a, sizeof(st.link_a), h);
        h = fnv1a(&st.link_b, sizeof(st.link_b), h);
        h = fnv1a(&st.reward, sizeof(st.reward), h);
        h = fnv1a(&st.alpha, sizeof(st.alpha), h);
        h = fnv1a(&st.kl, sizeof(st.kl), h);
        h = fnv1a(st.observation.data(), st.observation.size(), h);
        h = fnv1a(&st.deliveries_ok, sizeof(st.deliveries_ok), h);
        h = fnv1a(&st.mu_fraction, sizeof(st.mu_fraction), h);
    }
    h = fnv1a(&summary.total_reward, sizeof(summary.total_reward), h);
    h = fnv1a(&summary.delivered_ok, sizeof(summary.delivered_ok), h);
    return h;
}

std::string EpisodeRecord::step_json(int index) const {
    const auto& st = steps.at(index);
    nlohmann::json j;
    j["t"] = st.t;
    j["belief_hash"] = st.belief_hash;
    j["action"] = {{"type", netmodel::action_type_name(static_cast<ActionType>(st.action_type))},
                   {"link_a", st.link_a},
                   {"link_b", st.link_b},
                   {"via", st.via},
                   {"executed", st.executed},
                   {"success", st.action_success}};
    j["obs"] = st.observation;
    j["reward"] = st.reward;
    j["alpha"] = st.alpha;
    j["kl"] = st.kl;
    j["decision_ms"] = st.decision_ns * 1e-6;
    j["deliveries_ok"] = st.deliveries_ok;
    j["deliveries_low"] = st.deliveries_low;
    j["requests_new"] = st.requests_new;
    j["mu_fraction"] = st.mu_fraction;
    j["belief_error"] = st.belief_err;
    return j.dump();
}

std::string summary_csv_header() {
    return "seed,delivery_rate,avg_fidelity,decision_time_ms,mem_occupancy_pct,total_reward,"
           "delivered_ok,delivered_low,expired,requests_issued,violations,peak_mem_pct,"
           "mean_alpha,mean_kl,belief_error,deadline_ok_rate";
}

std::string summary_csv_row(const EpisodeSummary& s) {
    std::ostringstream os;
    os.precision(10);
    os << s.seed << ',' << s.delivery_rate << ',' << s.avg_fidelity << ',' << s.median_decision_ms
       << ',' << s.mean_mu_fraction * 100.0 << ',' << s.total_reward << ',' << s.delivered_ok << ','
       << s.delivered_low << ',' << s.expired << ',' << s.requests_issued << ',' << s.violations
       << ',' << s.peak_mu_fraction * 100.0 << ',' << s.mean_alpha << ',' << s.mean_kl << ','
       << s.mean_belief_error << ',' << s.deadline_ok_rate;
    return os.str();
}

std::string trust_trace_header() { return "t,KL,alpha"; }

}  // namespace qroute::harness
