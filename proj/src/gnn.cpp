#include "qroute/gnn.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "qroute/error.hpp"

namespace qroute::gnn {

namespace {

inline void sigmoid_inplace(Vec& v) {
    for (double& x : v) x = sigmoid(x);
}

Vec concat3(const Vec& a, const Vec& b, const Vec& c) {
    Vec out;
    out.reserve(a.size() + b.size() + c.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    out.insert(out.end(), c.begin(), c.end());
    return out;
}

Vec head_input(const GnnConfig& cfg, const std::vector<Vec>& h, const Vec& mean_h,
               const ActionInput& a) {
    const Vec& hs = a.s_node >= 0 ? h[a.s_node] : mean_h;
    const Vec& hd = a.d_node >= 0 ? h[a.d_node] : mean_h;
    Vec in;
    in.reserve(2 * cfg.d_h + cfg.n_action_types + 2);
    in.insert(in.end(), hs.begin(), hs.end());
    in.insert(in.end(), hd.begin(), hd.end());
    for (int t = 0; t < cfg.n_action_types; ++t) in.push_back(t == a.type ? 1.0 : 0.0);
    for (int i = 0; i < 2; ++i) in.push_back(i < static_cast<int>(a.extra.size()) ? a.extra[i] : 0.0);
    return in;
}

Vec critic_input(const GnnConfig& cfg, const Vec& flat, const ActionInput& a) {
    Vec in;
    in.reserve(cfg.d_flat + cfg.n_action_types + 2);
    for (int i = 0; i < cfg.d_flat; ++i)
        in.push_back(i < static_cast<int>(flat.size()) ? flat[i] : 0.0);
    for (int t = 0; t < cfg.n_action_types; ++t) in.push_back(t == a.type ? 1.0 : 0.0);
    for (int i = 0; i < 2; ++i) in.push_back(i < static_cast<int>(a.extra.size()) ? a.extra[i] : 0.0);
    return in;
}

double clip_gradients(GnnParams& grad, GnnParams& scratch, double max_norm) {
    double sq = 0.0;
    grad.for_each_policy_param(scratch, [&](double& g, double&) { sq += g * g; });
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        grad.for_each_policy_param(scratch, [&](double& g, double&) { g *= s; });
    }
    return norm;
}

}  // namespace

std::size_t GnnParams::policy_param_count() {
    std::size_t n = 0;
    for_each_policy_param(*this, [&](double&, double&) { ++n; });
    return n;
}

bool GnnParams::all_finite() const {
    bool ok = true;
    auto& self = const_cast<GnnParams&>(*this);
    self.for_each_policy_param(self, [&](double& w, double&) { ok = ok && std::isfinite(w); });
    nn::for_each(self.critic, self.critic, [&](double& w, double&) { ok = ok && std::isfinite(w); });
    return ok;
}

GnnParams make_params(const GnnConfig& cfg) {
    GnnParams p;
    p.cfg = cfg;
    Rng rng(derive_seed(cfg.init_seed, 0, 3));
    p.input = nn::Affine(cfg.d_h, cfg.d_node);
    p.input.init(rng);
    const int msg_in = 2 * cfg.d_h + cfg.d_edge;
    p.message.resize(cfg.t_layers);
    for (auto& m : p.message) {
        m = nn::Mlp(msg_in, cfg.width, cfg.d_h);
        m.init(rng);
    }
    auto gate = [&](nn::Affine& w, nn::Affine& u) {
        w = nn::Affine(cfg.d_h, cfg.d_h);
        w.init(rng);
        u = nn::Affine(cfg.d_h, cfg.d_h);
        u.init(rng);
    };
    gate(p.gru_wz, p.gru_uz);
    gate(p.gru_wr, p.gru_ur);
    gate(p.gru_wc, p.gru_uc);
    p.head1 = nn::Affine(cfg.width, 2 * cfg.d_h + cfg.n_action_types + 2);
    p.head1.init(rng);
    p.head2 = nn::Affine(1, cfg.width);
    p.head2.init(rng);
    p.critic = nn::Mlp(cfg.d_flat + cfg.n_action_types + 2, cfg.critic_width, 1);
    p.critic.init(rng);
    p.critic_target = p.critic;
    return p;
}

GnnParams zero_like(const GnnParams& p) {
    GnnParams z = p;
    z.for_each_policy_param(z, [](double& w, double&) { w = 0.0; });
    z.critic.zero();
    z.critic_target.zero();
    return z;
}

ForwardResult forward(const GnnParams& p, const GraphInput& g, ForwardTrace* trace) {
    const auto& cfg = p.cfg;
    ForwardTrace local;
    ForwardTrace& t = trace ? *trace : local;
    t = ForwardTrace{};
    t.h.assign(cfg.t_layers + 1, std::vector<Vec>(g.n_nodes));
    t.msgs.assign(cfg.t_layers, {});
    t.agg.assign(cfg.t_layers, std::vector<Vec>(g.n_nodes, Vec(cfg.d_h, 0.0)));
    t.gz.assign(cfg.t_layers, std::vector<Vec>(g.n_nodes));
    t.gr.assign(cfg.t_layers, std::vector<Vec>(g.n_nodes));
    t.gc.assign(cfg.t_layers, std::vector<Vec>(g.n_nodes));
    t.degree.assign(g.n_nodes, 0);
    for (const auto& e : g.edges) {
        t.degree[e.u] += 1;
        t.degree[e.v] += 1;
    }

    for (int v = 0; v < g.n_nodes; ++v) {
        Vec h0;
        p.input.forward(g.node_feats[v], h0);
        nn::tanh_inplace(h0);
        t.h[0][v] = std::move(h0);
    }

    for (int k = 0; k < cfg.t_layers; ++k) {
        auto& layer_msgs = t.msgs[k];
        layer_msgs.reserve(2 * g.edges.size());
        for (int ei = 0; ei < static_cast<int>(g.edges.size()); ++ei) {
            const auto& e = g.edges[ei];
            for (int dir = 0; dir < 2; ++dir) {
                const int from = dir == 0 ? e.u : e.v;
                const int to = dir == 0 ? e.v : e.u;
                ForwardTrace::EdgeDir ed;
                ed.from = from;
                ed.to = to;
                ed.edge = ei;
                p.message[k].forward(concat3(t.h[k][from], t.h[k][to], e.feats), ed.mlp);
                for (int i = 0; i < cfg.d_h; ++i) t.agg[k][to][i] += ed.mlp.y[i];
                layer_msgs.push_back(std::move(ed));
            }
        }
        if (cfg.agg == Aggregation::Mean)
            for (int v = 0; v < g.n_nodes; ++v)
                if (t.degree[v] > 0)
                    for (double& x : t.agg[k][v]) x /= t.degree[v];

        for (int v = 0; v < g.n_nodes; ++v) {
            const Vec& h = t.h[k][v];
            const Vec& s = t.agg[k][v];
            Vec z, tmp;
            p.gru_wz.forward(s, z);
            p.gru_uz.forward(h, tmp);
            for (int i = 0; i < cfg.d_h; ++i) z[i] += tmp[i];
            sigmoid_inplace(z);
            Vec r;
            p.gru_wr.forward(s, r);
            p.gru_ur.forward(h, tmp);
            for (int i = 0; i < cfg.d_h; ++i) r[i] += tmp[i];
            sigmoid_inplace(r);
            Vec rh(cfg.d_h);
            for (int i = 0; i < cfg.d_h; ++i) rh[i] = r[i] * h[i];
            Vec c;
            p.gru_wc.forward(s, c);
            p.gru_uc.forward(rh, tmp);
            for (int i = 0; i < cfg.d_h; ++i) c[i] += tmp[i];
            nn::tanh_inplace(c);
            Vec hn(cfg.d_h);
            for (int i = 0; i < cfg.d_h; ++i) hn[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];
            t.gz[k][v] = std::move(z);
            t.gr[k][v] = std::move(r);
            t.gc[k][v] = std::move(c);
            t.h[k + 1][v] = std::move(hn);
        }
    }

    t.mean_h.assign(cfg.d_h, 0.0);
    for (int v = 0; v < g.n_nodes; ++v)
        for (int i = 0; i < cfg.d_h; ++i) t.mean_h[i] += t.h[cfg.t_layers][v][i] / g.n_nodes;

    t.head_in.resize(g.actions.size());
    t.head_hidden.resize(g.actions.size());
    t.logits.resize(g.actions.size());
    for (std::size_t a = 0; a < g.actions.size(); ++a) {
        t.head_in[a] = head_input(cfg, t.h[cfg.t_layers], t.mean_h, g.actions[a]);
        Vec hid;
        p.head1.forward(t.head_in[a], hid);
        nn::tanh_inplace(hid);
        Vec out;
        p.head2.forward(hid, out);
        t.head_hidden[a] = std::move(hid);
        t.logits[a] = out[0];
    }

    ForwardResult res;
    res.embeddings = t.h[cfg.t_layers];
    res.logits = t.logits;
    return res;
}

Vec policy_distribution(const Vec& logits) {
    if (logits.empty()) throw Error(ErrorCode::NO_FEASIBLE_ACTION, "no feasible action to score");
    return softmax(logits);
}

void backward(const GnnParams& p, const GraphInput& g, const ForwardTrace& t, const Vec& dlogits,
              GnnParams& grad) {
    const auto& cfg = p.cfg;
    if (dlogits.size() != t.logits.size())
        throw Error(ErrorCode::SHAPE_MISMATCH, "upstream gradient does not match logits");

    std::vector<Vec> dh(g.n_nodes, Vec(cfg.d_h, 0.0));
    Vec dmean(cfg.d_h, 0.0);

    // Head
    for (std::size_t a = 0; a < g.actions.size(); ++a) {
        if (dlogits[a] == 0.0) continue;
        Vec dout{dlogits[a]};
        Vec dhid(cfg.width, 0.0);
        p.head2.backward(t.head_hidden[a], dout, grad.head2, dhid);
        nn::tanh_backward(t.head_hidden[a], dhid);
        Vec din(t.head_in[a].size(), 0.0);
        p.head1.backward(t.head_in[a], dhid, grad.head1, din);
        const auto& act = g.actions[a];
        for (int i = 0; i < cfg.d_h; ++i) {
            if (act.s_node >= 0)
                dh[act.s_node][i] += din[i];
            else
                dmean[i] += din[i];
            if (act.d_node >= 0)
                dh[act.d_node][i] += din[cfg.d_h + i];
            else
                dmean[i] += din[cfg.d_h + i];
        }
    }
    for (int v = 0; v < g.n_nodes; ++v)
        for (int i = 0; i < cfg.d_h; ++i) dh[v][i] += dmean[i] / g.n_nodes;

    // Layers in reverse
    for (int k = cfg.t_layers - 1; k >= 0; --k) {
        std::vector<Vec> dh_prev(g.n_nodes, Vec(cfg.d_h, 0.0));
        std::vector<Vec> dagg(g.n_nodes, Vec(cfg.d_h, 0.0));
        for (int v = 0; v < g.n_nodes; ++v) {
            const Vec& h = t.h[k][v];
            const Vec& z = t.gz[k][v];
            const Vec& r = t.gr[k][v];
            const Vec& c = t.gc[k][v];
            const Vec& s = t.agg[k][v];
            const Vec& dhv = dh[v];

            Vec dz(cfg.d_h), dc(cfg.d_h);
            for (int i = 0; i < cfg.d_h; ++i) {
                dz[i] = dhv[i] * (c[i] - h[i]);
                dc[i] = dhv[i] * z[i];
                dh_prev[v][i] += dhv[i] * (1.0 - z[i]);
            }
            // candidate gate
            for (int i = 0; i < cfg.d_h; ++i) dc[i] *= 1.0 - c[i] * c[i];
            Vec rh(cfg.d_h);
            for (int i = 0; i < cfg.d_h; ++i) rh[i] = r[i] * h[i];
            Vec drh(cfg.d_h, 0.0);
            p.gru_wc.backward(s, dc, grad.gru_wc, dagg[v]);
            p.gru_uc.backward(rh, dc, grad.gru_uc, drh);
            Vec dr(cfg.d_h);
            for (int i = 0; i < cfg.d_h; ++i) {
                dr[i] = drh[i] * h[i];
                dh_prev[v][i] += drh[i] * r[i];
            }
            // reset gate
            for (int i = 0; i < cfg.d_h; ++i) dr[i] *= r[i] * (1.0 - r[i]);
            p.gru_wr.backward(s, dr, grad.gru_wr, dagg[v]);
            p.gru_ur.backward(h, dr, grad.gru_ur, dh_prev[v]);
            // update gate
            for (int i = 0; i < cfg.d_h; ++i) dz[i] *= z[i] * (1.0 - z[i]);
            p.gru_wz.backward(s, dz, grad.gru_wz, dagg[v]);
            p.gru_uz.backward(h, dz, grad.gru_uz, dh_prev[v]);
        }
        if (cfg.agg == Aggregation::Mean)
            for (int v = 0; v < g.n_nodes; ++v)
                if (t.degree[v] > 0)
                    for (double& x : dagg[v]) x /= t.degree[v];

        for (const auto& ed : t.msgs[k]) {
            Vec dx;
            p.message[k].backward(ed.mlp, dagg[ed.to], grad.message[k], dx);
            for (int i = 0; i < cfg.d_h; ++i) {
                dh_prev[ed.from][i] += dx[i];
                dh_prev[ed.to][i] += dx[cfg.d_h + i];
            }
        }
        dh.swap(dh_prev);
    }

    // Input embedding
    for (int v = 0; v < g.n_nodes; ++v) {
        Vec d = dh[v];
        nn::tanh_backward(t.h[0][v], d);
        Vec dx(cfg.d_node, 0.0);
        p.input.backward(g.node_feats[v], d, grad.input, dx);
    }
}

double imitation_loss(const GnnParams& p, const std::vector<ImitationSample>& batch) {
    double loss = 0.0;
    for (const auto& s : batch) {
        const auto res = forward(p, s.graph);
        const Vec pi = policy_distribution(res.logits);
        for (std::size_t a = 0; a < pi.size(); ++a)
            if (s.target[a] > 0.0)
                loss += s.target[a] * std::log(s.target[a] / std::max(pi[a], 1e-12));
    }
    return loss / batch.size();
}

double imitation_step(GnnParams& p, const std::vector<ImitationSample>& batch, double lr) {
    GnnParams grad = zero_like(p);
    double loss = 0.0;
    for (const auto& s : batch) {
        ForwardTrace trace;
        forward(p, s.graph, &trace);
        const Vec pi = policy_distribution(trace.logits);
        Vec dlogits(pi.size());
        for (std::size_t a = 0; a < pi.size(); ++a) {
            if (s.target[a] > 0.0)
                loss += s.target[a] * std::log(s.target[a] / std::max(pi[a], 1e-12));
            dlogits[a] = (pi[a] - s.target[a]) / batch.size();
        }
        backward(p, s.graph, trace, dlogits, grad);
    }
    loss /= batch.size();
    GnnParams scratch = grad;
    clip_gradients(grad, scratch, 10.0);
    p.for_each_policy_param(grad, [&](double& w, double& g) { w -= lr * g; });
    return loss;
}

double critic_value(const nn::Mlp& critic, const GnnConfig& cfg, const Vec& flat,
                    const ActionInput& a, nn::Mlp::Trace* trace) {
    nn::Mlp::Trace local;
    nn::Mlp::Trace& t = trace ? *trace : local;
    critic.forward(critic_input(cfg, flat, a), t);
    return t.y[0];
}

ActorCriticStats actor_critic_step(GnnParams& p, const std::vector<ReplaySample>& batch,
                                   const ActorCriticSettings& s) {
    if (batch.empty()) throw Error(ErrorCode::INVALID_PARAM, "empty replay batch");
    const auto& cfg = p.cfg;
    ActorCriticStats stats;

    // Critic targets y = r + gamma Q_target(b', pi_theta(b')).
    Vec targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& sample = batch[i];
        double bootstrap = 0.0;
        if (!sample.terminal && !sample.next_graph.actions.empty()) {
            const auto next = forward(p, sample.next_graph);
            const Vec pi = policy_distribution(next.logits);
            for (std::size_t a = 0; a < pi.size(); ++a)
                bootstrap += pi[a] * critic_value(p.critic_target, cfg, sample.next_graph.flat,
                                                  sample.next_graph.actions[a]);
        }
        targets[i] = sample.reward + s.gamma * bootstrap;
    }

    // Critic MSE step.
    nn::Mlp critic_grad = p.critic;
    critic_grad.zero();
    double mse = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& sample = batch[i];
        nn::Mlp::Trace trace;
        const double q = critic_value(p.critic, cfg, sample.graph.flat,
                                      sample.graph.actions[sample.action], &trace);
        const double err = q - targets[i];
        mse += err * err;
        Vec dy{2.0 * err / batch.size()};
        Vec dx;
        p.critic.backward(trace, dy, critic_grad, dx);
    }
    stats.critic_mse = mse / batch.size();
    double csq = 0.0;
    nn::for_each(critic_grad, critic_grad, [&](double& g, double&) { csq += g * g; });
    const double cnorm = std::sqrt(csq);
    if (cnorm > 10.0) nn::for_each(critic_grad, critic_grad, [&](double& g, double&) { g *= 10.0 / cnorm; });
    nn::for_each(p.critic, critic_grad, [&](double& w, double& g) { w -= s.lr_q * g; });

    // Actor ascent on log pi * (Q - baseline).
    GnnParams grad = zero_like(p);
    for (const auto& sample : batch) {
        ForwardTrace trace;
        forward(p, sample.graph, &trace);
        const Vec pi = policy_distribution(trace.logits);
        const double q_a =
            critic_value(p.critic, cfg, sample.graph.flat, sample.graph.actions[sample.action]);
        stats.mean_q += q_a / batch.size();
        double baseline = 0.0;
        if (s.critic_baseline)
            for (std::size_t a = 0; a < pi.size(); ++a)
                baseline +=
                    pi[a] * critic_value(p.critic, cfg, sample.graph.flat, sample.graph.actions[a]);
        const double adv = q_a - baseline;
        Vec dlogits(pi.size());
        for (std::size_t a = 0; a < pi.size(); ++a)
            dlogits[a] =
                ((a == static_cast<std::size_t>(sample.action) ? 1.0 : 0.0) - pi[a]) * adv /
                batch.size();
        backward(p, sample.graph, trace, dlogits, grad);
    }
    GnnParams scratch = grad;
    stats.actor_grad_norm = clip_gradients(grad, scratch, 10.0);
    p.for_each_policy_param(grad, [&](double& w, double& g) { w += s.lr_pi * g; });

    // Soft target update.
    nn::soft_update(p.critic_target, p.critic, s.tau_target);
    return stats;
}

Vec log_policy_gradient(const GnnParams& p, const GraphInput& g, int action) {
    ForwardTrace trace;
    forward(p, g, &trace);
    const Vec pi = policy_distribution(trace.logits);
    Vec dlogits(pi.size());
    for (std::size_t a = 0; a < pi.size(); ++a)
        dlogits[a] = (a == static_cast<std::size_t>(action) ? 1.0 : 0.0) - pi[a];
    GnnParams grad = zero_like(p);
    backward(p, g, trace, dlogits, grad);
    Vec flat;
    flat.reserve(1 << 12);
    grad.for_each_policy_param(grad, [&](double& gv, double&) { flat.push_back(gv); });
    return flat;
}

VarianceBound gradient_variance_bound(const std::vector<std::pair<double, Vec>>& trajectories,
                                      double r_max, double gamma) {
    VarianceBound out;
    if (trajectories.empty()) return out;
    const std::size_t dim = trajectories[0].second.size();
    Vec mean(dim, 0.0);
    double bound_sum = 0.0;
    for (const auto& [ret, score] : trajectories) {
        for (std::size_t i = 0; i < dim; ++i) mean[i] += ret * score[i] / trajectories.size();
        double sq = 0.0;
        for (double x : score) sq += x * x;
        bound_sum += sq / trajectories.size();
    }
    double var = 0.0;
    for (const auto& [ret, score] : trajectories) {
        double sq = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = ret * score[i] - mean[i];
            sq += d * d;
        }
        var += sq / trajectories.size();
    }
    out.variance = var;
    const double scale = r_max / (1.0 - gamma);
    out.bound = scale * scale * bound_sum;
    out.holds = out.variance <= out.bound + 1e-12;
    return out;
}

std::string checkpoint_to_json(const GnnParams& p) {
    nlohmann::json j;
    j["version"] = 1;
    j["cfg"] = {{"d_node", p.cfg.d_node},   {"d_edge", p.cfg.d_edge},
                {"d_h", p.cfg.d_h},         {"width", p.cfg.width},
                {"t_layers", p.cfg.t_layers}, {"n_action_types", p.cfg.n_action_types},
                {"agg", p.cfg.agg == Aggregation::Sum ? "sum" : "mean"},
                {"d_flat", p.cfg.d_flat},   {"critic_width", p.cfg.critic_width}};
    j["input"] = nn::affine_to_json(p.input);
    j["message"] = nlohmann::json::array();
    for (const auto& m : p.message) j["message"].push_back(nn::mlp_to_json(m));
    j["gru"] = {{"wz", nn::affine_to_json(p.gru_wz)}, {"uz", nn::affine_to_json(p.gru_uz)},
                {"wr", nn::affine_to_json(p.gru_wr)}, {"ur", nn::affine_to_json(p.gru_ur)},
                {"wc", nn::affine_to_json(p.gru_wc)}, {"uc", nn::affine_to_json(p.gru_uc)}};
    j["head1"] = nn::affine_to_json(p.head1);
    j["head2"] = nn::affine_to_json(p.head2);
    j["critic"] = nn::mlp_to_json(p.critic);
    j["critic_target"] = nn::mlp_to_json(p.critic_target);
    return j.dump();
}

GnnParams checkpoint_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    GnnConfig cfg;
    const auto& jc = j.at("cfg");
    cfg.d_node = jc.at("d_node").get<int>();
    cfg.d_edge = jc.at("d_edge").get<int>();
    cfg.d_h = jc.at("d_h").get<int>();
    cfg.width = jc.at("width").get<int>();
    cfg.t_layers = jc.at("t_layers").get<int>();
    cfg.n_action_types = jc.at("n_action_types").get<int>();
    cfg.agg = jc.at("agg").get<std::string>() == "sum" ? Aggregation::Sum : Aggregation::Mean;
    cfg.d_flat = jc.at("d_flat").get<int>();
    cfg.critic_width = jc.at("critic_width").get<int>();
    GnnParams p;
    p.cfg = cfg;
    p.input = nn::affine_from_json(j.at("input"));
    for (const auto& m : j.at("message")) p.message.push_back(nn::mlp_from_json(m));
    p.gru_wz = nn::affine_from_json(j.at("gru").at("wz"));
    p.gru_uz = nn::affine_from_json(j.at("gru").at("uz"));
    p.gru_wr = nn::affine_from_json(j.at("gru").at("wr"));
    p.gru_ur = nn::affine_from_json(j.at("gru").at("ur"));
    p.gru_wc = nn::affine_from_json(j.at("gru").at("wc"));
    p.gru_uc = nn::affine_from_json(j.at("gru").at("uc"));
    p.head1 = nn::affine_from_json(j.at("head1"));
    p.head2 = nn::affine_from_json(j.at("head2"));
    p.critic = nn::mlp_from_json(j.at("critic"));
    p.critic_target = nn::mlp_from_json(j.at("critic_target"));
    if (static_cast<int>(p.message.size()) != cfg.t_layers)
        throw Error(ErrorCode::SHAPE_MISMATCH, "checkpoint layer count mismatch");
    return p;
}

}  // namespace qroute::gnn
