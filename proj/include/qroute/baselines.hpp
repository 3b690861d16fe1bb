#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/decision.hpp"
#include "qroute/nn.hpp"

namespace qroute::baselines {

using decision::Context;
using decision::PathResult;

// Fidelity-maximizing shortest path: Dijkstra on -log(EF); emits the next
// action realizing the best path for the oldest open request (point mass).
Vec fmsp_policy(const Context& ctx);

// The path itself (for optimality checks). Throws NO_PATH.
PathResult fmsp_path(const Context& ctx, const netmodel::Request& req);

struct QdrParams {
    double lambda_age = 0.5;
    double lambda_mem = 0.5;
};

// Quantum-aware Dijkstra: composite weight -log(EF) + la age/T2 + lm mu/m_max.
Vec qdr_policy(const Context& ctx, const QdrParams& params = {});
PathResult qdr_path(const Context& ctx, const netmodel::Request& req, const QdrParams& params = {});

// Greedy purify-and-swap: purify any below-threshold link with an auxiliary,
// otherwise the swap maximizing min(EF left, EF right); regenerates pairs when
// nothing else applies, idles as a last resort.
Vec gps_policy(const Context& ctx);

// Flooding: pump entanglement everywhere (entangle, then swap within the hop
// budget, then purify); resource-usage reference only.
Vec flooding_policy(const Context& ctx, int hop_budget);

// ---------------------------------------------------------------------------
// Flat DQN over abstract action types (same replay/target machinery as the
// graph learner, without graph structure).

struct DqnLite {
    int d_flat = 10;
    nn::Mlp q_net;        // flat features -> Q per action type
    nn::Mlp q_target;
    double gamma = 0.95;

    static DqnLite make(int d_flat, int hidden, std::uint64_t seed);
    Vec q_values(const Vec& flat) const;          // online net
    Vec q_values_target(const Vec& flat) const;
};

// Softmax(Q / t) over types expanded onto the concrete candidates.
Vec dqn_policy(const DqnLite& dqn, const Context& ctx, const Vec& flat, double t_softmax);

struct DqnTransition {
    Vec flat;
    int type = 0;
    double reward = 0.0;
    Vec next_flat;
    bool terminal = false;
};

// One DQN step: targets r + gamma max_a' Q_target(f'), MSE gradient descent,
// Polyak target update (shared soft_update arithmetic). Returns the batch MSE.
double train_dqn_lite(DqnLite& dqn, const std::vector<DqnTransition>& batch, double lr, double tau);

std::string to_json(const DqnLite& dqn);
DqnLite dqn_from_json(const std::string& text);

}  // namespace qroute::baselines
