#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/mathutil.hpp"
#include "qroute/nn.hpp"

namespace qroute::gnn {

enum class Aggregation { Sum, Mean };

struct GnnConfig {
    int d_node = 6;     // node feature width
    int d_edge = 6;     // edge feature width
    int d_h = 32;       // hidden dimension
    int width = 32;     // message MLP hidden width
    int t_layers = 4;
    int n_action_types = 5;
    Aggregation agg = Aggregation::Sum;
    int d_flat = 10;        // flat feature width seen by the critic
    int critic_width = 64;
    std::uint64_t init_seed = 1;
};

// Action descriptor as seen by the pairwise policy head and the critic:
// endpoints (source/destination node of the action) and type one-hot plus two
// link-level scalars (belief-mean fidelities of the involved links).
struct ActionInput {
    int type = 0;      // ActionType index
    int s_node = -1;   // -1 means "use the graph-mean embedding"
    int d_node = -1;
    Vec extra;         // [ef_a, ef_b]
};

struct GraphInput {
    int n_nodes = 0;
    std::vector<Vec> node_feats;
    struct Edge {
        int u = 0, v = 0;
        Vec feats;  // shared by both directions
    };
    std::vector<Edge> edges;
    std::vector<ActionInput> actions;
    Vec flat;  // pooled features for the critic
};

// Parameters of the whole hybrid learner: message-passing policy (theta),
// critic (psi) and its target copy.
struct GnnParams {
    GnnConfig cfg;
    nn::Affine input;              // d_node -> d_h
    std::vector<nn::Mlp> message;  // per layer: (2 d_h + d_edge) -> width -> width -> d_h
    nn::Affine gru_wz, gru_uz;     // gates: W on the aggregated message, U on h
    nn::Affine gru_wr, gru_ur;
    nn::Affine gru_wc, gru_uc;
    nn::Affine head1, head2;       // (2 d_h + types + 2) -> width -> 1
    nn::Mlp critic;                // (d_flat + types + 2) -> critic_width^2 -> 1
    nn::Mlp critic_target;

    template <typename Fn>
    void for_each_policy_param(GnnParams& other, Fn&& fn) {
        nn::for_each(input, other.input, fn);
        for (std::size_t i = 0; i < message.size(); ++i) nn::for_each(message[i], other.message[i], fn);
        nn::for_each(gru_wz, other.gru_wz, fn);
        nn::for_each(gru_uz, other.gru_uz, fn);
        nn::for_each(gru_wr, other.gru_wr, fn);
        nn::for_each(gru_ur, other.gru_ur, fn);
        nn::for_each(gru_wc, other.gru_wc, fn);
        nn::for_each(gru_uc, other.gru_uc, fn);
        nn::for_each(head1, other.head1, fn);
        nn::for_each(head2, other.head2, fn);
    }
    std::size_t policy_param_count();
    bool all_finite() const;
};

GnnParams make_params(const GnnConfig& cfg);
GnnParams zero_like(const GnnParams& p);

// Cached intermediates of one forward pass, consumed by backward().
struct ForwardTrace {
    std::vector<std::vector<Vec>> h;  // [layer 0..T][node]
    struct EdgeDir {
        int from = 0, to = 0, edge = 0;
        nn::Mlp::Trace mlp;
    };
    std::vector<std::vector<EdgeDir>> msgs;       // [layer][directed edge]
    std::vector<std::vector<Vec>> agg;            // [layer][node]
    std::vector<std::vector<Vec>> gz, gr, gc;     // gate activations per layer/node
    std::vector<Vec> head_in;                     // per action
    std::vector<Vec> head_hidden;                 // per action (tanh output)
    Vec mean_h;                                   // graph-mean embedding (for idle)
    Vec logits;
    std::vector<int> degree;
};

struct ForwardResult {
    std::vector<Vec> embeddings;
    Vec logits;
};

ForwardResult forward(const GnnParams& p, const GraphInput& g, ForwardTrace* trace = nullptr);

// Numerically stable softmax over the (already feasibility-filtered) logits.
// Throws NO_FEASIBLE_ACTION when empty.
Vec policy_distribution(const Vec& logits);

// Exact reverse-mode gradients of sum_a dlogits[a] * logit_a with respect to
// every policy parameter; accumulates into `grad`.
void backward(const GnnParams& p, const GraphInput& g, const ForwardTrace& trace,
              const Vec& dlogits, GnnParams& grad);

// One online gradient-descent step on the mean KL(target || pi) over a batch.
// Returns the pre-step mean loss.
struct ImitationSample {
    GraphInput graph;
    Vec target;  // expert distribution over graph.actions
};
double imitation_step(GnnParams& p, const std::vector<ImitationSample>& batch, double lr);
double imitation_loss(const GnnParams& p, const std::vector<ImitationSample>& batch);

// Critic forward on (flat features, action descriptor).
double critic_value(const nn::Mlp& critic, const GnnConfig& cfg, const Vec& flat,
                    const ActionInput& a, nn::Mlp::Trace* trace = nullptr);

struct ReplaySample {
    GraphInput graph;        // state (with feasible actions)
    int action = 0;          // index into graph.actions
    double reward = 0.0;
    GraphInput next_graph;   // next state (with its feasible actions)
    bool terminal = false;
};

struct ActorCriticSettings {
    double gamma = 0.95;
    double lr_q = 1e-3;
    double lr_pi = 5e-4;
    double tau_target = 0.01;
    bool critic_baseline = true;  // subtract the policy-expected Q
};

struct ActorCriticStats {
    double critic_mse = 0.0;
    double mean_q = 0.0;
    double actor_grad_norm = 0.0;
};

// Algorithm-style update: critic MSE step toward r + gamma Q_target(b', pi(b')),
// policy-gradient step on log pi * Q, then soft target update.
ActorCriticStats actor_critic_step(GnnParams& p, const std::vector<ReplaySample>& batch,
                                   const ActorCriticSettings& s);

// Flattened gradient of log pi(action | graph) w.r.t. the policy parameters.
Vec log_policy_gradient(const GnnParams& p, const GraphInput& g, int action);

struct VarianceBound {
    double variance = 0.0;   // trace of the empirical covariance of the estimator
    double bound = 0.0;      // (R_max/(1-gamma))^2 * mean ||sum_t grad log pi||^2
    bool holds = false;
};

// REINFORCE gradient variance against the policy-gradient bound, from
// per-trajectory (discounted return, summed score function) pairs.
VarianceBound gradient_variance_bound(const std::vector<std::pair<double, Vec>>& trajectories,
                                      double r_max, double gamma);

std::string checkpoint_to_json(const GnnParams& p);
GnnParams checkpoint_from_json(const std::string& text);

}  // namespace qroute::gnn
