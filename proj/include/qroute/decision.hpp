#pragma once

#include <vector>

#include "qroute/belief.hpp"
#include "qroute/mathutil.hpp"
#include "qroute/netmodel.hpp"

namespace qroute::decision {

using netmodel::Action;
using netmodel::ActionType;
using netmodel::LinkId;
using netmodel::NodeId;
using netmodel::Request;

// Everything a policy may look at when scoring actions. Quantum state enters
// only through the belief; `mu` is the occupancy channel this policy trusts
// (agent bookkeeping for the belief-based stack, the reported values for
// baselines that consume point-in-time metrics).
struct Context {
    const belief::BeliefState* belief = nullptr;
    const belief::ClassicalView* view = nullptr;
    std::vector<int> mu;                 // occupancy channel chosen by the caller
    std::vector<Action> actions;         // candidate actions, deterministic order
    std::vector<Request> requests;       // open requests, oldest first
    double fresh_fidelity = 0.825;       // expected fidelity of a regenerated pair
};

// Belief-mean fidelity of a link; dead links fall back to the expected
// regenerated fidelity (they can be revived by an entangle action).
double link_ef(const Context& ctx, LinkId l);

struct PathResult {
    std::vector<LinkId> links;   // in order from source to destination
    std::vector<NodeId> nodes;   // source ... destination
    double weight = 0.0;
};

// Dijkstra over usable links (alive, or dead-physical which an entangle can
// revive) with caller-supplied per-link weights (>= 0). Throws NO_PATH.
PathResult shortest_path(const Context& ctx, NodeId source, NodeId destination,
                         const Vec& link_weight);

// Per-action relevance scores shared by the abstract-action expansion and the
// greedy baselines: actions on current request paths score higher.
Vec concrete_scores(const Context& ctx);

// Distributes abstract action-type probabilities over the concrete candidate
// actions, weighting within a type by exp(score). Types with no concrete
// candidate donate their mass to idle.
Vec expand_type_policy(const Context& ctx, const Vec& type_probs);

// Marginal type distribution implied by a concrete-action distribution.
Vec type_marginals(const Context& ctx, const Vec& action_probs);

}  // namespace qroute::decision
