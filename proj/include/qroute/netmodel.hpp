#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/error.hpp"
#include "qroute/rng.hpp"

namespace qroute::netmodel {

// Werner-state fidelity floor: the fully mixed two-qubit state.
constexpr double kFidelityFloor = 0.25;

using NodeId = int;
using LinkId = int;

enum class Topology { RandomGeometric, SmallWorld, Line, Grid };

struct TopologyParams {
    double radius = 0.0;        // random geometric; <= 0 selects an auto radius
    int ring_degree = 4;        // small world: even ring degree k
    double rewire_prob = 0.1;   // small world: rewiring probability
    int retry_budget = 64;      // connectivity re-sampling attempts
    // Link attribute draw ranges (Table-style simulation defaults).
    double f_min = 0.70, f_max = 0.95;
    double gamma_min = 0.01, gamma_max = 0.10;  // fidelity decay rate, per ms
    double eta_min = 0.60, eta_max = 0.90;      // purification gain coefficient
    double t2_min = 1.0, t2_max = 10.0;         // coherence time, ms
    int memory_capacity = 4;                    // qubit slots per node
};

// Simulation physics shared by all ops on one graph.
struct NetParams {
    double kappa = 0.01;          // diffusion intensity of the fidelity SDE
    double kill_threshold = 0.5;  // links below this fidelity are marked dead
    double p_pur = 0.75;          // purification success probability
    double p_entangle = 0.9;      // elementary pair generation success probability
    double entangle_f_min = 0.70, entangle_f_max = 0.95;  // fresh-pair fidelity draw
};

struct LinkState {
    NodeId u = -1, v = -1;
    double fidelity = 0.0;   // F in [0.25, 1]
    double decay_rate = 0.0; // Γ, per ms
    double pur_gain = 0.0;   // η in [0, 1]
    double t2_ms = 1.0;      // T2 > 0, ms
    int age = 0;             // steps since creation
    int pairs = 0;           // entangled pairs stored on this link
    int span = 1;            // physical hops bridged (swap products accumulate)
    bool alive = false;
    bool is_virtual = false; // created by swapping, not a physical channel

    NodeId other(NodeId n) const { return n == u ? v : u; }
    bool touches(NodeId n) const { return n == u || n == v; }
};

struct NodeState {
    int memory_capacity = 4;
    int occupancy = 0;      // μ: stored pair-halves
    int report_bias = 0;    // adversarial corruption of the *reported* occupancy
};

struct Request {
    NodeId source = -1;
    NodeId destination = -1;
    double min_fidelity = 0.5;
    int deadline = 0;   // absolute step by which delivery must happen
    int issued_at = 0;
};

enum class AdversaryTarget { None, Random, WorstLink };

struct AdversaryConfig {
    double epsilon_adv = 0.0;      // multiplicative fidelity damage, in [0, 1)
    double delta_mu_bound = 0.0;   // max |δμ| applied to reported occupancies
    AdversaryTarget target_selection = AdversaryTarget::None;
    int n_link_targets = 1;        // links hit per application (random / worst_link)
};

// Memory ledger events. Σ_v μ_v may change only through these.
enum class MemoryEvent { Store, Release, SwapConsume, PurifyConsume, Delivery };

struct LedgerEntry {
    MemoryEvent event;
    int delta;   // signed change of Σ_v μ_v
    int step;
};

struct NetworkGraph {
    std::vector<NodeState> nodes;
    std::vector<LinkState> links;
    int time = 0;
    std::uint64_t rng_seed = 0;
    Rng noise;                      // seeded stream that drives all stochastic updates
    NetParams params;
    std::vector<LedgerEntry> ledger;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int link_count() const { return static_cast<int>(links.size()); }

    int total_occupancy() const {
        int s = 0;
        for (const auto& n : nodes) s += n.occupancy;
        return s;
    }
    int total_capacity() const {
        int s = 0;
        for (const auto& n : nodes) s += n.memory_capacity;
        return s;
    }

    // Recomputes μ from stored pairs; used by the ledger audit.
    std::vector<int> recomputed_occupancy() const;

    LinkId find_link(NodeId a, NodeId b) const;  // first live link between a and b, else -1
};

// ---------------------------------------------------------------------------
// Actions (shared vocabulary across the policy stack)

enum class ActionType { Idle = 0, Entangle = 1, Purify = 2, Swap = 3, Release = 4 };
constexpr int kNumActionTypes = 5;

inline const char* action_type_name(ActionType t) {
    switch (t) {
        case ActionType::Idle: return "idle";
        case ActionType::Entangle: return "entangle";
        case ActionType::Purify: return "purify";
        case ActionType::Swap: return "swap";
        case ActionType::Release: return "release";
    }
    return "?";
}

struct Action {
    ActionType type = ActionType::Idle;
    LinkId link_a = -1;   // entangle/purify/release target; swap left link
    LinkId link_b = -1;   // swap right link
    NodeId via = -1;      // swap middle node

    bool operator==(const Action& o) const {
        return type == o.type && link_a == o.link_a && link_b == o.link_b && via == o.via;
    }
};

struct ActionOutcome {
    bool executed = false;       // false when the action was infeasible at execution time
    bool success = false;        // purification / entangle herald
    LinkId new_link = -1;        // swap product
    std::vector<LinkId> touched; // links whose quantum state the action involved
};

// ---------------------------------------------------------------------------
// Observations

struct LinkSymbol {
    LinkId link;
    bool high;   // thresholded fidelity symbol, possibly flipped by noise
};

// Discrete symbols for touched links plus noiselessly observable classical
// side information. `reported_mu` may carry adversarial bias; `true_mu` is the
// agent-side bookkeeping view (classical outcomes are heralded, so an agent
// that tracks its own store/release events knows μ exactly).
struct Observation {
    std::vector<LinkSymbol> symbols;
    std::vector<int> reported_mu;
    std::vector<int> true_mu;
    std::vector<int> link_age;    // indexed by link id; -1 for dead links
    std::vector<int> link_pairs;
};

// ---------------------------------------------------------------------------
// Operations

NetworkGraph build_network(Topology topology, int n, const TopologyParams& params, std::uint64_t seed);

// One decoherence step of dt milliseconds: exponential drift plus optional
// Euler-Maruyama diffusion, clamped to the Werner range. Ages increment and
// links falling below the kill threshold die.
void step_decoherence(NetworkGraph& g, double dt_ms);

// Consumes one auxiliary pair on `link`; on success F <- F + η(1-F).
// Returns the success herald. Throws NO_AUXILIARY_PAIR when pairs < 2.
bool apply_purification(NetworkGraph& g, LinkId link);

// Entanglement swapping at `via`: consumes one pair from each input link and
// creates a pair on a (possibly new, virtual) link between the outer nodes
// with Werner-combined fidelity. Returns the product link id.
LinkId apply_swap(NetworkGraph& g, LinkId left, LinkId right, NodeId via);

// Elementary pair generation on a physical link (also revives dead links).
// Requires a free memory slot at both endpoints. Returns the success herald.
bool apply_entangle(NetworkGraph& g, LinkId link);

// Releases one stored pair from `link` (both halves discarded).
void apply_release(NetworkGraph& g, LinkId link);

// Consumes one pair on `link` for a delivery event; returns its true fidelity.
double apply_delivery(NetworkGraph& g, LinkId link);

void apply_adversary(NetworkGraph& g, const AdversaryConfig& cfg);

std::vector<Request> generate_requests(const std::vector<std::vector<double>>& demand, int step,
                                       double min_fidelity, int deadline_steps, Rng& stream);

Observation observe(const NetworkGraph& g, const std::vector<LinkId>& touched, double g_flip,
                    double threshold, Rng& stream);

// Feasibility of an action against a classical view (pair counts + free slots).
// `mu_view` lets callers pass a possibly corrupted occupancy vector.
bool action_feasible(const NetworkGraph& g, const Action& a, const std::vector<int>& mu_view);

// Executes an action, dispatching to the ops above. Infeasible actions
// degrade to an unexecuted no-op (recorded in the outcome).
ActionOutcome apply_action(NetworkGraph& g, const Action& a);

// Deterministic enumeration of feasible actions: idle, entangle (by link id),
// purify (by link id), swap (by link-id pair), release (by link id).
std::vector<Action> enumerate_actions(const NetworkGraph& g, const std::vector<int>& mu_view);

// Werner composition for entanglement swapping.
inline double swap_fidelity(double f1, double f2) {
    return f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0;
}

inline double purification_fidelity(double f, double eta) { return f + eta * (1.0 - f); }

// Ledger audit: recomputed μ must equal stored μ, and the ledger deltas must
// sum to the difference from the initial occupancy.
bool audit_memory(const NetworkGraph& g, int initial_occupancy, std::string* why = nullptr);

}  // namespace qroute::netmodel
