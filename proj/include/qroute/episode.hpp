#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qroute/baselines.hpp"
#include "qroute/decision.hpp"
#include "qroute/gnn.hpp"
#include "qroute/hybrid.hpp"
#include "qroute/planner.hpp"
#include "qroute/scenario.hpp"

namespace qroute::harness {

enum class PolicyKind {
    Hybrid,
    GnnOnly,
    PomdpOnly,
    FixedAlpha,
    Fmsp,
    Qdr,
    Gps,
    Dqn,
    Flooding,
    RandomPolicy,
};

PolicyKind policy_kind_from_string(const std::string& name);
const char* policy_kind_name(PolicyKind k);

// Trained artifacts shared by the policy stack. Baselines ignore them.
struct PolicyBundle {
    bool has_planner = false;
    aggregate::ClusterSet clusters;
    planner::AggregatedMDP mdp;
    planner::ValueTable values;

    bool has_gnn = false;
    gnn::GnnParams net;

    bool has_dqn = false;
    baselines::DqnLite dqn;

    std::string to_json() const;
    static PolicyBundle from_json(const std::string& text);
};

struct StepRecord {
    int t = 0;
    std::uint64_t belief_hash = 0;
    int action_type = 0;
    int link_a = -1, link_b = -1, via = -1;
    bool executed = false;
    bool action_success = false;
    std::string observation;   // compact symbol string, e.g. "H@3 L@7"
    double reward = 0.0;
    double alpha = 0.0;
    double kl = 0.0;
    double decision_ns = 0.0;  // wall time of the policy computation
    int deliveries_ok = 0;
    int deliveries_low = 0;
    int requests_new = 0;
    int expired_now = 0;
    double fidelity_sum = 0.0;  // true fidelity of pairs delivered above threshold
    double mu_fraction = 0.0;
    double belief_err = 0.0;
};

struct EpisodeSummary {
    std::uint64_t seed = 0;
    int horizon = 0;
    int requests_issued = 0;
    int delivered_ok = 0;
    int delivered_low = 0;
    int expired = 0;
    double delivery_rate = 0.0;
    double avg_fidelity = 0.0;      // mean true fidelity of delivered-ok pairs
    double total_reward = 0.0;
    double mean_mu_fraction = 0.0;
    double peak_mu_fraction = 0.0;
    int violations = 0;             // proposed-infeasible actions
    double deadline_ok_rate = 0.0;  // delivered_ok / closed requests
    double mean_decision_ms = 0.0;
    double median_decision_ms = 0.0;
    double mean_gnn_ms = 0.0;       // per-step component costs (hybrid only)
    double mean_planner_ms = 0.0;
    double planner_call_fraction = 0.0;
    double mean_alpha = 0.0;
    double mean_kl = 0.0;
    double mean_belief_error = 0.0;
};

struct EpisodeRecord {
    std::vector<StepRecord> steps;
    EpisodeSummary summary;

    // Deterministic content digest; wall-clock timing fields are excluded so
    // records from identical seeds compare equal across runs.
    std::uint64_t digest() const;
    std::string step_json(int index) const;  // one JSONL line per step
};

// Trainer integration: observe transitions and optionally override the
// sampled action. `graphs` are filled only when want_graphs is set.
struct HookTransition {
    Vec flat_before, flat_after;
    gnn::GraphInput g_before, g_after;
    Vec pi_pomdp;   // planner component over the candidate actions (when computed)
    Vec pi_gnn;     // learned component (when computed)
    int action_index = 0;
    int action_type = 0;
    double reward = 0.0;
    bool terminal = false;
};

struct StepHook {
    std::function<int(const decision::Context&, const Vec& pi, Rng&)> choose;
    std::function<void(HookTransition&&)> on_transition;
    bool want_graphs = false;
};

struct RunOptions {
    bool keep_steps = true;
    double fixed_alpha = 0.5;            // FixedAlpha variant weight
    std::optional<double> alpha_override;  // forces a constant alpha in Hybrid mode
    const StepHook* hook = nullptr;
};

EpisodeRecord run_episode(const Scenario& sc, const PolicyBundle& bundle, PolicyKind kind,
                          std::uint64_t seed, const RunOptions& opt = {});

// Recomputes the summary from the step log; used by the audit tests.
EpisodeSummary summarize_steps(const EpisodeRecord& rec);

// CSV helpers (fixed, versioned column sets).
std::string summary_csv_header();
std::string summary_csv_row(const EpisodeSummary& s);
std::string trust_trace_header();

}  // namespace qroute::harness
