#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qroute/netmodel.hpp"

namespace qroute::harness {

// Flat INI-style config: [section] blocks of whitespace-separated key/values.
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    // Two-value range "lo hi"; a single value collapses the range.
    std::pair<double, double> get_range(const std::string& section, const std::string& key,
                                        std::pair<double, double> fallback) const;

    std::string canonical() const;   // normalized dump (sorted), used for hashing
    std::uint64_t hash() const;

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

enum class DriftShape { None, Ramp, Triangle };

struct DriftConfig {
    DriftShape shape = DriftShape::None;
    double delta = 0.0;    // per-step |change| of the decay-rate offset
    double budget = -1.0;  // total variation budget B_T; < 0 means delta * horizon
};

// Additive decay-rate offset at step t under the schedule (piecewise linear).
double drift_offset(const DriftConfig& d, int t, int horizon);

struct Scenario {
    std::string name = "default";

    netmodel::Topology topology = netmodel::Topology::RandomGeometric;
    int n_nodes = 50;
    netmodel::TopologyParams topo_params;
    netmodel::NetParams net_params;
    double dt_ms = 0.1;

    int horizon = 500;
    int demand_pairs = 6;
    double demand_rate = 0.02;      // Poisson rate per active pair per step
    double request_min_fidelity = 0.7;
    int request_deadline = 150;

    double g_flip = 0.05;
    double obs_threshold = 0.8;

    int belief_bins = 10;
    bool fidelity_range_prior = true;

    int planner_clusters = 24;
    double planner_gamma = 0.95;
    double planner_temperature = 0.1;
    int planner_rollout_episodes = 8;

    int gnn_layers = 4;
    int gnn_hidden = 24;
    int feature_dim = 10;           // flat feature dimension (featurize d)
    double learning_rate = 5e-4;
    int imitation_steps = 1200;
    int actor_critic_steps = 400;
    int replay_capacity = 20000;
    int batch_size = 16;
    int dqn_steps = 1500;

    double trust_kappa = 1.0;
    double trust_c0 = 0.0;
    bool lazy_planner_gating = false;

    double reward_noise_penalty = 0.1;

    netmodel::AdversaryConfig adversary;
    int adversary_period = 0;  // 0 disables; k applies the attack every k steps

    DriftConfig drift;

    int seeds = 100;
    std::uint64_t base_seed = 1;

    static Scenario from_config(const ConfigFile& cfg);

    // Demand matrix over the scenario's node count, seeded by base_seed.
    std::vector<std::vector<double>> demand_matrix() const;

    std::uint64_t episode_seed(int index) const { return derive_seed(base_seed, index, 11); }
};

}  // namespace qroute::harness
