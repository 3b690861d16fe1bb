#include "qroute/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qroute/error.hpp"
#include "qroute/mathutil.hpp"

namespace qroute::harness {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line, section;
    while (std::getline(in, line)) {
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::INVALID_PARAM, "config line without '=': " + line);
        cfg.data_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IO_ERROR, "cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = data_.find(section);
    return s != data_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
    const auto s = data_.find(section);
    if (s == data_.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    const auto v = get_string(section, key, "");
    return v.empty() ? fallback : std::stod(v);
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    const auto v = get_string(section, key, "");
    return v.empty() ? fallback : std::stoi(v);
}

std::pair<double, double> ConfigFile::get_range(const std::string& section, const std::string& key,
                                                std::pair<double, double> fallback) const {
    const auto v = get_string(section, key, "");
    if (v.empty()) return fallback;
    std::istringstream ss(v);
    double lo, hi;
    ss >> lo;
    if (!(ss >> hi)) hi = lo;
    return {lo, hi};
}

std::string ConfigFile::canonical() const {
    std::ostringstream out;
    for (const auto& [section, kv] : data_) {
        out << "[" << section << "]\n";
        for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    }
    return out.str();
}

std::uint64_t ConfigFile::hash() const {
    const auto c = canonical();
    return fnv1a(c.data(), c.size());
}

double drift_offset(const DriftConfig& d, int t, int horizon) {
    if (d.shape == DriftShape::None || d.delta <= 0.0) return 0.0;
    const double budget = d.budget >= 0.0 ? d.budget : d.delta * horizon;
    if (d.shape == DriftShape::Ramp) return std::min(d.delta * t, budget);
    // one up-down excursion of slope ±delta and amplitude budget/2, so the
    // total variation equals the budget exactly and |Δ| <= delta per step
    const double amp = budget / 2.0;
    const double up_steps = amp / d.delta;
    const double x = static_cast<double>(t);
    if (x <= up_steps) return d.delta * x;
    if (x <= 2.0 * up_steps) return 2.0 * amp - d.delta * x;
    return 0.0;
}

Scenario Scenario::from_config(const ConfigFile& cfg) {
    Scenario s;
    s.name = cfg.get_string("", "name", s.name);

    const auto topo = cfg.get_string("network", "topology", "random_geometric");
    if (topo == "random_geometric") s.topology = netmodel::Topology::RandomGeometric;
    else if (topo == "small_world") s.topology = netmodel::Topology::SmallWorld;
    else if (topo == "line") s.topology = netmodel::Topology::Line;
    else if (topo == "grid") s.topology = netmodel::Topology::Grid;
    else throw Error(ErrorCode::INVALID_PARAM, "unknown topology " + topo);

    s.n_nodes = cfg.get_int("network", "network_size", cfg.get_int("network", "size", 50));
    auto fr = cfg.get_range("network", "initial_fidelity_range", {0.70, 0.95});
    s.topo_params.f_min = fr.first;
    s.topo_params.f_max = fr.second;
    auto gr = cfg.get_range("network", "decoherence_rate", {0.01, 0.10});
    s.topo_params.gamma_min = gr.first;
    s.topo_params.gamma_max = gr.second;
    auto er = cfg.get_range("network", "purification_gain", {0.60, 0.90});
    s.topo_params.eta_min = er.first;
    s.topo_params.eta_max = er.second;
    auto tr = cfg.get_range("network", "t2_ms", {1.0, 10.0});
    s.topo_params.t2_min = tr.first;
    s.topo_params.t2_max = tr.second;
    s.topo_params.memory_capacity = cfg.get_int("network", "memory_capacity", 4);
    s.topo_params.radius = cfg.get_double("network", "radius", 0.0);
    s.topo_params.ring_degree = cfg.get_int("network", "ring_degree", 4);
    s.topo_params.rewire_prob = cfg.get_double("network", "rewire_prob", 0.1);

    s.net_params.p_pur = cfg.get_double("network", "purification_success", 0.75);
    s.net_params.p_entangle = cfg.get_double("network", "entangle_success", 0.9);
    s.net_params.kappa = cfg.get_double("network", "kappa", 0.01);
    s.net_params.kill_threshold = cfg.get_double("network", "kill_threshold", 0.5);
    s.net_params.entangle_f_min = fr.first;
    s.net_params.entangle_f_max = fr.second;
    s.dt_ms = cfg.get_double("network", "step_dt_ms", 0.1);

    s.horizon = cfg.get_int("run", "horizon", 500);
    s.seeds = cfg.get_int("run", "seeds", 100);
    s.base_seed = static_cast<std::uint64_t>(cfg.get_int("run", "base_seed", 1));

    s.demand_pairs = cfg.get_int("demand", "pairs", 6);
    s.demand_rate = cfg.get_double("demand", "rate", 0.02);
    s.request_min_fidelity = cfg.get_double("demand", "min_fidelity", 0.7);
    s.request_deadline = cfg.get_int("demand", "deadline", 150);

    s.g_flip = cfg.get_double("observation", "g_flip", 0.05);
    s.obs_threshold = cfg.get_double("observation", "threshold", 0.8);

    s.belief_bins = cfg.get_int("belief", "bins", 10);
    s.fidelity_range_prior = cfg.get_string("belief", "prior", "fidelity_range") == "fidelity_range";

    s.planner_clusters = cfg.get_int("planner", "clusters", 24);
    s.planner_gamma = cfg.get_double("planner", "gamma", 0.95);
    s.planner_temperature = cfg.get_double("planner", "temperature", 0.1);
    s.planner_rollout_episodes = cfg.get_int("planner", "rollout_episodes", 8);

    s.gnn_layers = cfg.get_int("gnn", "gnn_layers", 4);
    s.gnn_hidden = cfg.get_int("gnn", "hidden_dim", 24);
    s.feature_dim = cfg.get_int("gnn", "feature_dim", 10);
    s.learning_rate = cfg.get_double("gnn", "learning_rate", 5e-4);
    s.imitation_steps = cfg.get_int("gnn", "imitation_steps", 1200);
    s.actor_critic_steps = cfg.get_int("gnn", "actor_critic_steps", 400);
    s.replay_capacity = cfg.get_int("gnn", "replay_capacity", 20000);
    s.batch_size = cfg.get_int("gnn", "batch_size", 16);
    s.dqn_steps = cfg.get_int("gnn", "dqn_steps", 1500);

    s.trust_kappa = cfg.get_double("trust", "kappa", 1.0);
    s.trust_c0 = cfg.get_double("trust", "c0", 0.0);
    s.lazy_planner_gating = cfg.get_int("trust", "lazy_gating", 0) != 0;

    s.reward_noise_penalty = cfg.get_double("reward", "noise_penalty", 0.1);

    s.adversary.epsilon_adv = cfg.get_double("adversary", "epsilon", 0.0);
    s.adversary.delta_mu_bound = cfg.get_double("adversary", "delta_mu", 0.0);
    s.adversary.n_link_targets = cfg.get_int("adversary", "targets", 1);
    const auto tgt = cfg.get_string("adversary", "target_selection", "none");
    s.adversary.target_selection = tgt == "worst_link" ? netmodel::AdversaryTarget::WorstLink
                                  : tgt == "random"    ? netmodel::AdversaryTarget::Random
                                                       : netmodel::AdversaryTarget::None;
    s.adversary_period = cfg.get_int("adversary", "period", 0);

    const auto shape = cfg.get_string("drift", "shape", "none");
    s.drift.shape = shape == "ramp"       ? DriftShape::Ramp
                    : shape == "triangle" ? DriftShape::Triangle
                                          : DriftShape::None;
    s.drift.delta = cfg.get_double("drift", "delta", 0.0);
    s.drift.budget = cfg.get_double("drift", "budget", -1.0);
    return s;
}

std::vector<std::vector<double>> Scenario::demand_matrix() const {
    std::vector<std::vector<double>> demand(n_nodes, std::vector<double>(n_nodes, 0.0));
    Rng rng(derive_seed(base_seed, 0, 13));
    for (int k = 0; k < demand_pairs; ++k) {
        const int s = static_cast<int>(rng.uniform_int(n_nodes));
        int d = static_cast<int>(rng.uniform_int(n_nodes - 1));
        if (d >= s) ++d;
        demand[s][d] += demand_rate;
    }
    return demand;
}

}  // namespace qroute::harness
