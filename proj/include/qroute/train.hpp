#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include "qroute/episode.hpp"

namespace qroute::harness {

// Exploration rollouts feeding the cluster-MDP estimator: epsilon-mix of
// uniform action types and the greedy heuristic.
std::vector<planner::RolloutSample> collect_rollouts(const Scenario& sc, int episodes,
                                                     std::uint64_t seed);

// Clusters rollout features and solves the aggregated MDP.
void train_planner(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed);

// DAgger-style imitation of the planner expert; writes one training-curve row
// per gradient step when `curve` is non-null.
void train_gnn_imitation(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed,
                         std::ostream* curve = nullptr);

// Full loop: hybrid action selection during training, replay buffer, critic
// and actor updates, target-network tracking.
void train_actor_critic(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed,
                        std::ostream* curve = nullptr);

// Flat DQN baseline trained with epsilon-greedy exploration over action types.
void train_dqn(const Scenario& sc, PolicyBundle& bundle, std::uint64_t seed);

// algo in {imitation, actor_critic, joint, dqn, all}; joint = planner +
// imitation + actor-critic. `all` additionally trains the DQN baseline.
PolicyBundle train(const Scenario& sc, const std::string& algo, std::uint64_t seed,
                   std::ostream* curve = nullptr);

std::string training_curve_header();  // step,kl_loss,critic_mse,grad_norm

}  // namespace qroute::harness
