// Copyright 2026 The valuedice-tabular Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Saddle-point trainers: alternating descent on nu and ascent on the policy
// logits, against exact occupancies or against sampled minibatches.

#ifndef VALUEDICE_TRAINER_HPP_
#define VALUEDICE_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "valuedice/divergence.hpp"
#include "valuedice/empirical.hpp"
#include "valuedice/environments.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/format.hpp"
#include "valuedice/mdp.hpp"
#include "valuedice/objective.hpp"

namespace valuedice {

struct TrainingConfig {
  double nu_learning_rate = 0.5;
  double policy_learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::size_t n_updates = 20000;
  std::size_t nu_steps_per_policy_step = 4;
  std::uint64_t seed = 0;
  /// Curves are recorded at update 0, every eval_every updates and at the end.
  std::size_t eval_every = 10;
  /// Ascent maximizes J - logits_l2 * ||logits||^2.
  double logits_l2 = 1e-4;
  /// Exact trainer: differentiate through d^pi (true) or hold d_rb fixed.
  bool full_policy_gradient = true;
  /// Empirical trainer: environment episode length and replay capacity.
  std::size_t episode_horizon = 50;
  std::size_t replay_capacity = kDefaultReplayCapacity;
  /// Empirical trainer: draw expert episode starts from every stored step
  /// (true) or from the first step of each demonstration only.
  bool virtual_initial_states = true;

  void validate() const {
    require(nu_learning_rate > 0.0, "nu_learning_rate must be positive");
    require(policy_learning_rate > 0.0, "policy_learning_rate must be positive");
    require(batch_size >= 1, "batch_size must be positive");
    require(n_updates >= 1, "n_updates must be positive");
    require(nu_steps_per_policy_step >= 1, "nu_steps_per_policy_step must be positive");
    require(eval_every >= 1, "eval_every must be positive");
    require(logits_l2 >= 0.0, "logits_l2 must be nonnegative");
    require(episode_horizon >= 1, "episode_horizon must be positive");
    require(replay_capacity >= 1, "replay_capacity must be positive");
  }
};

struct SaddleState {
  Policy policy;
  NuFunction nu;
  std::size_t update_index = 0;
};

struct CurvePoint {
  std::size_t update = 0;
  double value = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct TrainResult {
  SaddleState final_state;
  std::vector<CurvePoint> kl_curve;
  std::vector<CurvePoint> objective_curve;

  double final_kl() const { return kl_curve.empty() ? std::nan("") : kl_curve.back().value; }
};

namespace detail {

inline bool should_record(std::size_t update, const TrainingConfig& cfg) {
  return update == 0 || update % cfg.eval_every == 0 || update == cfg.n_updates;
}

inline void require_finite(double value, std::size_t update, const char* what) {
  if (std::isfinite(value)) return;
  std::ostringstream msg;
  msg << "non-finite " << what << " at update " << update;
  throw TrainingError(msg.str());
}

inline void require_finite_nu(const NuFunction& nu, std::size_t update) {
  if (!nu.values().allFinite()) require_finite(std::nan(""), update, "nu");
}

inline Policy ascend(const Policy& policy, const Table& grad, const TrainingConfig& cfg,
                     std::size_t update) {
  Table logits = policy.logits() +
                 cfg.policy_learning_rate * (grad - 2.0 * cfg.logits_l2 * policy.logits());
  if (!logits.allFinite()) require_finite(std::nan(""), update, "policy logits");
  return Policy(std::move(logits));
}

}  // namespace detail

/// Exact saddle-point training. The replay occupancy is the current
/// policy's exact occupancy, refreshed every update. Deterministic.
inline TrainResult train_exact(const TabularMdp& mdp, const Occupancy& d_e, const MixConfig& mix,
                               const TrainingConfig& cfg,
                               std::optional<Policy> initial_policy = std::nullopt) {
  require_valid_mdp(mdp);
  mix.validate();
  cfg.validate();
  detail::require_table_shape(mdp, d_e.values(), "d_e");

  SaddleState state{initial_policy ? *initial_policy : uniform_policy(mdp.n_states, mdp.n_actions),
                    NuFunction::zeros(mdp.n_states, mdp.n_actions), 0};
  detail::require_policy_shape(mdp, state.policy);
  TrainResult result;

  Occupancy d_pi = compute_occupancy(mdp, state.policy);
  auto record = [&](std::size_t update) {
    const double j = j_dice_mix_exact(mdp, state.policy, state.nu, d_e, d_pi, mix);
    detail::require_finite(j, update, "objective");
    if (!detail::should_record(update, cfg)) return;
    result.kl_curve.push_back({update, kl_occupancy(d_pi, d_e)});
    result.objective_curve.push_back({update, j});
  };
  record(0);

  for (std::size_t update = 1; update <= cfg.n_updates; ++update) {
    for (std::size_t k = 0; k < cfg.nu_steps_per_policy_step; ++k) {
      state.nu.mutable_values() -=
          cfg.nu_learning_rate * grad_nu_exact(mdp, state.policy, state.nu, d_e, d_pi, mix);
      detail::require_finite_nu(state.nu, update);
    }
    const Table grad = cfg.full_policy_gradient
                           ? grad_policy_tied_replay(mdp, state.policy, state.nu, d_e, mix)
                           : grad_policy_exact(mdp, state.policy, state.nu, d_e, d_pi, mix);
    if (!grad.allFinite()) detail::require_finite(std::nan(""), update, "policy gradient");
    state.policy = detail::ascend(state.policy, grad, cfg, update);
    state.update_index = update;
    d_pi = compute_occupancy(mdp, state.policy);
    record(update);
  }
  result.final_state = std::move(state);
  return result;
}

/// Minibatch training on demonstrations. Each update takes one environment
/// step with the current policy into the replay buffer, then runs
/// nu_steps_per_policy_step descent steps on nu and one ascent step on the
/// logits, each on freshly sampled expert/replay/initial batches. KL is
/// measured exactly against `reference` (default: the demonstrations'
/// discounted empirical occupancy).
inline TrainResult train_empirical(const TabularMdp& mdp, const ExpertDataset& demonstrations,
                                   const MixConfig& mix, const TrainingConfig& cfg,
                                   std::optional<Occupancy> reference = std::nullopt) {
  require_valid_mdp(mdp);
  mix.validate();
  cfg.validate();
  require(!demonstrations.empty(), "demonstrations are empty");
  require(demonstrations.n_states() == mdp.n_states && demonstrations.n_actions() == mdp.n_actions,
          "demonstrations do not match the MDP");
  const Occupancy target = reference ? *reference : empirical_occupancy(demonstrations, mdp.gamma);
  detail::require_table_shape(mdp, target.values(), "reference occupancy");

  Rng rng(cfg.seed);
  SaddleState state{uniform_policy(mdp.n_states, mdp.n_actions),
                    NuFunction::zeros(mdp.n_states, mdp.n_actions), 0};
  ReplayBuffer buffer(cfg.replay_capacity);
  std::uint64_t episode = 0;
  std::size_t episode_step = 0;
  std::size_t env_state = sample_categorical(mdp.initial_dist, rng);

  TrainResult result;
  auto record = [&](std::size_t update, double j) {
    if (!detail::should_record(update, cfg)) return;
    result.kl_curve.push_back({update, kl_occupancy(compute_occupancy(mdp, state.policy), target)});
    result.objective_curve.push_back({update, j});
  };
  record(0, 0.0);  // nu = 0 makes every loss exactly 0

  auto draw_batch = [&](std::vector<WeightedTransition>& expert,
                        std::vector<WeightedTransition>& replay,
                        std::vector<WeightedState>& initial) {
    const auto samples = sample_expert_batch(demonstrations, cfg.batch_size, mdp.gamma, rng,
                                             cfg.virtual_initial_states);
    expert.clear();
    initial.clear();
    for (const auto& s : samples) {
      expert.push_back({s.transition, 1.0});
      initial.push_back({s.initial_state, 1.0});
    }
    replay = uniform_weights(sample_replay_batch(buffer, cfg.batch_size, mdp.gamma, rng));
  };

  std::vector<WeightedTransition> expert;
  std::vector<WeightedTransition> replay;
  std::vector<WeightedState> initial;
  for (std::size_t update = 1; update <= cfg.n_updates; ++update) {
    const std::size_t action = sample_categorical(state.policy.action_probs(env_state), rng);
    const std::size_t next = sample_categorical(mdp.next_state_dist(env_state, action), rng);
    buffer.push({env_state, action, next, env_state}, episode);
    env_state = next;
    if (++episode_step == cfg.episode_horizon) {
      ++episode;
      episode_step = 0;
      env_state = sample_categorical(mdp.initial_dist, rng);
    }

    for (std::size_t k = 0; k < cfg.nu_steps_per_policy_step; ++k) {
      draw_batch(expert, replay, initial);
      const auto loss = batch_objective(state.policy, state.nu, expert, replay, initial, mix, mdp.gamma);
      detail::require_finite(loss.objective.value, update, "loss");
      state.nu.mutable_values() -= cfg.nu_learning_rate * loss.grad_nu;
      detail::require_finite_nu(state.nu, update);
    }
    draw_batch(expert, replay, initial);
    const auto loss = batch_objective(state.policy, state.nu, expert, replay, initial, mix, mdp.gamma);
    detail::require_finite(loss.objective.value, update, "loss");
    state.policy = detail::ascend(state.policy, loss.grad_logits, cfg, update);
    state.update_index = update;
    record(update, loss.objective.value);
  }
  result.final_state = std::move(state);
  return result;
}

/// CSV with columns update,kl,j_value,alpha,seed.
inline void write_train_result_csv(const TrainResult& result, double alpha, std::uint64_t seed,
                                   std::ostream& out) {
  out << "update,kl,j_value,alpha,seed\n";
  for (std::size_t i = 0; i < result.kl_curve.size(); ++i) {
    out << result.kl_curve[i].update << ',' << format_double(result.kl_curve[i].value) << ','
        << format_double(result.objective_curve[i].value) << ',' << format_double(alpha) << ','
        << seed << '\n';
  }
}

}  // namespace valuedice

#endif  // VALUEDICE_TRAINER_HPP_
