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

// Minibatch ValueDICE objective (the practical algorithm): geometric and
// virtual-initial-state sampling, the sampled-action loss, and the
// action-marginalized loss with analytic gradients used by the trainer.

#ifndef VALUEDICE_EMPIRICAL_HPP_
#define VALUEDICE_EMPIRICAL_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "valuedice/divergence.hpp"
#include "valuedice/environments.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/mdp.hpp"
#include "valuedice/objective.hpp"

namespace valuedice {

/// t ~ Geom(1 - gamma) conditioned on t < horizon, by rejection.
template <std::uniform_random_bit_generator URBG>
std::size_t geometric_time_index(std::size_t horizon, double gamma, URBG& rng) {
  require(horizon >= 1, "horizon must be positive");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  if (horizon == 1) return 0;
  for (;;) {
    const std::size_t t = sample_geometric(gamma, rng);
    if (t < horizon) return t;
  }
}

inline std::size_t geometric_time_index(std::size_t horizon, double gamma, std::uint64_t seed) {
  Rng rng(seed);
  return geometric_time_index(horizon, gamma, rng);
}

/// One expert sample: a transition reached by a geometric offset from a
/// virtual episode start.
struct ExpertSample {
  std::size_t initial_state;
  Transition transition;
};

/// With virtual_starts every stored step may open an episode; otherwise only
/// step 0 of each source trajectory does.
template <std::uniform_random_bit_generator URBG>
std::vector<ExpertSample> sample_expert_batch(const ExpertDataset& data, std::size_t batch_size,
                                              double gamma, URBG& rng, bool virtual_starts = true) {
  require(!data.empty(), "expert dataset is empty");
  std::vector<std::size_t> starts;
  if (!virtual_starts) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.step_in_trajectory(i) == 0) starts.push_back(i);
    }
  }
  const std::size_t n_starts = virtual_starts ? data.size() : starts.size();
  std::uniform_int_distribution<std::size_t> pick(0, n_starts - 1);
  std::vector<ExpertSample> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t start = virtual_starts ? pick(rng) : starts[pick(rng)];
    const std::size_t offset = geometric_time_index(data.tail_length(start), gamma, rng);
    out.push_back({data.transitions()[start].episode_start, data.transitions()[start + offset]});
  }
  return out;
}

template <std::uniform_random_bit_generator URBG>
std::vector<Transition> sample_replay_batch(const ReplayBuffer& buffer, std::size_t batch_size,
                                            double gamma, URBG& rng) {
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t start = buffer.sample_index(rng);
    const std::size_t offset = geometric_time_index(buffer.tail_length(start), gamma, rng);
    out.push_back(buffer.at(start + offset));
  }
  return out;
}

struct EmpiricalObjective {
  double value = 0.0;   // j_log - j_linear
  double j_log = 0.0;
  double j_linear = 0.0;
};

namespace detail {

inline void require_batch_indices(const Policy& policy, const Transition& t) {
  require(t.state < policy.n_states() && t.next_state < policy.n_states() &&
              t.action < policy.n_actions(),
          "batch transition out of range");
}

inline double nu_at(const NuFunction& nu, std::size_t s, std::size_t a) {
  return nu.values()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
}

}  // namespace detail

/// Sampled-action minibatch loss:
///   j_log    = log(mean_i[(1-alpha) e^{nu(sE,aE) - gamma nu(sE',aE')}
///                         + alpha e^{nu(s,a) - gamma nu(s',a')}])
///   j_linear = mean_i[(1-alpha)(1-gamma) nu(s0,a0) + alpha (nu(s,a) - gamma nu(s',a'))]
/// with a0 ~ pi(.|s0), a' ~ pi(.|s'), aE' ~ pi(.|sE') drawn from `rng`.
/// The replay batch may be empty only when alpha = 0.
template <std::uniform_random_bit_generator URBG>
EmpiricalObjective j_dice_empirical(const Policy& policy, const NuFunction& nu,
                                    std::span<const Transition> expert_batch,
                                    std::span<const Transition> replay_batch,
                                    std::span<const std::size_t> initial_batch,
                                    const MixConfig& mix, double gamma, URBG& rng) {
  mix.validate();
  require(!expert_batch.empty(), "expert batch is empty");
  require(!initial_batch.empty(), "initial-state batch is empty");
  require(!replay_batch.empty() || mix.alpha == 0.0, "replay batch is empty");
  require(nu.values().rows() == static_cast<Eigen::Index>(policy.n_states()) &&
              nu.values().cols() == static_cast<Eigen::Index>(policy.n_actions()),
          "nu shape does not match the policy");

  std::vector<std::size_t> initial_actions;
  for (std::size_t s0 : initial_batch) {
    require(s0 < policy.n_states(), "initial state out of range");
    initial_actions.push_back(sample_categorical(policy.action_probs(s0), rng));
  }
  std::vector<double> replay_residual;
  for (const auto& t : replay_batch) {
    detail::require_batch_indices(policy, t);
    const std::size_t next_action = sample_categorical(policy.action_probs(t.next_state), rng);
    replay_residual.push_back(detail::nu_at(nu, t.state, t.action) -
                              gamma * detail::nu_at(nu, t.next_state, next_action));
  }
  std::vector<double> expert_residual;
  for (const auto& t : expert_batch) {
    detail::require_batch_indices(policy, t);
    const std::size_t next_action = sample_categorical(policy.action_probs(t.next_state), rng);
    expert_residual.push_back(detail::nu_at(nu, t.state, t.action) -
                              gamma * detail::nu_at(nu, t.next_state, next_action));
  }

  double top = -std::numeric_limits<double>::infinity();
  for (double e : expert_residual) top = std::max(top, clip_exponent(e));
  if (mix.alpha > 0.0)
    for (double r : replay_residual) top = std::max(top, clip_exponent(r));
  double expert_mean = 0.0;
  for (double e : expert_residual) expert_mean += std::exp(clip_exponent(e) - top);
  expert_mean /= static_cast<double>(expert_residual.size());
  double replay_mean = 0.0;
  double replay_linear = 0.0;
  for (double r : replay_residual) {
    replay_mean += std::exp(clip_exponent(r) - top);
    replay_linear += r;
  }
  if (!replay_residual.empty()) {
    replay_mean /= static_cast<double>(replay_residual.size());
    replay_linear /= static_cast<double>(replay_residual.size());
  }
  double initial_mean = 0.0;
  for (std::size_t i = 0; i < initial_batch.size(); ++i)
    initial_mean += detail::nu_at(nu, initial_batch[i], initial_actions[i]);
  initial_mean /= static_cast<double>(initial_batch.size());

  EmpiricalObjective out;
  // expert + alpha (replay - expert) is exactly 1 when both means are 1.
  out.j_log = top + std::log(expert_mean + mix.alpha * (replay_mean - expert_mean));
  out.j_linear = (1.0 - mix.alpha) * (1.0 - gamma) * initial_mean + mix.alpha * replay_linear;
  out.value = out.j_log - out.j_linear;
  return out;
}

inline EmpiricalObjective j_dice_empirical(const Policy& policy, const NuFunction& nu,
                                    std::span<const Transition> expert_batch,
                                    std::span<const Transition> replay_batch,
                                    std::span<const std::size_t> initial_batch,
                                    const MixConfig& mix, double gamma, std::uint64_t seed) {
  Rng rng(seed);
  return j_dice_empirical(policy, nu, expert_batch, replay_batch, initial_batch, mix, gamma, rng);
}

struct WeightedTransition {
  Transition transition;
  double weight = 1.0;
};

struct WeightedState {
  std::size_t state = 0;
  double weight = 1.0;
};

/// Action-marginalized minibatch loss and its gradients.
struct BatchObjective {
  EmpiricalObjective objective;
  Table grad_nu;
  Table grad_logits;
};

/// Same loss as j_dice_empirical but with every successor and initial
/// action integrated out under pi (nu(s', .) replaced by V(s') =
/// sum_a' pi(a'|s') nu(s', a')). Weights are normalized per batch. With
/// exhaustive batches weighted by d_e, d_rb and p0 on a deterministic MDP
/// this equals j_dice_mix_exact.
inline BatchObjective batch_objective(const Policy& policy, const NuFunction& nu,
                                      std::span<const WeightedTransition> expert_batch,
                                      std::span<const WeightedTransition> replay_batch,
                                      std::span<const WeightedState> initial_batch,
                                      const MixConfig& mix, double gamma,
                                      bool with_gradients = true) {
  mix.validate();
  require(!expert_batch.empty(), "expert batch is empty");
  require(!initial_batch.empty(), "initial-state batch is empty");
  require(!replay_batch.empty() || mix.alpha == 0.0, "replay batch is empty");
  const auto n_states = static_cast<Eigen::Index>(policy.n_states());
  const auto n_actions = static_cast<Eigen::Index>(policy.n_actions());
  require(nu.values().rows() == n_states && nu.values().cols() == n_actions,
          "nu shape does not match the policy");

  auto total_weight = [](auto batch) {
    double w = 0.0;
    for (const auto& item : batch) {
      require(item.weight >= 0.0, "batch weights must be nonnegative");
      w += item.weight;
    }
    require(w > 0.0, "batch weights must not all be zero");
    return w;
  };
  const double expert_total = total_weight(expert_batch);
  const double initial_total = total_weight(initial_batch);
  const double replay_total = replay_batch.empty() ? 1.0 : total_weight(replay_batch);

  const Vector value = state_values(policy, nu.values());
  auto residual = [&](const Transition& t) {
    detail::require_batch_indices(policy, t);
    return detail::nu_at(nu, t.state, t.action) -
           gamma * value(static_cast<Eigen::Index>(t.next_state));
  };

  std::vector<double> expert_residual;
  expert_residual.reserve(expert_batch.size());
  for (const auto& item : expert_batch) expert_residual.push_back(residual(item.transition));
  std::vector<double> replay_residual;
  replay_residual.reserve(replay_batch.size());
  for (const auto& item : replay_batch) replay_residual.push_back(residual(item.transition));

  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < expert_batch.size(); ++i)
    if (expert_batch[i].weight > 0.0) top = std::max(top, clip_exponent(expert_residual[i]));
  if (mix.alpha > 0.0)
    for (std::size_t j = 0; j < replay_batch.size(); ++j)
      if (replay_batch[j].weight > 0.0) top = std::max(top, clip_exponent(replay_residual[j]));

  // Unnormalized softmax mass of each item.
  std::vector<double> expert_mass(expert_batch.size());
  std::vector<double> replay_mass(replay_batch.size());
  double expert_sum = 0.0;
  for (std::size_t i = 0; i < expert_batch.size(); ++i) {
    const double e = expert_batch[i].weight * std::exp(clip_exponent(expert_residual[i]) - top);
    expert_mass[i] = (1.0 - mix.alpha) * e / expert_total;
    expert_sum += e;
  }
  double replay_sum = 0.0;
  double replay_linear = 0.0;
  for (std::size_t j = 0; j < replay_batch.size(); ++j) {
    const double e = replay_batch[j].weight * std::exp(clip_exponent(replay_residual[j]) - top);
    replay_mass[j] = mix.alpha * e / replay_total;
    replay_sum += e;
    replay_linear += replay_batch[j].weight / replay_total * replay_residual[j];
  }
  const double expert_part = expert_sum / expert_total;
  const double replay_part = replay_batch.empty() ? expert_part : replay_sum / replay_total;
  const double z = expert_part + mix.alpha * (replay_part - expert_part);
  double initial_mean = 0.0;
  for (const auto& item : initial_batch) {
    require(item.state < policy.n_states(), "initial state out of range");
    initial_mean += item.weight / initial_total * value(static_cast<Eigen::Index>(item.state));
  }

  BatchObjective out;
  out.objective.j_log = top + std::log(z);
  out.objective.j_linear =
      (1.0 - mix.alpha) * (1.0 - gamma) * initial_mean + mix.alpha * replay_linear;
  out.objective.value = out.objective.j_log - out.objective.j_linear;
  if (!with_gradients) return out;

  // d value / d nu(s,a) directly, and d value / d V(s) for the pieces that
  // go through state values.
  Table direct = Table::Zero(n_states, n_actions);
  Vector through_value = Vector::Zero(n_states);
  auto add_residual_coeff = [&](const Transition& t, double coeff) {
    direct(static_cast<Eigen::Index>(t.state), static_cast<Eigen::Index>(t.action)) += coeff;
    through_value(static_cast<Eigen::Index>(t.next_state)) -= gamma * coeff;
  };
  for (std::size_t i = 0; i < expert_batch.size(); ++i) {
    const double active = std::abs(expert_residual[i]) < kClipBound ? 1.0 : 0.0;
    add_residual_coeff(expert_batch[i].transition, active * expert_mass[i] / z);
  }
  for (std::size_t j = 0; j < replay_batch.size(); ++j) {
    const double active = std::abs(replay_residual[j]) < kClipBound ? 1.0 : 0.0;
    const double w = replay_batch[j].weight / replay_total;
    add_residual_coeff(replay_batch[j].transition, active * replay_mass[j] / z - mix.alpha * w);
  }
  for (const auto& item : initial_batch)
    through_value(static_cast<Eigen::Index>(item.state)) -=
        (1.0 - mix.alpha) * (1.0 - gamma) * item.weight / initial_total;

  out.grad_nu = direct + (policy.probs().array().colwise() * through_value.array()).matrix();
  Table grad_probs = nu.values();
  grad_probs.array().colwise() *= through_value.array();
  out.grad_logits = logit_gradient(policy, grad_probs);
  return out;
}

/// Uniformly weighted view of sampled items.
inline std::vector<WeightedTransition> uniform_weights(std::span<const Transition> batch) {
  std::vector<WeightedTransition> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back({t, 1.0});
  return out;
}

inline std::vector<WeightedState> uniform_weights(std::span<const std::size_t> states) {
  std::vector<WeightedState> out;
  out.reserve(states.size());
  for (std::size_t s : states) out.push_back({s, 1.0});
  return out;
}

/// Every (s, a, s') with d(s,a) p(s'|s,a) > 0, weighted by that mass.
inline std::vector<WeightedTransition> exhaustive_batch(const TabularMdp& mdp,
                                                        const Occupancy& d) {
  detail::require_table_shape(mdp, d.values(), "occupancy");
  std::vector<WeightedTransition> out;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      for (std::size_t next = 0; next < mdp.n_states; ++next) {
        const double w = d(s, a) * mdp.p(s, a, next);
        if (w > 0.0) out.push_back({{s, a, next, s}, w});
      }
  return out;
}

inline std::vector<WeightedState> exhaustive_initial_batch(const TabularMdp& mdp) {
  std::vector<WeightedState> out;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const double w = mdp.initial_dist(static_cast<Eigen::Index>(s));
    if (w > 0.0) out.push_back({s, w});
  }
  return out;
}

}  // namespace valuedice

#endif  // VALUEDICE_EMPIRICAL_HPP_
