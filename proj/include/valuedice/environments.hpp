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

// Ring MDP, expert policies, demonstration datasets, random MDPs and the
// replay buffer.

#ifndef VALUEDICE_ENVIRONMENTS_HPP_
#define VALUEDICE_ENVIRONMENTS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/mdp.hpp"

namespace valuedice {

// Ring actions. Clockwise is s -> s + 1.
inline constexpr std::size_t kClockwise = 0;
inline constexpr std::size_t kCounterClockwise = 1;

inline constexpr std::size_t kRingDefaultStates = 8;
inline constexpr double kRingDefaultGamma = 0.95;

struct RingOptions {
  std::size_t n_states = kRingDefaultStates;
  double gamma = kRingDefaultGamma;
  /// Defaults to a point mass on state 0.
  std::optional<Vector> initial_dist;
};

inline TabularMdp build_ring_mdp(const RingOptions& options = {}) {
  const std::size_t n = options.n_states;
  require(n >= 3, "ring needs at least 3 states");
  Table transition = Table::Zero(static_cast<Eigen::Index>(n * 2), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    transition(static_cast<Eigen::Index>(s * 2 + kClockwise), static_cast<Eigen::Index>((s + 1) % n)) = 1.0;
    transition(static_cast<Eigen::Index>(s * 2 + kCounterClockwise),
               static_cast<Eigen::Index>((s + n - 1) % n)) = 1.0;
  }
  Vector init = Vector::Zero(static_cast<Eigen::Index>(n));
  if (options.initial_dist) {
    init = *options.initial_dist;
  } else {
    init(0) = 1.0;
  }
  return make_mdp(n, 2, std::move(transition), std::move(init), options.gamma);
}

inline TabularMdp build_ring_mdp(std::size_t n_states) {
  RingOptions options;
  options.n_states = n_states;
  return build_ring_mdp(options);
}

/// Stochastic ring expert: with probability p_forward it moves clockwise at
/// states 0 and 1 and counter-clockwise at every other state.
inline Policy stochastic_expert_policy(double p_forward, std::size_t n_states = kRingDefaultStates) {
  require(p_forward > 0.0 && p_forward < 1.0, "p_forward must lie in (0, 1)");
  require(n_states >= 3, "ring needs at least 3 states");
  Table logits = Table::Zero(static_cast<Eigen::Index>(n_states), 2);
  const double logit = std::log(p_forward / (1.0 - p_forward));
  for (std::size_t s = 0; s < n_states; ++s) {
    const std::size_t preferred = s <= 1 ? kClockwise : kCounterClockwise;
    logits(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(preferred)) = logit;
  }
  return Policy(std::move(logits));
}

/// Sparse expert on {0, 1, 2}: 0 -> 1, 1 -> 2, 2 -> 1. Rows for other
/// states are left uniform and are never reached from state 0.
inline Policy sparse_expert_policy(std::size_t n_states = kRingDefaultStates) {
  require(n_states >= 3, "ring needs at least 3 states");
  Table logits = Table::Zero(static_cast<Eigen::Index>(n_states), 2);
  logits(0, kClockwise) = kDeterministicLogit;
  logits(1, kClockwise) = kDeterministicLogit;
  logits(2, kCounterClockwise) = kDeterministicLogit;
  return Policy(std::move(logits));
}

/// Every step t of a trajectory starts its own virtual trajectory, so the
/// transition at t carries episode_start = s_t.
inline std::vector<Transition> virtual_initial_states(const Trajectory& trajectory) {
  require(trajectory.horizon() >= 1 && trajectory.states.size() == trajectory.horizon() + 1,
          "trajectory must have T >= 1 actions and T + 1 states");
  std::vector<Transition> out;
  out.reserve(trajectory.horizon());
  for (std::size_t t = 0; t < trajectory.horizon(); ++t) {
    out.push_back({trajectory.states[t], trajectory.actions[t], trajectory.states[t + 1],
                   trajectory.states[t]});
  }
  return out;
}

/// Expert transitions stored trajectory-major, so the tail of transition i
/// within its source trajectory is contiguous.
class ExpertDataset {
 public:
  ExpertDataset() = default;
  ExpertDataset(std::size_t n_states, std::size_t n_actions)
      : n_states_(n_states), n_actions_(n_actions) {}

  void add_trajectory(const Trajectory& trajectory) {
    for (std::size_t s : trajectory.states) require(s < n_states_, "state out of range");
    for (std::size_t a : trajectory.actions) require(a < n_actions_, "action out of range");
    const auto expanded = virtual_initial_states(trajectory);
    const std::size_t index = trajectories_.size();
    for (std::size_t t = 0; t < expanded.size(); ++t) {
      transitions_.push_back(expanded[t]);
      origin_.push_back({index, t});
    }
    trajectories_.push_back(trajectory);
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<Trajectory>& source_trajectories() const { return trajectories_; }

  /// Number of transitions from i to the end of its source trajectory.
  std::size_t tail_length(std::size_t i) const {
    const auto& o = origin_.at(i);
    return trajectories_[o.trajectory].horizon() - o.step;
  }
  std::size_t step_in_trajectory(std::size_t i) const { return origin_.at(i).step; }

 private:
  struct Origin {
    std::size_t trajectory;
    std::size_t step;
  };
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<Transition> transitions_;
  std::vector<Origin> origin_;
  std::vector<Trajectory> trajectories_;
};

/// Set of episode-start states (the empirical initial-state pool).
inline std::set<std::size_t> initial_state_pool(const ExpertDataset& data) {
  std::set<std::size_t> pool;
  for (const auto& t : data.transitions()) pool.insert(t.episode_start);
  return pool;
}

inline std::set<std::size_t> visited_states(const ExpertDataset& data) {
  std::set<std::size_t> out;
  for (const auto& t : data.transitions()) {
    out.insert(t.state);
    out.insert(t.next_state);
  }
  return out;
}

/// Discounted empirical occupancy: step t of each source trajectory gets
/// weight (1 - gamma) gamma^t, and the result is renormalized.
inline Occupancy empirical_occupancy(const ExpertDataset& data, double gamma) {
  require(!data.empty(), "dataset is empty");
  Table counts = Table::Zero(static_cast<Eigen::Index>(data.n_states()),
                             static_cast<Eigen::Index>(data.n_actions()));
  for (const auto& traj : data.source_trajectories()) {
    double weight = 1.0 - gamma;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
      counts(static_cast<Eigen::Index>(traj.states[t]), static_cast<Eigen::Index>(traj.actions[t])) += weight;
      weight *= gamma;
    }
  }
  return Occupancy(counts / counts.sum());
}

/// Unweighted (s, a) frequencies over all transitions.
inline Occupancy empirical_frequencies(std::span<const Transition> transitions,
                                       std::size_t n_states, std::size_t n_actions) {
  require(!transitions.empty(), "no transitions");
  Table counts = Table::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  for (const auto& t : transitions) {
    require(t.state < n_states && t.action < n_actions, "transition out of range");
    counts(static_cast<Eigen::Index>(t.state), static_cast<Eigen::Index>(t.action)) += 1.0;
  }
  return Occupancy(counts / static_cast<double>(transitions.size()));
}

template <std::uniform_random_bit_generator URBG>
ExpertDataset generate_demonstrations(const TabularMdp& mdp, const Policy& expert,
                                      std::size_t n_trajectories, std::size_t horizon, URBG& rng) {
  require(n_trajectories >= 1, "n_trajectories must be positive");
  ExpertDataset data(mdp.n_states, mdp.n_actions);
  for (std::size_t i = 0; i < n_trajectories; ++i)
    data.add_trajectory(sample_trajectory(mdp, expert, horizon, rng));
  return data;
}

inline ExpertDataset generate_demonstrations(const TabularMdp& mdp, const Policy& expert,
                                             std::size_t n_trajectories, std::size_t horizon,
                                             std::uint64_t seed) {
  Rng rng(seed);
  return generate_demonstrations(mdp, expert, n_trajectories, horizon, rng);
}

/// Demonstrations from the sparse ring expert. Requires a ring whose initial
/// distribution is supported on {0, 1, 2}.
inline ExpertDataset sparse_expert_dataset(const TabularMdp& mdp, std::size_t horizon,
                                           std::size_t n_trajectories, std::uint64_t seed) {
  require(mdp.n_states >= 3 && mdp.n_actions == 2, "sparse expert needs a ring MDP");
  for (std::size_t s = 3; s < mdp.n_states; ++s)
    require(mdp.initial_dist(static_cast<Eigen::Index>(s)) == 0.0,
            "sparse expert needs initial states within {0, 1, 2}");
  return generate_demonstrations(mdp, sparse_expert_policy(mdp.n_states), n_trajectories, horizon,
                                 seed);
}

namespace detail {

template <std::uniform_random_bit_generator URBG>
Vector dirichlet_ones(std::size_t n, URBG& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = expo(rng);
  return v / v.sum();
}

}  // namespace detail

/// Each (s, a) gets `branching` distinct successors with Dirichlet(1)
/// probabilities; the initial distribution is Dirichlet(1) over all states.
inline TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t branching,
                             std::uint64_t seed, double gamma = 0.9) {
  require(n_states >= 1 && n_actions >= 1, "random_mdp needs positive sizes");
  require(branching >= 1 && branching <= n_states, "branching must lie in [1, n_states]");
  Rng rng(seed);
  Table transition = Table::Zero(static_cast<Eigen::Index>(n_states * n_actions),
                                 static_cast<Eigen::Index>(n_states));
  std::vector<std::size_t> states(n_states);
  std::iota(states.begin(), states.end(), std::size_t{0});
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    std::vector<std::size_t> successors;
    std::sample(states.begin(), states.end(), std::back_inserter(successors), branching, rng);
    const Vector weights = detail::dirichlet_ones(branching, rng);
    for (std::size_t k = 0; k < branching; ++k)
      transition(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(successors[k])) = weights(static_cast<Eigen::Index>(k));
    // Re-normalize in the row's own summation order.
    transition.row(static_cast<Eigen::Index>(row)) /= transition.row(static_cast<Eigen::Index>(row)).sum();
  }
  Vector init = detail::dirichlet_ones(n_states, rng);
  init /= init.sum();
  return make_mdp(n_states, n_actions, std::move(transition), std::move(init), gamma);
}

/// Softmax policy with N(0, scale^2) logits.
inline Policy random_policy(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                            double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Table logits(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = normal(rng);
  return Policy(std::move(logits));
}

inline constexpr std::size_t kDefaultReplayCapacity = 100000;

/// FIFO replay buffer. Each entry remembers its episode so geometric offsets
/// can walk the stored tail of that episode.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = kDefaultReplayCapacity) : capacity_(capacity) {
    require(capacity >= 1, "replay capacity must be positive");
  }

  void push(const Transition& t, std::uint64_t episode = 0) {
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back({t, episode});
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return entries_.at(i).transition; }
  std::uint64_t episode_of(std::size_t i) const { return entries_.at(i).episode; }

  /// Entries from i to the last stored entry of the same episode.
  std::size_t tail_length(std::size_t i) const {
    std::size_t n = 1;
    while (i + n < entries_.size() && entries_[i + n].episode == entries_[i].episode) ++n;
    return n;
  }

  template <std::uniform_random_bit_generator URBG>
  std::size_t sample_index(URBG& rng) const {
    require(!entries_.empty(), "cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
    return pick(rng);
  }

  /// Uniform draws with replacement.
  template <std::uniform_random_bit_generator URBG>
  std::vector<Transition> sample(std::size_t batch_size, URBG& rng) const {
    require(!entries_.empty(), "cannot sample from an empty replay buffer");
    std::vector<Transition> out;
    out.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) out.push_back(at(sample_index(rng)));
    return out;
  }

  std::vector<Transition> sample(std::size_t batch_size, std::uint64_t seed) const {
    Rng rng(seed);
    return sample(batch_size, rng);
  }

  std::vector<Transition> transitions() const {
    std::vector<Transition> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.transition);
    return out;
  }

 private:
  struct Entry {
    Transition transition;
    std::uint64_t episode;
  };
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

// JSON lines, one transition per line: {"s":..,"a":..,"s_next":..,"episode_start":..}.

inline void write_dataset_jsonl(const ExpertDataset& data, std::ostream& out) {
  for (const auto& t : data.transitions()) {
    nlohmann::json j = {{"s", t.state}, {"a", t.action}, {"s_next", t.next_state},
                        {"episode_start", t.episode_start}};
    out << j.dump() << '\n';
  }
}

/// Source trajectories are rebuilt by chaining: a transition continues the
/// current trajectory when its state equals the previous next_state.
inline ExpertDataset read_dataset_jsonl(std::istream& in, std::size_t n_states,
                                        std::size_t n_actions) {
  ExpertDataset data(n_states, n_actions);
  Trajectory current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Transition t;
    try {
      const auto j = nlohmann::json::parse(line);
      t = {j.at("s").get<std::size_t>(), j.at("a").get<std::size_t>(),
           j.at("s_next").get<std::size_t>(), j.at("episode_start").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
      throw PreconditionError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    require(t.state < n_states && t.next_state < n_states && t.episode_start < n_states &&
                t.action < n_actions,
            "dataset line " + std::to_string(line_no) + ": index out of range");
    if (!current.states.empty() && current.states.back() != t.state) {
      data.add_trajectory(current);
      current = {};
    }
    if (current.states.empty()) current.states.push_back(t.state);
    current.actions.push_back(t.action);
    current.states.push_back(t.next_state);
  }
  if (!current.actions.empty()) data.add_trajectory(current);
  return data;
}

}  // namespace valuedice

#endif  // VALUEDICE_ENVIRONMENTS_HPP_
