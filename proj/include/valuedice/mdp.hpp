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

// Finite MDPs, tabular softmax policies, exact discounted occupancies and
// trajectory sampling.

#ifndef VALUEDICE_MDP_HPP_
#define VALUEDICE_MDP_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "valuedice/errors.hpp"

namespace valuedice {

/// Row-major dense table. Tables over (state, action) have one row per state.
using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Logit given to the chosen action of a deterministic expert; the other
/// actions keep logit 0, so their probability is below 1e-21.
inline constexpr double kDeterministicLogit = 50.0;

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr double kOccupancyTolerance = 1e-9;

struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// Row `s * n_actions + a` holds p(. | s, a).
  Table transition;
  Vector initial_dist;
  double gamma = 0.0;
  /// Carried for completeness; imitation code never reads it.
  Table reward;

  std::size_t pair_index(std::size_t s, std::size_t a) const { return s * n_actions + a; }
  std::size_t n_pairs() const { return n_states * n_actions; }

  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return transition(static_cast<Eigen::Index>(pair_index(s, a)),
                      static_cast<Eigen::Index>(next));
  }

  std::span<const double> next_state_dist(std::size_t s, std::size_t a) const {
    return {transition.data() + pair_index(s, a) * n_states, n_states};
  }
};

/// Lists every violated invariant; empty when the MDP is well formed.
inline std::vector<std::string> validate_mdp(const TabularMdp& mdp) {
  std::vector<std::string> report;
  if (mdp.n_states == 0) report.emplace_back("n_states must be positive");
  if (mdp.n_actions == 0) report.emplace_back("n_actions must be positive");
  if (!report.empty()) return report;

  const auto rows = static_cast<Eigen::Index>(mdp.n_pairs());
  const auto cols = static_cast<Eigen::Index>(mdp.n_states);
  if (mdp.transition.rows() != rows || mdp.transition.cols() != cols) {
    report.emplace_back("transition must have shape [n_states][n_actions][n_states]");
  } else {
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double total = 0.0;
        bool negative = false;
        bool finite = true;
        for (double v : mdp.next_state_dist(s, a)) {
          if (!std::isfinite(v)) finite = false;
          if (v < 0.0) negative = true;
          total += v;
        }
        std::ostringstream row;
        row << "transition[" << s << "][" << a << "]";
        if (!finite) {
          report.push_back(row.str() + " has non-finite entries");
        } else if (negative) {
          report.push_back(row.str() + " has negative entries");
        } else if (std::abs(total - 1.0) > kStochasticTolerance) {
          std::ostringstream msg;
          msg << row.str() << " sums to " << total << ", expected 1";
          report.push_back(msg.str());
        }
      }
    }
  }

  if (mdp.initial_dist.size() != cols) {
    report.emplace_back("initial_dist must have n_states entries");
  } else if (!mdp.initial_dist.allFinite() || (mdp.initial_dist.array() < 0.0).any()) {
    report.emplace_back("initial_dist must be finite and nonnegative");
  } else if (std::abs(mdp.initial_dist.sum() - 1.0) > kStochasticTolerance) {
    std::ostringstream msg;
    msg << "initial_dist sums to " << mdp.initial_dist.sum() << ", expected 1";
    report.push_back(msg.str());
  }

  if (!(mdp.gamma >= 0.0)) report.emplace_back("gamma must be >= 0");
  if (!(mdp.gamma < 1.0)) report.emplace_back("gamma must be < 1");

  if (mdp.reward.size() != 0 &&
      (mdp.reward.rows() != cols || mdp.reward.cols() != static_cast<Eigen::Index>(mdp.n_actions))) {
    report.emplace_back("reward must have shape [n_states][n_actions]");
  }
  return report;
}

inline void require_valid_mdp(const TabularMdp& mdp) {
  const auto report = validate_mdp(mdp);
  if (report.empty()) return;
  std::string message = "invalid MDP:";
  for (const auto& line : report) message += " " + line + ";";
  throw PreconditionError(message);
}

/// Builds and validates an MDP; rewards default to zero.
inline TabularMdp make_mdp(std::size_t n_states, std::size_t n_actions, Table transition,
                           Vector initial_dist, double gamma) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.transition = std::move(transition);
  mdp.initial_dist = std::move(initial_dist);
  mdp.gamma = gamma;
  mdp.reward = Table::Zero(static_cast<Eigen::Index>(n_states),
                           static_cast<Eigen::Index>(n_actions));
  require_valid_mdp(mdp);
  return mdp;
}

/// Tabular softmax policy. Probabilities are cached at construction and are
/// strictly positive for any finite logits.
class Policy {
 public:
  Policy() = default;

  explicit Policy(Table logits) : logits_(std::move(logits)) {
    require(logits_.rows() > 0 && logits_.cols() > 0, "policy logits must be non-empty");
    require(logits_.allFinite(), "policy logits must be finite");
    probs_.resize(logits_.rows(), logits_.cols());
    for (Eigen::Index s = 0; s < logits_.rows(); ++s) {
      const double top = logits_.row(s).maxCoeff();
      probs_.row(s) = (logits_.row(s).array() - top).exp();
      probs_.row(s) /= probs_.row(s).sum();
    }
  }

  const Table& logits() const { return logits_; }
  const Table& probs() const { return probs_; }
  std::size_t n_states() const { return static_cast<std::size_t>(logits_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(logits_.cols()); }

  double prob(std::size_t s, std::size_t a) const {
    return probs_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  }

  std::span<const double> action_probs(std::size_t s) const {
    return {probs_.data() + s * n_actions(), n_actions()};
  }

  /// Lowest-index action of maximal probability.
  std::size_t greedy_action(std::size_t s) const {
    Eigen::Index best = 0;
    probs_.row(static_cast<Eigen::Index>(s)).maxCoeff(&best);
    return static_cast<std::size_t>(best);
  }

 private:
  Table logits_;
  Table probs_;
};

inline Policy softmax_policy(Table logits) { return Policy(std::move(logits)); }

inline Policy uniform_policy(std::size_t n_states, std::size_t n_actions) {
  return Policy(Table::Zero(static_cast<Eigen::Index>(n_states),
                            static_cast<Eigen::Index>(n_actions)));
}

/// Policy that takes `actions[s]` with logit kDeterministicLogit.
inline Policy deterministic_policy(std::span<const std::size_t> actions, std::size_t n_actions) {
  Table logits = Table::Zero(static_cast<Eigen::Index>(actions.size()),
                             static_cast<Eigen::Index>(n_actions));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] < n_actions, "deterministic action out of range");
    logits(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) =
        kDeterministicLogit;
  }
  return Policy(std::move(logits));
}

/// Discounted state-action distribution. Also used for expert, replay and
/// mixture distributions.
class Occupancy {
 public:
  Occupancy() = default;

  explicit Occupancy(Table values, double tolerance = kOccupancyTolerance)
      : values_(std::move(values)) {
    require(values_.size() > 0, "occupancy must be non-empty");
    require(values_.allFinite(), "occupancy entries must be finite");
    require((values_.array() >= 0.0).all(), "occupancy entries must be nonnegative");
    require(std::abs(values_.sum() - 1.0) <= tolerance, "occupancy must sum to 1");
  }

  const Table& values() const { return values_; }
  std::size_t n_states() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(values_.cols()); }

  double operator()(std::size_t s, std::size_t a) const {
    return values_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  }

  Vector state_marginal() const { return values_.rowwise().sum(); }

 private:
  Table values_;
};

/// (1 - w) * a + w * b.
inline Occupancy mix_occupancies(const Occupancy& a, const Occupancy& b, double w) {
  require(a.values().rows() == b.values().rows() && a.values().cols() == b.values().cols(),
          "occupancy shapes differ");
  require(w >= 0.0 && w <= 1.0, "mixture weight must lie in [0, 1]");
  return Occupancy((1.0 - w) * a.values() + w * b.values());
}

struct Trajectory {
  std::vector<std::size_t> states;   // s_0 .. s_T
  std::vector<std::size_t> actions;  // a_0 .. a_{T-1}

  std::size_t horizon() const { return actions.size(); }
  bool operator==(const Trajectory&) const = default;
};

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  std::size_t next_state = 0;
  std::size_t episode_start = 0;

  bool operator==(const Transition&) const = default;
};

namespace detail {

inline void require_policy_shape(const TabularMdp& mdp, const Policy& policy) {
  require(policy.n_states() == mdp.n_states && policy.n_actions() == mdp.n_actions,
          "policy shape does not match the MDP");
}

inline void require_table_shape(const TabularMdp& mdp, const Table& table, const char* what) {
  require(table.rows() == static_cast<Eigen::Index>(mdp.n_states) &&
              table.cols() == static_cast<Eigen::Index>(mdp.n_actions),
          std::string(what) + " shape does not match the MDP");
}

/// Matrix P_pi over pairs: P_pi[(s,a),(s',a')] = p(s'|s,a) pi(a'|s').
inline Eigen::MatrixXd pair_transition_matrix(const TabularMdp& mdp, const Policy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.n_pairs());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = static_cast<Eigen::Index>(mdp.pair_index(s, a));
      for (std::size_t next = 0; next < mdp.n_states; ++next) {
        const double p = mdp.p(s, a, next);
        if (p == 0.0) continue;
        for (std::size_t b = 0; b < mdp.n_actions; ++b) {
          m(row, static_cast<Eigen::Index>(mdp.pair_index(next, b))) += p * policy.prob(next, b);
        }
      }
    }
  }
  return m;
}

inline Vector flatten(const Table& t) {
  return Eigen::Map<const Vector>(t.data(), t.size());
}

inline Table unflatten(const Vector& v, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const Table>(v.data(), static_cast<Eigen::Index>(rows),
                                 static_cast<Eigen::Index>(cols));
}

}  // namespace detail

/// Inverse-CDF draw from a finite distribution.
template <std::uniform_random_bit_generator URBG>
std::size_t sample_categorical(std::span<const double> probs, URBG& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

template <std::uniform_random_bit_generator URBG>
std::size_t sample_categorical(const Vector& probs, URBG& rng) {
  return sample_categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), rng);
}

/// Untruncated t ~ Geom(1 - gamma) on {0, 1, ...}, so P(t >= k) = gamma^k.
template <std::uniform_random_bit_generator URBG>
std::size_t sample_geometric(double gamma, URBG& rng) {
  if (gamma <= 0.0) return 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  return static_cast<std::size_t>(std::floor(std::log1p(-u) / std::log(gamma)));
}

/// Solves the discounted balance system
///   d(s,a) = (1-gamma) p0(s) pi(a|s) + gamma pi(a|s) sum_{s',a'} d(s',a') p(s|s',a')
/// with a dense LU factorization.
inline Occupancy compute_occupancy(const TabularMdp& mdp, const Policy& policy) {
  detail::require_policy_shape(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_pairs());
  const Eigen::MatrixXd transfer = detail::pair_transition_matrix(mdp, policy);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * transfer.transpose();
  Vector rhs(n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      rhs(static_cast<Eigen::Index>(mdp.pair_index(s, a))) =
          (1.0 - mdp.gamma) * mdp.initial_dist(static_cast<Eigen::Index>(s)) * policy.prob(s, a);
    }
  }
  Vector d = system.partialPivLu().solve(rhs);
  const double residual = (system * d - rhs).lpNorm<Eigen::Infinity>();
  if (!d.allFinite() || residual > 1e-10) {
    std::ostringstream msg;
    msg << "occupancy solve failed (residual " << residual << ")";
    throw NumericalError(msg.str());
  }
  // Round-off can leave entries like -1e-18 on unreachable pairs.
  if (d.minCoeff() < -1e-12) throw NumericalError("occupancy solve produced negative mass");
  d = d.cwiseMax(0.0);
  return Occupancy(detail::unflatten(d, mdp.n_states, mdp.n_actions));
}

/// Max-norm residual of the balance system for a candidate occupancy.
inline double balance_residual(const TabularMdp& mdp, const Policy& policy, const Table& d) {
  Table inflow = Table::Zero(static_cast<Eigen::Index>(mdp.n_states), 1);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      for (std::size_t next = 0; next < mdp.n_states; ++next)
        inflow(static_cast<Eigen::Index>(next)) +=
            d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) * mdp.p(s, a, next);
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double rhs = policy.prob(s, a) *
                         ((1.0 - mdp.gamma) * mdp.initial_dist(static_cast<Eigen::Index>(s)) +
                          mdp.gamma * inflow(static_cast<Eigen::Index>(s)));
      worst = std::max(worst, std::abs(d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) - rhs));
    }
  }
  return worst;
}

template <std::uniform_random_bit_generator URBG>
Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy, std::size_t horizon,
                             URBG& rng) {
  detail::require_policy_shape(mdp, policy);
  require(horizon >= 1, "horizon must be positive");
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.actions.reserve(horizon);
  std::size_t s = sample_categorical(mdp.initial_dist, rng);
  traj.states.push_back(s);
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = sample_categorical(policy.action_probs(s), rng);
    s = sample_categorical(mdp.next_state_dist(s, a), rng);
    traj.actions.push_back(a);
    traj.states.push_back(s);
  }
  return traj;
}

inline Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy,
                                    std::size_t horizon, std::uint64_t seed) {
  Rng rng(seed);
  return sample_trajectory(mdp, policy, horizon, rng);
}

/// Unbiased estimate of the discounted occupancy: each sample rolls a fresh
/// prefix of length t ~ Geom(1 - gamma) and records (s_t, a_t).
template <std::uniform_random_bit_generator URBG>
Occupancy occupancy_monte_carlo(const TabularMdp& mdp, const Policy& policy,
                                std::size_t n_samples, URBG& rng) {
  detail::require_policy_shape(mdp, policy);
  require(n_samples >= 1, "n_samples must be positive");
  Table counts = Table::Zero(static_cast<Eigen::Index>(mdp.n_states),
                             static_cast<Eigen::Index>(mdp.n_actions));
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t t = sample_geometric(mdp.gamma, rng);
    std::size_t s = sample_categorical(mdp.initial_dist, rng);
    std::size_t a = sample_categorical(policy.action_probs(s), rng);
    for (std::size_t k = 0; k < t; ++k) {
      s = sample_categorical(mdp.next_state_dist(s, a), rng);
      a = sample_categorical(policy.action_probs(s), rng);
    }
    counts(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) += 1.0;
  }
  return Occupancy(counts / static_cast<double>(n_samples));
}

inline Occupancy occupancy_monte_carlo(const TabularMdp& mdp, const Policy& policy,
                                       std::size_t n_samples, std::uint64_t seed) {
  Rng rng(seed);
  return occupancy_monte_carlo(mdp, policy, n_samples, rng);
}

/// Action-value table of `reward` under `policy`: q = r + gamma P_pi q.
inline Table q_values(const TabularMdp& mdp, const Policy& policy, const Table& reward) {
  detail::require_policy_shape(mdp, policy);
  detail::require_table_shape(mdp, reward, "reward");
  const auto n = static_cast<Eigen::Index>(mdp.n_pairs());
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(n, n) - mdp.gamma * detail::pair_transition_matrix(mdp, policy);
  const Vector q = system.partialPivLu().solve(detail::flatten(reward));
  if (!q.allFinite()) throw NumericalError("policy evaluation produced non-finite values");
  return detail::unflatten(q, mdp.n_states, mdp.n_actions);
}

/// V(s) = sum_a pi(a|s) table(s, a).
inline Vector state_values(const Policy& policy, const Table& table) {
  return (policy.probs().array() * table.array()).rowwise().sum();
}

// JSON: {n_states, n_actions, gamma, initial_dist: [..], transition: [s][a][s']}.

inline nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  j["initial_dist"] = std::vector<double>(mdp.initial_dist.data(),
                                          mdp.initial_dist.data() + mdp.initial_dist.size());
  auto transition = nlohmann::json::array();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    auto per_action = nlohmann::json::array();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.next_state_dist(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transition.push_back(std::move(per_action));
  }
  j["transition"] = std::move(transition);
  return j;
}

inline TabularMdp mdp_from_json(const nlohmann::json& j) {
  TabularMdp mdp;
  try {
    mdp.n_states = j.at("n_states").get<std::size_t>();
    mdp.n_actions = j.at("n_actions").get<std::size_t>();
    mdp.gamma = j.at("gamma").get<double>();
    const auto init = j.at("initial_dist").get<std::vector<double>>();
    const auto trans = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
    require(init.size() == mdp.n_states, "initial_dist must have n_states entries");
    require(trans.size() == mdp.n_states, "transition must have n_states rows");
    mdp.initial_dist = Eigen::Map<const Vector>(init.data(), static_cast<Eigen::Index>(init.size()));
    mdp.transition.resize(static_cast<Eigen::Index>(mdp.n_pairs()),
                          static_cast<Eigen::Index>(mdp.n_states));
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      require(trans[s].size() == mdp.n_actions, "transition[s] must have n_actions rows");
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        require(trans[s][a].size() == mdp.n_states, "transition[s][a] must have n_states entries");
        for (std::size_t next = 0; next < mdp.n_states; ++next)
          mdp.transition(static_cast<Eigen::Index>(mdp.pair_index(s, a)),
                         static_cast<Eigen::Index>(next)) = trans[s][a][next];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed MDP json: ") + e.what());
  }
  mdp.reward = Table::Zero(static_cast<Eigen::Index>(mdp.n_states),
                           static_cast<Eigen::Index>(mdp.n_actions));
  require_valid_mdp(mdp);
  return mdp;
}

inline TabularMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open MDP file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError("cannot parse MDP file " + path + ": " + e.what());
  }
  return mdp_from_json(j);
}

}  // namespace valuedice

#endif  // VALUEDICE_MDP_HPP_
