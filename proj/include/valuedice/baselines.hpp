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

// Behavioral cloning and tabular GAIL baselines.

#ifndef VALUEDICE_BASELINES_HPP_
#define VALUEDICE_BASELINES_HPP_

#include <cmath>
#include <optional>

#include "valuedice/divergence.hpp"
#include "valuedice/environments.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/mdp.hpp"
#include "valuedice/objective.hpp"
#include "valuedice/trainer.hpp"

namespace valuedice {

inline constexpr double kDefaultBcRegularizer = 1e-4;

namespace detail {

/// log(sigmoid(l)) without overflow.
inline double log_sigmoid(double l) { return l >= 0.0 ? -std::log1p(std::exp(-l)) : l - std::log1p(std::exp(l)); }

inline Table state_action_counts(const ExpertDataset& data) {
  Table counts = Table::Zero(static_cast<Eigen::Index>(data.n_states()),
                             static_cast<Eigen::Index>(data.n_actions()));
  for (const auto& t : data.transitions())
    counts(static_cast<Eigen::Index>(t.state), static_cast<Eigen::Index>(t.action)) += 1.0;
  return counts;
}

}  // namespace detail

/// -(1/N) sum_k log pi(a_k|s_k) + weight * ||logits||^2.
inline double bc_objective(const Policy& policy, const ExpertDataset& data, double weight) {
  require(!data.empty(), "demonstrations are empty");
  double nll = 0.0;
  for (const auto& t : data.transitions()) nll -= std::log(policy.prob(t.state, t.action));
  return nll / static_cast<double>(data.size()) + weight * policy.logits().squaredNorm();
}

/// Minimizes bc_objective. The problem separates per state; each state is
/// solved by Newton's method. States without data keep zero logits, i.e. a
/// uniform action distribution. With weight = 0 the empirical conditionals
/// are returned directly (unobserved actions get logit -kDeterministicLogit
/// relative to the best one).
inline Policy bc_fit(const ExpertDataset& data, double weight = kDefaultBcRegularizer) {
  require(!data.empty(), "demonstrations are empty");
  require(weight >= 0.0, "regularizer weight must be nonnegative");
  const Table counts = detail::state_action_counts(data);
  const double n_total = static_cast<double>(data.size());
  const auto n_actions = counts.cols();
  Table logits = Table::Zero(counts.rows(), n_actions);

  for (Eigen::Index s = 0; s < counts.rows(); ++s) {
    const double n_state = counts.row(s).sum();
    if (n_state == 0.0) continue;
    if (weight == 0.0) {
      const double top = std::log(counts.row(s).maxCoeff());
      for (Eigen::Index a = 0; a < n_actions; ++a)
        logits(s, a) = counts(s, a) > 0.0 ? std::log(counts(s, a)) - top : -kDeterministicLogit;
      continue;
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_actions);
    const Eigen::VectorXd freq = counts.row(s).transpose() / n_total;
    const double mass = n_state / n_total;
    auto objective = [&](const Eigen::VectorXd& th) {
      const double top = th.maxCoeff();
      const double lse = top + std::log((th.array() - top).exp().sum());
      return -(freq.array() * (th.array() - lse)).sum() + weight * th.squaredNorm();
    };
    for (int it = 0; it < 100; ++it) {
      const double top = theta.maxCoeff();
      Eigen::VectorXd pi = (theta.array() - top).exp();
      pi /= pi.sum();
      const Eigen::VectorXd grad = mass * pi - freq + 2.0 * weight * theta;
      if (grad.lpNorm<Eigen::Infinity>() < 1e-14) break;
      Eigen::MatrixXd hess = mass * (Eigen::MatrixXd(pi.asDiagonal()) - pi * pi.transpose());
      hess.diagonal().array() += 2.0 * weight;
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      double scale = 1.0;
      const double current = objective(theta);
      while (scale > 1e-12 && objective(theta + scale * step) > current + 1e-4 * scale * grad.dot(step))
        scale *= 0.5;
      theta += scale * step;
    }
    logits.row(s) = theta.transpose();
  }
  return Policy(std::move(logits));
}

/// Discriminator h(s,a) = sigmoid(logit(s,a)), so h lies strictly in (0, 1).
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(Table logits) : logits_(std::move(logits)) {
    require(logits_.allFinite(), "discriminator logits must be finite");
  }
  static Discriminator constant(std::size_t n_states, std::size_t n_actions, double h = 0.5) {
    require(h > 0.0 && h < 1.0, "h must lie in (0, 1)");
    return Discriminator(Table::Constant(static_cast<Eigen::Index>(n_states),
                                         static_cast<Eigen::Index>(n_actions),
                                         std::log(h / (1.0 - h))));
  }
  const Table& logits() const { return logits_; }
  Table& mutable_logits() { return logits_; }
  Table h() const { return (1.0 / (1.0 + (-logits_.array()).exp())).matrix(); }

 private:
  Table logits_;
};

/// E_{d_e}[log h] + E_{d_p}[log(1 - h)].
inline double gail_objective(const Discriminator& h, const Occupancy& d_e, const Occupancy& d_p) {
  detail::require_same_shape(h.logits(), d_e.values(), "gail_objective");
  detail::require_same_shape(d_e.values(), d_p.values(), "gail_objective");
  double total = 0.0;
  for (Eigen::Index i = 0; i < h.logits().size(); ++i) {
    const double l = h.logits().data()[i];
    const double e = d_e.values().data()[i];
    const double p = d_p.values().data()[i];
    if (e > 0.0) total += e * detail::log_sigmoid(l);
    if (p > 0.0) total += p * detail::log_sigmoid(-l);
  }
  return total;
}

/// d gail_objective / d logit = d_e (1 - h) - d_p h.
inline Table gail_discriminator_gradient(const Discriminator& h, const Occupancy& d_e,
                                         const Occupancy& d_p) {
  const Table hv = h.h();
  return (d_e.values().array() * (1.0 - hv.array()) - d_p.values().array() * hv.array()).matrix();
}

/// logit(h*) = log((d_e + eps) / (d_p + eps)), i.e. h* = d_e / (d_e + d_p).
inline Discriminator gail_optimal_discriminator(const Occupancy& d_e, const Occupancy& d_p,
                                                double eps = kLogRatioEps) {
  detail::require_same_shape(d_e.values(), d_p.values(), "gail_optimal_discriminator");
  return Discriminator(((d_e.values().array() + eps) / (d_p.values().array() + eps)).log().matrix());
}

/// Tabular GAIL against exact occupancies: nu_steps_per_policy_step ascent
/// steps on the discriminator (rate nu_learning_rate), then one exact
/// policy-gradient ascent step on E_{d^pi}[log h - log(1 - h)].
inline TrainResult gail_train(const TabularMdp& mdp, const Occupancy& d_e,
                              const TrainingConfig& cfg,
                              std::optional<Policy> initial_policy = std::nullopt) {
  require_valid_mdp(mdp);
  cfg.validate();
  detail::require_table_shape(mdp, d_e.values(), "d_e");
  Policy policy = initial_policy ? *initial_policy : uniform_policy(mdp.n_states, mdp.n_actions);
  detail::require_policy_shape(mdp, policy);
  Discriminator disc = Discriminator::constant(mdp.n_states, mdp.n_actions);

  TrainResult result;
  Occupancy d_pi = compute_occupancy(mdp, policy);
  auto record = [&](std::size_t update) {
    const double value = gail_objective(disc, d_e, d_pi);
    detail::require_finite(value, update, "discriminator objective");
    if (!detail::should_record(update, cfg)) return;
    result.kl_curve.push_back({update, kl_occupancy(d_pi, d_e)});
    result.objective_curve.push_back({update, value});
  };
  record(0);

  for (std::size_t update = 1; update <= cfg.n_updates; ++update) {
    for (std::size_t k = 0; k < cfg.nu_steps_per_policy_step; ++k) {
      disc.mutable_logits() += cfg.nu_learning_rate * gail_discriminator_gradient(disc, d_e, d_pi);
      disc.mutable_logits() = disc.logits().cwiseMax(-kClipBound).cwiseMin(kClipBound);
    }
    const Table q = q_values(mdp, policy, disc.logits());
    const Table grad_probs = (q.array().colwise() * d_pi.state_marginal().array()).matrix();
    policy = detail::ascend(policy, logit_gradient(policy, grad_probs), cfg, update);
    d_pi = compute_occupancy(mdp, policy);
    record(update);
  }
  result.final_state = SaddleState{policy, NuFunction::zeros(mdp.n_states, mdp.n_actions),
                                   cfg.n_updates};
  return result;
}

}  // namespace valuedice

#endif  // VALUEDICE_BASELINES_HPP_
