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

// KL divergence between occupancies, its Donsker-Varadhan dual, and the
// change of variables x = nu - B^pi nu that yields the off-policy objective.

#ifndef VALUEDICE_DIVERGENCE_HPP_
#define VALUEDICE_DIVERGENCE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>

#include "valuedice/errors.hpp"
#include "valuedice/mdp.hpp"

namespace valuedice {

/// Smoothing added to both sides of every log-ratio.
inline constexpr double kLogRatioEps = 1e-12;
/// Magnitude bound on dual values and on exponents of nu - B^pi nu.
inline constexpr double kClipBound = 40.0;

inline double clip_exponent(double x) { return std::clamp(x, -kClipBound, kClipBound); }

/// Test function x(s, a) of the DV representation, clipped to [-K, K].
class DualFunction {
 public:
  DualFunction() = default;
  explicit DualFunction(Table values) : values_(std::move(values)) {
    require(values_.allFinite(), "dual function entries must be finite");
    values_ = values_.cwiseMax(-kClipBound).cwiseMin(kClipBound);
  }
  const Table& values() const { return values_; }

 private:
  Table values_;
};

class NuFunction {
 public:
  NuFunction() = default;
  explicit NuFunction(Table values) : values_(std::move(values)) {
    require(values_.allFinite(), "nu entries must be finite");
  }
  static NuFunction zeros(std::size_t n_states, std::size_t n_actions) {
    return NuFunction(Table::Zero(static_cast<Eigen::Index>(n_states),
                                  static_cast<Eigen::Index>(n_actions)));
  }
  const Table& values() const { return values_; }
  Table& mutable_values() { return values_; }

 private:
  Table values_;
};

namespace detail {

inline void require_same_shape(const Table& a, const Table& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(what) + ": shapes differ");
}

}  // namespace detail

/// log E_w[exp(x)] for a distribution w, shifted by the max over the
/// support of w. The weights are renormalized, so a constant x returns that
/// constant exactly. Returns -inf when w has no positive entry.
inline double weighted_log_sum_exp(const Table& weights, const Table& x) {
  detail::require_same_shape(weights, x, "weighted_log_sum_exp");
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (weights.data()[i] > 0.0) top = std::max(top, x.data()[i]);
  if (!std::isfinite(top)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (weights.data()[i] <= 0.0) continue;
    acc += weights.data()[i] * std::exp(x.data()[i] - top);
    total += weights.data()[i];
  }
  return top + std::log(acc / total);
}

/// sum d_p log((d_p + eps) / (d_e + eps)); pairs with d_p = 0 contribute 0.
inline double kl_occupancy(const Occupancy& d_p, const Occupancy& d_e, double eps = kLogRatioEps) {
  detail::require_same_shape(d_p.values(), d_e.values(), "kl_occupancy");
  require(eps >= 0.0, "eps must be nonnegative");
  double total = 0.0;
  for (Eigen::Index i = 0; i < d_p.values().size(); ++i) {
    const double p = d_p.values().data()[i];
    if (p <= 0.0) continue;
    const double q = d_e.values().data()[i];
    total += p * std::log((p + eps) / (q + eps));
  }
  return total;
}

/// -KL(d_p || d_e) obtained as the normalized discounted return of the
/// per-step reward log(d_e / d_p), by policy evaluation on the MDP.
/// `d_p` must be the occupancy of `policy`.
inline double kl_as_discounted_return(const TabularMdp& mdp, const Policy& policy,
                                      const Occupancy& d_p, const Occupancy& d_e,
                                      double eps = kLogRatioEps) {
  detail::require_same_shape(d_p.values(), d_e.values(), "kl_as_discounted_return");
  const Occupancy exact = compute_occupancy(mdp, policy);
  require((exact.values() - d_p.values()).lpNorm<Eigen::Infinity>() <= 1e-9,
          "d_p is not the occupancy of the given policy");
  const Table reward = ((d_e.values().array() + eps) / (d_p.values().array() + eps)).log().matrix();
  const Vector v = state_values(policy, q_values(mdp, policy, reward));
  return (1.0 - mdp.gamma) * mdp.initial_dist.dot(v);
}

/// log E_{d_e}[e^x] - E_{d_p}[x]; its infimum over x is -KL(d_p || d_e).
inline double dv_objective(const DualFunction& x, const Occupancy& d_p, const Occupancy& d_e) {
  detail::require_same_shape(x.values(), d_p.values(), "dv_objective");
  detail::require_same_shape(d_p.values(), d_e.values(), "dv_objective");
  return weighted_log_sum_exp(d_e.values(), x.values()) -
         (d_p.values().array() * x.values().array()).sum();
}

/// Minimizer of the DV objective with the additive constant fixed to 0.
inline DualFunction dv_optimal_x(const Occupancy& d_p, const Occupancy& d_e,
                                 double eps = kLogRatioEps) {
  detail::require_same_shape(d_p.values(), d_e.values(), "dv_optimal_x");
  return DualFunction(((d_p.values().array() + eps) / (d_e.values().array() + eps)).log().matrix());
}

/// Expected Bellman operator with zero reward:
///   (B^pi nu)(s,a) = gamma sum_{s'} p(s'|s,a) sum_{a'} pi(a'|s') nu(s',a').
inline Table bellman_operator(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu) {
  detail::require_policy_shape(mdp, policy);
  detail::require_table_shape(mdp, nu.values(), "nu");
  const Vector next_value = state_values(policy, nu.values());
  const Vector backed_up = mdp.gamma * (mdp.transition * next_value);
  return detail::unflatten(backed_up, mdp.n_states, mdp.n_actions);
}

/// nu - B^pi nu, unclipped.
inline Table bellman_residual(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu) {
  return nu.values() - bellman_operator(mdp, policy, nu);
}

inline DualFunction x_from_nu(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu) {
  return DualFunction(bellman_residual(mdp, policy, nu));
}

/// (1 - gamma) E_{s0 ~ p0, a0 ~ pi}[nu(s0, a0)].
inline double initial_value_term(const TabularMdp& mdp, const Policy& policy,
                                 const NuFunction& nu) {
  return (1.0 - mdp.gamma) * mdp.initial_dist.dot(state_values(policy, nu.values()));
}

/// log E_{d_e}[e^{nu - B^pi nu}] - (1 - gamma) E_{p0, pi}[nu]. The second
/// term is the telescoped form of E_{d^pi}[nu - B^pi nu].
inline double j_dice_exact(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu,
                           const Occupancy& d_e) {
  detail::require_table_shape(mdp, d_e.values(), "d_e");
  const Table x = bellman_residual(mdp, policy, nu).unaryExpr(&clip_exponent);
  return weighted_log_sum_exp(d_e.values(), x) - initial_value_term(mdp, policy, nu);
}

}  // namespace valuedice

#endif  // VALUEDICE_DIVERGENCE_HPP_
