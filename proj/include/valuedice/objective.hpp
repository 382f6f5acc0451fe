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

// Exact (occupancy-based) ValueDICE objectives, their analytic gradients and
// a Newton solver for the inner minimization over nu.

#ifndef VALUEDICE_OBJECTIVE_HPP_
#define VALUEDICE_OBJECTIVE_HPP_

#include <cmath>
#include <limits>

#include "valuedice/divergence.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/mdp.hpp"

namespace valuedice {

inline constexpr double kDefaultAlpha = 0.1;

/// Replay-mixing weight of the regularized objective.
struct MixConfig {
  double alpha = kDefaultAlpha;

  void validate() const { require(alpha >= 0.0 && alpha < 1.0, "alpha must lie in [0, 1)"); }
};

namespace detail {

/// Shared pieces of J_mix at (policy, nu).
struct MixTerms {
  Table residual;       // x = nu - B^pi nu, unclipped
  Table mix;            // (1 - alpha) d_e + alpha d_rb
  Table softmax;        // mix e^{clip x} / Z
  Table active;         // 1 where |x| < K (clip is the identity there)
  Table exp_over_z;     // e^{clip x} / Z
  double log_z = 0.0;   // log sum mix e^{clip x}
};

inline MixTerms mix_terms(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu,
                          const Occupancy& d_e, const Occupancy& d_rb, const MixConfig& mix) {
  mix.validate();
  require_policy_shape(mdp, policy);
  require_table_shape(mdp, nu.values(), "nu");
  require_table_shape(mdp, d_e.values(), "d_e");
  require_table_shape(mdp, d_rb.values(), "d_rb");
  MixTerms t;
  t.residual = bellman_residual(mdp, policy, nu);
  t.mix = (1.0 - mix.alpha) * d_e.values() + mix.alpha * d_rb.values();
  const Table clipped = t.residual.unaryExpr(&clip_exponent);
  t.log_z = weighted_log_sum_exp(t.mix, clipped);
  t.exp_over_z = (clipped.array() - t.log_z).exp().matrix();
  t.softmax = (t.mix.array() * t.exp_over_z.array()).matrix() / t.mix.sum();
  t.active = (t.residual.array().abs() < kClipBound).cast<double>().matrix();
  return t;
}

/// Gradient w.r.t. nu of sum_{s,a} c(s,a) x(s,a) - lin * sum_s p0(s) V_nu(s),
/// given the coefficient table c on x = nu - B^pi nu.
inline Table residual_pullback(const TabularMdp& mdp, const Policy& policy, const Table& coeff,
                               double initial_weight, Vector* state_weight_out) {
  // inflow(s') = sum_{s,a} p(s'|s,a) coeff(s,a)
  const Vector inflow = mdp.transition.transpose() * flatten(coeff);
  const Vector u = mdp.gamma * inflow + initial_weight * mdp.initial_dist;
  if (state_weight_out) *state_weight_out = u;
  Table grad = coeff;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      grad(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) -=
          u(static_cast<Eigen::Index>(s)) * policy.prob(s, a);
  return grad;
}

}  // namespace detail

/// Chain rule through the softmax: maps dJ/dpi(a|s) to dJ/dlogit(s, a).
inline Table logit_gradient(const Policy& policy, const Table& grad_probs) {
  const Table& p = policy.probs();
  const Vector baseline = (p.array() * grad_probs.array()).rowwise().sum();
  Table out = grad_probs;
  out.colwise() -= baseline;
  return (p.array() * out.array()).matrix();
}

/// log E_{d_mix}[e^{nu - B^pi nu}] - (1-alpha)(1-gamma) E_{p0,pi}[nu]
///   - alpha E_{d_rb}[nu - B^pi nu],  d_mix = (1-alpha) d_e + alpha d_rb.
inline double j_dice_mix_exact(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu,
                               const Occupancy& d_e, const Occupancy& d_rb, const MixConfig& mix) {
  const auto t = detail::mix_terms(mdp, policy, nu, d_e, d_rb, mix);
  return t.log_z - (1.0 - mix.alpha) * initial_value_term(mdp, policy, nu) -
         mix.alpha * (d_rb.values().array() * t.residual.array()).sum();
}

inline Table grad_nu_exact(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu,
                           const Occupancy& d_e, const Occupancy& d_rb, const MixConfig& mix) {
  const auto t = detail::mix_terms(mdp, policy, nu, d_e, d_rb, mix);
  const Table coeff = (t.softmax.array() * t.active.array()).matrix() - mix.alpha * d_rb.values();
  return detail::residual_pullback(mdp, policy, coeff, (1.0 - mix.alpha) * (1.0 - mdp.gamma),
                                   nullptr);
}

/// Gradient w.r.t. policy logits with d_rb held fixed. The policy enters
/// through B^pi nu and the initial-state expectation only.
inline Table grad_policy_exact(const TabularMdp& mdp, const Policy& policy, const NuFunction& nu,
                               const Occupancy& d_e, const Occupancy& d_rb,
                               const MixConfig& mix) {
  const auto t = detail::mix_terms(mdp, policy, nu, d_e, d_rb, mix);
  const Table coeff = (t.softmax.array() * t.active.array()).matrix() - mix.alpha * d_rb.values();
  Vector u;
  detail::residual_pullback(mdp, policy, coeff, (1.0 - mix.alpha) * (1.0 - mdp.gamma), &u);
  // dJ/dpi(a|s) = -u(s) nu(s, a)
  Table grad_probs = nu.values();
  grad_probs.array().colwise() *= -u.array();
  return logit_gradient(policy, grad_probs);
}

/// J_mix with the replay occupancy tied to the policy: d_rb = d^pi.
inline double j_dice_tied_replay(const TabularMdp& mdp, const Policy& policy,
                                 const NuFunction& nu, const Occupancy& d_e,
                                 const MixConfig& mix) {
  return j_dice_mix_exact(mdp, policy, nu, d_e, compute_occupancy(mdp, policy), mix);
}

/// Full logit gradient of j_dice_tied_replay. The d^pi dependence is
/// differentiated through the balance system: for an upstream gradient g on
/// d^pi, dJ/dpi(a|s) = rho(s) Q_g(s, a) with rho the state marginal of d^pi
/// and Q_g the action values of reward g.
inline Table grad_policy_tied_replay(const TabularMdp& mdp, const Policy& policy,
                                     const NuFunction& nu, const Occupancy& d_e,
                                     const MixConfig& mix) {
  const Occupancy d_pi = compute_occupancy(mdp, policy);
  const auto t = detail::mix_terms(mdp, policy, nu, d_e, d_pi, mix);
  const Table coeff = (t.softmax.array() * t.active.array()).matrix() - mix.alpha * d_pi.values();
  Vector u;
  detail::residual_pullback(mdp, policy, coeff, (1.0 - mix.alpha) * (1.0 - mdp.gamma), &u);
  Table grad_probs = nu.values();
  grad_probs.array().colwise() *= -u.array();
  if (mix.alpha > 0.0) {
    const Table upstream = (mix.alpha * (t.exp_over_z - t.residual)).eval();
    const Table q = q_values(mdp, policy, upstream);
    const Vector rho = d_pi.state_marginal();
    grad_probs += (q.array().colwise() * rho.array()).matrix();
  }
  return logit_gradient(policy, grad_probs);
}

struct InnerSolveOptions {
  double gradient_tolerance = 1e-9;
  std::size_t max_iterations = 200;
};

struct InnerSolveResult {
  NuFunction nu;
  double gradient_norm = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

/// Shifts nu by a constant so that log E_{d_mix}[e^{nu - B^pi nu}] = 0.
/// J_mix is invariant to the shift; the DV constant then becomes 0.
inline NuFunction canonicalize_nu(const TabularMdp& mdp, const Policy& policy,
                                  const NuFunction& nu, const Occupancy& d_e,
                                  const Occupancy& d_rb, const MixConfig& mix) {
  const auto t = detail::mix_terms(mdp, policy, nu, d_e, d_rb, mix);
  const double shift = -t.log_z / (1.0 - mdp.gamma);
  return NuFunction((nu.values().array() + shift).matrix());
}

/// Minimizes J_mix over nu at a fixed policy by damped Newton steps with a
/// backtracking line search. The Hessian is A^T (diag(w) - w w^T) A with
/// A = I - gamma P_pi and w the softmax weights. Returns the canonical nu.
inline InnerSolveResult minimize_nu(const TabularMdp& mdp, const Policy& policy,
                                    const Occupancy& d_e, const Occupancy& d_rb,
                                    const MixConfig& mix, NuFunction start,
                                    const InnerSolveOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(mdp.n_pairs());
  const Eigen::MatrixXd a_matrix =
      Eigen::MatrixXd::Identity(n, n) - mdp.gamma * detail::pair_transition_matrix(mdp, policy);
  InnerSolveResult result;
  result.nu = std::move(start);
  double value = j_dice_mix_exact(mdp, policy, result.nu, d_e, d_rb, mix);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Table grad = grad_nu_exact(mdp, policy, result.nu, d_e, d_rb, mix);
    result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    result.iterations = it;
    if (result.gradient_norm < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    const auto t = detail::mix_terms(mdp, policy, result.nu, d_e, d_rb, mix);
    const Vector w = detail::flatten((t.softmax.array() * t.active.array()).matrix());
    const Eigen::MatrixXd curvature = Eigen::MatrixXd(w.asDiagonal()) - w * w.transpose();
    Eigen::MatrixXd hessian = a_matrix.transpose() * curvature * a_matrix;
    // The constant direction is flat; a small ridge keeps the factorization definite.
    const double ridge = 1e-12 * (1.0 + hessian.diagonal().cwiseAbs().maxCoeff());
    hessian.diagonal().array() += ridge;
    Vector step = -hessian.ldlt().solve(detail::flatten(grad));
    if (!step.allFinite() || step.dot(detail::flatten(grad)) >= 0.0) step = -detail::flatten(grad);

    double scale = 1.0;
    bool accepted = false;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      NuFunction trial(result.nu.values() +
                       scale * detail::unflatten(step, mdp.n_states, mdp.n_actions));
      const double trial_value = j_dice_mix_exact(mdp, policy, trial, d_e, d_rb, mix);
      if (std::isfinite(trial_value) &&
          trial_value <= value + 1e-4 * scale * step.dot(detail::flatten(grad))) {
        result.nu = std::move(trial);
        value = trial_value;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }
  if (!result.converged) {
    const Table grad = grad_nu_exact(mdp, policy, result.nu, d_e, d_rb, mix);
    result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    result.converged = result.gradient_norm < options.gradient_tolerance;
  }
  result.nu = canonicalize_nu(mdp, policy, result.nu, d_e, d_rb, mix);
  return result;
}

}  // namespace valuedice

#endif  // VALUEDICE_OBJECTIVE_HPP_
