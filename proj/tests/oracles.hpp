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

// Reference computations for the test suites. Each one avoids the library
// code path it is used to check: occupancies by power series instead of a
// linear solve, objectives by explicit loops in long double, gradients by
// central differences.

#ifndef VALUEDICE_TESTS_ORACLES_HPP_
#define VALUEDICE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "valuedice/mdp.hpp"

namespace oracle {

using valuedice::Occupancy;
using valuedice::Policy;
using valuedice::TabularMdp;
using valuedice::Table;

inline long double sum_table(const Table& t) {
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < t.size(); ++i) total += t.data()[i];
  return total;
}

/// (1 - gamma) sum_t gamma^t Pr(s_t = s, a_t = a), summed until the tail
/// mass drops below 1e-17.
inline Table occupancy_power_series(const TabularMdp& mdp, const Policy& policy) {
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  std::vector<long double> state(S);
  for (std::size_t s = 0; s < S; ++s) state[s] = mdp.initial_dist(static_cast<Eigen::Index>(s));
  std::vector<long double> d(S * A, 0.0L);
  long double weight = 1.0L - mdp.gamma;
  while (weight > 1e-19L) {
    std::vector<long double> next(S, 0.0L);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const long double mass = state[s] * policy.prob(s, a);
        d[s * A + a] += weight * mass;
        for (std::size_t n = 0; n < S; ++n) next[n] += mass * mdp.p(s, a, n);
      }
    state = std::move(next);
    weight *= mdp.gamma;
  }
  Table out(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A));
  for (std::size_t i = 0; i < S * A; ++i) out.data()[i] = static_cast<double>(d[i]);
  return out;
}

/// Row sums of (row-major) logits -> probabilities, via long double.
inline long double policy_prob(const Policy& policy, std::size_t s, std::size_t a) {
  long double top = -INFINITY;
  for (std::size_t b = 0; b < policy.n_actions(); ++b)
    top = std::max<long double>(top, policy.logits()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)));
  long double z = 0.0L;
  for (std::size_t b = 0; b < policy.n_actions(); ++b)
    z += std::exp(static_cast<long double>(policy.logits()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b))) - top);
  return std::exp(static_cast<long double>(policy.logits()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a))) - top) / z;
}

inline long double kl(const Table& p, const Table& q, long double eps = 1e-12L) {
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const long double x = p.data()[i];
    if (x > 0.0L) total += x * std::log((x + eps) / (q.data()[i] + eps));
  }
  return total;
}

/// gamma * sum_{s'} p(s'|s,a) sum_{a'} pi(a'|s') nu(s',a'), by loops.
inline Table bellman(const TabularMdp& mdp, const Policy& policy, const Table& nu) {
  Table out = Table::Zero(nu.rows(), nu.cols());
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      long double acc = 0.0L;
      for (std::size_t n = 0; n < mdp.n_states; ++n)
        for (std::size_t b = 0; b < mdp.n_actions; ++b)
          acc += mdp.p(s, a, n) * policy_prob(policy, n, b) * nu(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(b));
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = static_cast<double>(mdp.gamma * acc);
    }
  return out;
}

/// (1 - gamma) E_{s ~ p0, a ~ pi}[nu(s, a)].
inline long double initial_term(const TabularMdp& mdp, const Policy& policy, const Table& nu) {
  long double acc = 0.0L;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      acc += mdp.initial_dist(static_cast<Eigen::Index>(s)) * policy_prob(policy, s, a) *
             nu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
  return (1.0L - mdp.gamma) * acc;
}

/// Mixed objective written out directly from its definition (no clipping;
/// callers keep residuals small).
inline long double j_mix(const TabularMdp& mdp, const Policy& policy, const Table& nu,
                         const Table& d_e, const Table& d_rb, double alpha) {
  const Table x = nu - bellman(mdp, policy, nu);
  long double z = 0.0L, linear = 0.0L;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const long double mix = (1.0L - alpha) * d_e.data()[i] + alpha * d_rb.data()[i];
    z += mix * std::exp(static_cast<long double>(x.data()[i]));
    linear += d_rb.data()[i] * static_cast<long double>(x.data()[i]);
  }
  return std::log(z) - (1.0L - alpha) * initial_term(mdp, policy, nu) - alpha * linear;
}

/// Central differences of f at every entry of x.
inline Table central_difference(const std::function<double(const Table&)>& f, const Table& x,
                                double h) {
  Table g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Table plus = x, minus = x;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    g.data()[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

/// Max entrywise |a - b| / max(|b|, floor).
inline double max_relative_error(const Table& a, const Table& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) /
                                std::max(std::abs(b.data()[i]), floor));
  return worst;
}

/// E[t | t < horizon] for t ~ Geom(1 - gamma) on {0, 1, ...}.
inline double truncated_geometric_mean(double gamma, std::size_t horizon) {
  long double num = 0.0L, den = 0.0L, w = 1.0L;
  for (std::size_t t = 0; t < horizon; ++t) {
    num += t * w;
    den += w;
    w *= gamma;
  }
  return static_cast<double>(num / den);
}

/// Random point on the simplex of the given shape with every entry positive.
inline Table random_distribution(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  Table t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = expo(rng) + 1e-3;
  return t / t.sum();
}

inline Table random_table(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Table t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  return t;
}

/// Trailing moving average with the given window (shorter at the start).
/// Each window is summed afresh so no rounding drift accumulates.
inline std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t begin = i + 1 >= window ? i + 1 - window : 0;
    long double acc = 0.0L;
    for (std::size_t k = begin; k <= i; ++k) acc += v[k];
    out[i] = static_cast<double>(acc / static_cast<long double>(i + 1 - begin));
  }
  return out;
}

/// Number of i with v[i] > v[i-1] + tol.
inline std::size_t increases(const std::vector<double>& v, double tol = 0.0) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < v.size(); ++i) n += v[i] > v[i - 1] + tol;
  return n;
}

}  // namespace oracle

#endif  // VALUEDICE_TESTS_ORACLES_HPP_
