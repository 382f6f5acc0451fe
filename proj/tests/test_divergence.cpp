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

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "valuedice/divergence.hpp"
#include "valuedice/environments.hpp"
#include "valuedice/objective.hpp"

namespace valuedice {
namespace {

Occupancy occ(const Table& t) { return Occupancy(t); }

Occupancy row(std::initializer_list<double> values) {
  Table t(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) t(0, i++) = v;
  return Occupancy(t);
}

/// Plain gradient descent on the DV objective, stopped on a tiny gradient.
Table dv_descent(const Table& d_p, const Table& d_e) {
  Table x = Table::Zero(d_p.rows(), d_p.cols());
  const double lr = 1.0 / d_e.maxCoeff();
  for (int it = 0; it < 2'000'000; ++it) {
    const Table w = (d_e.array() * (x.array() - x.maxCoeff()).exp()).matrix();
    const Table grad = w / w.sum() - d_p;
    if (grad.cwiseAbs().maxCoeff() < 1e-14) break;
    x -= lr * grad;
  }
  return x;
}

Table centered(const Table& x) { return (x.array() - x.mean()).matrix(); }

// --- kl_occupancy -----------------------------------------------------------

TEST(KlOccupancy, IdenticalTablesGiveZero) {
  const Occupancy d = occ(oracle::random_distribution(4, 3, 1));
  EXPECT_NEAR(kl_occupancy(d, d), 0.0, 1e-12);
}

TEST(KlOccupancy, PointMassAgainstFairCoinIsLogTwo) {
  EXPECT_NEAR(kl_occupancy(row({1.0, 0.0}), row({0.5, 0.5}), 0.0), std::log(2.0), 1e-15);
}

TEST(KlOccupancy, RingUniformVersusExpertMatchesLongDoubleSum) {
  const TabularMdp mdp = build_ring_mdp();
  const Occupancy d_p = compute_occupancy(mdp, uniform_policy(8, 2));
  const Occupancy d_e = compute_occupancy(mdp, stochastic_expert_policy(0.75));
  EXPECT_NEAR(kl_occupancy(d_p, d_e), static_cast<double>(oracle::kl(d_p.values(), d_e.values())),
              1e-12);
}

TEST(KlOccupancy, NeverNegativeOnRandomPairs) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Occupancy p = occ(oracle::random_distribution(3, 3, seed));
    const Occupancy q = occ(oracle::random_distribution(3, 3, seed + 500));
    EXPECT_GE(kl_occupancy(p, q), -1e-12);
    EXPECT_NEAR(kl_occupancy(p, p), 0.0, 1e-12);
  }
}

// --- kl_as_discounted_return -----------------------------------------------

TEST(KlAsReturn, ExpertAgainstItselfIsZero) {
  const TabularMdp mdp = build_ring_mdp();
  const Policy expert = stochastic_expert_policy(0.75);
  const Occupancy d = compute_occupancy(mdp, expert);
  EXPECT_NEAR(kl_as_discounted_return(mdp, expert, d, d), 0.0, 1e-9);
}

TEST(KlAsReturn, RingUniformEqualsNegativeKl) {
  const TabularMdp mdp = build_ring_mdp();
  const Policy pi = uniform_policy(8, 2);
  const Occupancy d_p = compute_occupancy(mdp, pi);
  const Occupancy d_e = compute_occupancy(mdp, stochastic_expert_policy(0.75));
  EXPECT_NEAR(kl_as_discounted_return(mdp, pi, d_p, d_e), -kl_occupancy(d_p, d_e), 1e-9);
}

TEST(KlAsReturn, RandomFiveStateMdpsEqualNegativeKl) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularMdp mdp = random_mdp(5, 3, 5, seed, 0.9);
    const Policy pi = random_policy(5, 3, seed + 100);
    const Occupancy d_p = compute_occupancy(mdp, pi);
    const Occupancy d_e = compute_occupancy(mdp, random_policy(5, 3, seed + 200));
    EXPECT_NEAR(kl_as_discounted_return(mdp, pi, d_p, d_e), -kl_occupancy(d_p, d_e), 1e-9)
        << "seed " << seed;
  }
}

TEST(KlAsReturn, RejectsOccupancyOfAnotherPolicy) {
  const TabularMdp mdp = build_ring_mdp();
  const Occupancy other = compute_occupancy(mdp, stochastic_expert_policy(0.75));
  EXPECT_THROW(kl_as_discounted_return(mdp, uniform_policy(8, 2), other, other), PreconditionError);
}

// --- dv_objective / dv_optimal_x ---------------------------------------------

TEST(DvObjective, ZeroTestFunctionGivesZero) {
  const Occupancy p = occ(oracle::random_distribution(3, 2, 3));
  const Occupancy q = occ(oracle::random_distribution(3, 2, 4));
  EXPECT_EQ(dv_objective(DualFunction(Table::Zero(3, 2)), p, q), 0.0);
}

TEST(DvObjective, ConstantTestFunctionGivesZero) {
  const Occupancy p = occ(oracle::random_distribution(3, 2, 5));
  const Occupancy q = occ(oracle::random_distribution(3, 2, 6));
  for (double c : {-7.5, 0.25, 3.0, 39.0})
    EXPECT_NEAR(dv_objective(DualFunction(Table::Constant(3, 2, c)), p, q), 0.0, 1e-13) << c;
}

TEST(DvObjective, OptimalTestFunctionAttainsNegativeKl) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Occupancy p = occ(oracle::random_distribution(4, 2, seed));
    const Occupancy q = occ(oracle::random_distribution(4, 2, seed + 1000));
    EXPECT_NEAR(dv_objective(dv_optimal_x(p, q, 0.0), p, q), -kl_occupancy(p, q, 0.0), 1e-10);
  }
}

TEST(DvObjective, SmoothedOptimumIsWithinItsSmoothingBias) {
  // With eps > 0 the first DV term is log sum q (p + eps) / (q + eps),
  // which is off from 0 by at most eps * sum p / q.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Occupancy p = occ(oracle::random_distribution(4, 2, seed));
    const Occupancy q = occ(oracle::random_distribution(4, 2, seed + 1000));
    const double bound = kLogRatioEps * (p.values().array() / q.values().array()).sum() + 1e-14;
    EXPECT_NEAR(dv_objective(dv_optimal_x(p, q), p, q), -kl_occupancy(p, q), bound);
  }
}

TEST(DvObjective, LowerBoundHoldsForRandomTestFunctions) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Occupancy p = occ(oracle::random_distribution(3, 3, seed));
    const Occupancy q = occ(oracle::random_distribution(3, 3, seed + 7));
    const DualFunction x(oracle::random_table(3, 3, seed + 13, 20.0));
    EXPECT_GE(dv_objective(x, p, q), -kl_occupancy(p, q) - 1e-10);
  }
}

TEST(DvObjective, ShiftInvariant) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Occupancy p = occ(oracle::random_distribution(3, 3, seed));
    const Occupancy q = occ(oracle::random_distribution(3, 3, seed + 9));
    const Table x = oracle::random_table(3, 3, seed + 17, 3.0);
    const double c = oracle::random_table(1, 1, seed + 19, 5.0)(0, 0);
    EXPECT_NEAR(dv_objective(DualFunction(x), p, q),
                dv_objective(DualFunction((x.array() + c).matrix()), p, q), 1e-10);
  }
}

TEST(DvObjective, LargeTestFunctionDoesNotOverflow) {
  const Occupancy p = occ(oracle::random_distribution(2, 2, 1));
  const Occupancy q = occ(oracle::random_distribution(2, 2, 2));
  const double v = dv_objective(DualFunction(Table::Constant(2, 2, 1e6)), p, q);
  EXPECT_TRUE(std::isfinite(v));
}

TEST(DvOptimalX, EqualOccupanciesGiveZero) {
  const Occupancy d = occ(oracle::random_distribution(3, 3, 8));
  EXPECT_EQ(dv_optimal_x(d, d).values(), Table::Zero(3, 3));
}

TEST(DvOptimalX, HalfOverQuarterIsLogTwo) {
  const DualFunction x = dv_optimal_x(row({0.5, 0.5}), row({0.25, 0.75}), 0.0);
  EXPECT_NEAR(x.values()(0, 0), std::log(2.0), 1e-15);
}

TEST(DvOptimalX, ValuesAreClipped) {
  const DualFunction x = dv_optimal_x(row({1.0, 0.0}), row({0.0, 1.0}), 1e-300);
  EXPECT_EQ(x.values()(0, 0), kClipBound);
  EXPECT_EQ(x.values()(0, 1), -kClipBound);
}

TEST(DvOptimalX, GradientDescentRecoversItUpToAConstant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Table p = oracle::random_distribution(3, 2, seed + 40);
    const Table q = oracle::random_distribution(3, 2, seed + 80);
    const Table x = dv_descent(p, q);
    const Table x_star = dv_optimal_x(occ(p), occ(q)).values();
    EXPECT_LT((centered(x) - centered(x_star)).cwiseAbs().maxCoeff(), 1e-4) << "seed " << seed;
  }
}

// --- Bellman operator and change of variables -------------------------------

TEST(BellmanOperator, ConstantNuScalesByGamma) {
  const TabularMdp mdp = random_mdp(4, 3, 2, 5, 0.8);
  const Table b = bellman_operator(mdp, random_policy(4, 3, 6), NuFunction(Table::Constant(4, 3, 2.5)));
  EXPECT_LT((b.array() - 0.8 * 2.5).abs().maxCoeff(), 1e-14);
}

TEST(BellmanOperator, ZeroDiscountGivesZero) {
  const TabularMdp mdp = random_mdp(4, 2, 3, 7, 0.0);
  const Table b = bellman_operator(mdp, random_policy(4, 2, 8), NuFunction(oracle::random_table(4, 2, 9)));
  EXPECT_EQ(b, Table::Zero(4, 2));
}

TEST(BellmanOperator, SinglePairClosedForm) {
  const TabularMdp mdp = make_mdp(1, 1, Table::Ones(1, 1), Vector::Ones(1), 0.9);
  EXPECT_NEAR(bellman_operator(mdp, uniform_policy(1, 1), NuFunction(Table::Constant(1, 1, 2.0)))(0, 0),
              1.8, 1e-15);
}

TEST(BellmanOperator, MatchesExplicitLoops) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TabularMdp mdp = random_mdp(5, 3, 3, seed, 0.9);
    const Policy pi = random_policy(5, 3, seed + 1);
    const Table nu = oracle::random_table(5, 3, seed + 2);
    EXPECT_LT((bellman_operator(mdp, pi, NuFunction(nu)) - oracle::bellman(mdp, pi, nu)).cwiseAbs().maxCoeff(),
              1e-13);
  }
}

TEST(XFromNu, ConstantNuGivesScaledConstant) {
  const TabularMdp mdp = build_ring_mdp();
  const DualFunction x = x_from_nu(mdp, stochastic_expert_policy(0.75), NuFunction(Table::Constant(8, 2, 4.0)));
  EXPECT_LT((x.values().array() - 0.05 * 4.0).abs().maxCoeff(), 1e-13);
}

TEST(XFromNu, ZeroNuGivesZero) {
  const TabularMdp mdp = build_ring_mdp();
  EXPECT_EQ(x_from_nu(mdp, uniform_policy(8, 2), NuFunction::zeros(8, 2)).values(), Table::Zero(8, 2));
}

TEST(XFromNu, TelescopesOnRingWithRandomNu) {
  const TabularMdp mdp = build_ring_mdp();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Policy pi = random_policy(8, 2, seed);
    const NuFunction nu(oracle::random_table(8, 2, seed + 50, 3.0));
    const Occupancy d = compute_occupancy(mdp, pi);
    const double lhs = (d.values().array() * x_from_nu(mdp, pi, nu).values().array()).sum();
    EXPECT_NEAR(lhs, initial_value_term(mdp, pi, nu), 1e-10);
  }
}

TEST(XFromNu, TelescopesOnRandomMdps) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t S = 1 + seed % 10, A = 1 + seed % 3;
    const TabularMdp mdp = random_mdp(S, A, 1 + seed % S, seed, 0.3 + 0.65 * ((seed % 5) / 4.0));
    const Policy pi = random_policy(S, A, seed + 1);
    const Table nu = oracle::random_table(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A), seed + 2, 2.0);
    const Table d = oracle::occupancy_power_series(mdp, pi);
    long double lhs = 0.0L;
    const Table x = nu - oracle::bellman(mdp, pi, nu);
    for (Eigen::Index i = 0; i < d.size(); ++i) lhs += static_cast<long double>(d.data()[i]) * x.data()[i];
    EXPECT_NEAR(static_cast<double>(lhs), static_cast<double>(oracle::initial_term(mdp, pi, nu)), 1e-10)
        << "seed " << seed;
  }
}

// --- j_dice_exact -----------------------------------------------------------

TEST(JDiceExact, ZeroNuGivesZero) {
  const TabularMdp mdp = build_ring_mdp();
  const Occupancy d_e = compute_occupancy(mdp, stochastic_expert_policy(0.75));
  EXPECT_EQ(j_dice_exact(mdp, uniform_policy(8, 2), NuFunction::zeros(8, 2), d_e), 0.0);
}

TEST(JDiceExact, ConstantNuGivesZero) {
  const TabularMdp mdp = build_ring_mdp();
  const Occupancy d_e = compute_occupancy(mdp, stochastic_expert_policy(0.75));
  for (double c : {-3.0, 1.0, 12.5})
    EXPECT_NEAR(j_dice_exact(mdp, random_policy(8, 2, 3), NuFunction(Table::Constant(8, 2, c)), d_e), 0.0,
                1e-13);
}

TEST(JDiceExact, AgreesWithDvObjectiveOfTransformedNu) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularMdp mdp = random_mdp(4, 2, 2, seed, 0.9);
    const Policy pi = random_policy(4, 2, seed + 1);
    const NuFunction nu(oracle::random_table(4, 2, seed + 2));
    const Occupancy d_e = compute_occupancy(mdp, random_policy(4, 2, seed + 3));
    EXPECT_NEAR(j_dice_exact(mdp, pi, nu, d_e),
                dv_objective(x_from_nu(mdp, pi, nu), compute_occupancy(mdp, pi), d_e), 1e-10);
    EXPECT_NEAR(j_dice_exact(mdp, pi, nu, d_e),
                static_cast<double>(oracle::j_mix(mdp, pi, nu.values(), d_e.values(), d_e.values(), 0.0)),
                1e-10);
  }
}

TEST(JDiceExact, InnerMinimumOnRingIsNegativeKl) {
  const TabularMdp mdp = build_ring_mdp();
  const Policy pi = uniform_policy(8, 2);
  const Occupancy d_p = compute_occupancy(mdp, pi);
  const Occupancy d_e = compute_occupancy(mdp, stochastic_expert_policy(0.75));
  NuFunction nu = NuFunction::zeros(8, 2);
  const MixConfig pure{0.0};
  for (int it = 0; it < 20000; ++it)
    nu.mutable_values() -= 2.0 * grad_nu_exact(mdp, pi, nu, d_e, d_e, pure);
  EXPECT_NEAR(j_dice_exact(mdp, pi, nu, d_e), -kl_occupancy(d_p, d_e), 1e-3);
}

}  // namespace
}  // namespace valuedice
