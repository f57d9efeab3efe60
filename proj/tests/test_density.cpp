/*
 * Copyright 2026 The mjpgibbs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <cmath>

#include "mjp/density.hpp"
#include "mjp/lotka_volterra.hpp"
#include "mjp/rates.hpp"
#include "mjp/simulate.hpp"

namespace mjp {
namespace {

const DenseRates kToyX({{0.0, 10.0}, {10.0, 0.0}});

TEST(PathDensity, ZeroJumps) {
  Trajectory<int> tr{0, {}, 1.0};
  EXPECT_NEAR(log_density_trajectory(kToyX, InitialDistribution<int>::point_mass(0), tr), -10.0, 1e-14);
  EXPECT_EQ(log_density_trajectory(kToyX, InitialDistribution<int>::point_mass(1), tr), kNegInf);
}

TEST(PathDensity, SingleJump) {
  Trajectory<int> tr{0, {{0.5, 1}}, 1.0};
  EXPECT_NEAR(log_density_trajectory(kToyX, InitialDistribution<int>::point_mass(0), tr), std::log(10.0) - 10.0, 1e-14);
}

TEST(PathDensity, UsesHoldingRateOfTheStateBeingLeft) {
  DenseRates q({{0.0, 2.0}, {7.0, 0.0}});
  Trajectory<int> tr{0, {{0.25, 1}}, 1.0};
  const double expect = std::log(2.0) - 2.0 * 0.25 - 7.0 * 0.75;
  EXPECT_NEAR(log_density_trajectory(q, InitialDistribution<int>::point_mass(0), tr), expect, 1e-14);
}

TEST(PathDensity, ZeroRateTransitionHasNoDensity) {
  DenseRates q({{0.0, 1.0, 0.0}, {1.0, 0.0, 1.0}, {1.0, 1.0, 0.0}});
  Trajectory<int> tr{0, {{0.5, 2}}, 1.0};
  EXPECT_EQ(log_density_trajectory(q, InitialDistribution<int>::point_mass(0), tr), kNegInf);
}

// The density integrated over paths with 0, 1 and 2 jumps against closed
// forms for a two-state chain with rates a (0 -> 1) and b (1 -> 0).
TEST(PathDensity, QuadratureMatchesClosedForms) {
  const double a = 0.3, b = 0.5, c = a - b;
  DenseRates q({{0.0, a}, {b, 0.0}});
  const auto nu = InitialDistribution<int>::point_mass(0);
  auto dens = [&](std::vector<Jump<int>> jumps) {
    return std::exp(log_density_trajectory(q, nu, Trajectory<int>{0, std::move(jumps), 1.0}));
  };
  const int K = 400;
  const double h = 1.0 / K;
  double p1 = 0.0, p2 = 0.0;
  for (int i = 0; i < K; ++i) {
    const double t = (i + 0.5) * h;
    p1 += dens({{t, 1}}) * h;
    // t1 = u * t2 maps the unit square onto the ordered simplex.
    for (int j = 0; j < K; ++j) {
      const double u = (j + 0.5) * h;
      p2 += dens({{u * t, 1}, {t, 0}}) * t * h * h;
    }
  }
  const double p0 = dens({});
  const double p0_exact = std::exp(-a);
  const double p1_exact = a * std::exp(-b) * (1.0 - std::exp(-c)) / c;
  const double p2_exact = a * b * std::exp(-a) * ((std::exp(c) - 1.0) / (c * c) - 1.0 / c);
  EXPECT_NEAR(p0, p0_exact, 1e-14);
  EXPECT_NEAR(p1, p1_exact, 1e-6);
  EXPECT_NEAR(p2, p2_exact, 1e-6);
  // The missing mass (three or more jumps) is bounded by the Poisson tail at
  // the largest exit rate.
  const double m = std::max(a, b);
  EXPECT_GT(p0 + p1 + p2, std::exp(-m) * (1.0 + m + m * m / 2.0));
  EXPECT_LT(p0 + p1 + p2, 1.0);
}

TEST(AugmentedDensity, EmptyGrid) {
  AugmentedTrajectory<int> aug{0, {}, 1.0};
  const auto nu = InitialDistribution<int>::uniform(2);
  EXPECT_NEAR(log_density_augmented(kToyX, AugmentationPolicy::uniformization(20.0), nu, aug), std::log(0.5) - 20.0,
              1e-14);
  EXPECT_NEAR(log_density_augmented(kToyX, AugmentationPolicy::homogeneous(3.0), nu, aug), std::log(0.5) - 13.0, 1e-14);
}

TEST(AugmentedDensity, EachVirtualJumpAddsLogOfVirtualRate) {
  const auto nu = InitialDistribution<int>::point_mass(0);
  const auto pol = AugmentationPolicy::uniformization(20.0);
  AugmentedTrajectory<int> none{0, {}, 1.0}, one{0, {{0.5, 0}}, 1.0}, two{0, {{0.2, 0}, {0.5, 0}}, 1.0};
  const double l0 = log_density_augmented(kToyX, pol, nu, none);
  EXPECT_NEAR(log_density_augmented(kToyX, pol, nu, one) - l0, std::log(10.0), 1e-12);
  EXPECT_NEAR(log_density_augmented(kToyX, pol, nu, two) - l0, 2.0 * std::log(10.0), 1e-12);
}

// Augmented density = path density x density of the virtual jumps given
// the path.
TEST(AugmentedDensity, FactorizesIntoPathAndVirtualParts) {
  DenseRates three({{0.0, 2.0, 1.0}, {0.5, 0.0, 0.5}, {3.0, 1.0, 0.0}});
  const auto nu = InitialDistribution<int>::indexed({0.2, 0.5, 0.3});
  RandomStream rng(21);
  for (auto pol : {AugmentationPolicy::uniformization(5.0), AugmentationPolicy::homogeneous(2.0),
                   AugmentationPolicy::proportional(1.7)}) {
    for (int i = 0; i < 200; ++i) {
      const auto aug = thinning_sample(three, pol, nu, 2.0, rng);
      const double lhs = log_density_augmented(three, pol, nu, aug);
      const double rhs = log_density_trajectory(three, nu, strip_virtual(aug)) + log_density_virtual(three, pol, aug);
      EXPECT_NEAR(lhs, rhs, 1e-10);
    }
  }
}

TEST(AugmentedDensity, FactorizesForPredatorPrey) {
  LotkaVolterraRates m;
  const auto nu = InitialDistribution<LvState>::point_mass({20, 10});
  const auto pol = AugmentationPolicy::homogeneous(3.0);
  RandomStream rng(22);
  for (int i = 0; i < 20; ++i) {
    const auto aug = thinning_sample(m, pol, nu, 20.0, rng);
    EXPECT_NEAR(log_density_augmented(m, pol, nu, aug),
                log_density_trajectory(m, nu, strip_virtual(aug)) + log_density_virtual(m, pol, aug), 1e-9);
  }
}

}  // namespace
}  // namespace mjp
