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
#include <numeric>
#include <random>
#include <vector>

#include "mjp/diagnostics.hpp"
#include "mjp/observation.hpp"

namespace mjp {
namespace {

TEST(SufficientStats, HandComputedPath) {
  const Trajectory<int> x{0, {{0.3, 1}, {0.5, 0}, {0.9, 2}}, 1.2};
  const auto st = sufficient_stats(x, 3);
  EXPECT_NEAR(st.occupation[0], 0.7, 1e-15);
  EXPECT_NEAR(st.occupation[1], 0.2, 1e-15);
  EXPECT_NEAR(st.occupation[2], 0.3, 1e-15);
  EXPECT_EQ(st.departures, (std::vector<std::size_t>{2, 1, 0}));
  EXPECT_EQ(st.jump_count(), 3u);
  EXPECT_THROW(sufficient_stats(x, 2), ModelError);
}

TEST(SufficientStats, NoJumps) {
  const Trajectory<int> x{1, {}, 2.5};
  const auto st = sufficient_stats(x, 2);
  EXPECT_EQ(st.occupation, (std::vector<double>{0.0, 2.5}));
  EXPECT_EQ(st.jump_count(), 0u);
}

TEST(IntegratePath, Piecewise) {
  const Trajectory<int> x{2, {{1.0, 5}, {1.5, 0}}, 4.0};
  EXPECT_DOUBLE_EQ(integrate_path(x, [](int s) { return double(s); }), 2.0 + 2.5);
}

TEST(Ess, WhiteNoise) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> z;
  std::vector<double> x(100000);
  for (auto& v : x) v = z(g);
  const auto e = ess(x);
  EXPECT_FALSE(e.constant);
  EXPECT_GT(e.value / x.size(), 0.8);
  EXPECT_LT(e.value / x.size(), 1.2);
}

TEST(Ess, Ar1) {
  std::mt19937_64 g(2);
  std::normal_distribution<double> z;
  const double phi = 0.9;
  std::vector<double> x(100000);
  x[0] = z(g) / std::sqrt(1 - phi * phi);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] = phi * x[i - 1] + z(g);
  const double ratio = ess(x).value / x.size();
  EXPECT_NEAR(ratio, (1 - phi) / (1 + phi), 0.3 * (1 - phi) / (1 + phi));
}

TEST(Ess, ConstantAndShortSeries) {
  std::vector<double> c(50, 3.25);
  const auto e = ess(c);
  EXPECT_TRUE(e.constant);
  EXPECT_EQ(e.value, 50.0);
  std::vector<double> few(5, 1.0);
  EXPECT_THROW(ess(few), ConfigError);
  std::vector<double> bad(20, 1.0);
  bad[3] = std::nan("");
  EXPECT_THROW(ess(bad), ConfigError);
}

TEST(Ess, AlternatingSeriesIsCapped) {
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
  EXPECT_LE(ess(x).value, 1000.0);
}

TEST(OrderStatistics, MedianAndQuantile) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_DOUBLE_EQ(quantile({0.0, 10.0}, 0.05), 0.5);
  EXPECT_DOUBLE_EQ(quantile({5.0, 1.0, 3.0}, 0.5), 3.0);
  EXPECT_THROW(median({}), ConfigError);
}

TEST(GridSummary, MeanAndSd) {
  std::vector<Trajectory<int>> s{{0, {{0.5, 1}}, 1.0}, {1, {}, 1.0}, {0, {}, 1.0}, {1, {{0.25, 0}}, 1.0}};
  std::vector<double> grid{0.1, 0.3, 0.75};
  const auto g = grid_summary<int>(s, grid);
  EXPECT_DOUBLE_EQ(g.mean[0], 0.5);
  EXPECT_DOUBLE_EQ(g.mean[1], 0.25);
  EXPECT_DOUBLE_EQ(g.mean[2], 0.5);
  EXPECT_DOUBLE_EQ(g.sd[0], 0.5);
  EXPECT_NEAR(g.sd[1], std::sqrt(0.1875), 1e-15);
}

TEST(RunningMeanSd, SmallExample) {
  std::vector<std::vector<double>> series{{1, 3, 5}, {3, 3, 3}};
  std::vector<std::size_t> budgets{1, 2, 3};
  const auto sd = running_mean_sd(series, budgets);
  EXPECT_NEAR(sd[0], std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(sd[1], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(sd[2], 0.0, 1e-15);
  std::vector<std::size_t> too_long{4};
  EXPECT_THROW(running_mean_sd(series, too_long), ConfigError);
}

TEST(SkeletonPosterior, EnumerationAgreesWithForwardBackward) {
  const DenseRates q({{0.0, 1.0, 2.0}, {0.7, 0.0, 0.3}, {1.5, 0.5, 0.0}});
  std::vector<double> times{0.2, 0.5, 0.6, 0.9};
  const auto f = build_hmm_factors(q, AugmentationPolicy::homogeneous(1.5), InitialDistribution<int>::uniform(3), times,
                                   1.2, {observe_table(0.4, {-1.0, 0.0, -0.5}), observe_table(1.0, {0.0, -3.0, -0.1})});
  const auto table = exact_skeleton_posterior(f);
  const auto fb = skeleton_marginals(f);
  EXPECT_NEAR(std::accumulate(table.probs.begin(), table.probs.end(), 0.0), 1.0, 1e-12);
  for (std::size_t k = 0; k <= 4; ++k) {
    const auto m = table.marginal(k);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(m[s], fb[k][s], 1e-10);
  }
}

// Two-state chain pinned to 0 at both ends: expected time in 0 is
// int_0^T P00(t) P00(T - t) dt / P00(T), done here by Simpson's rule.
double pinned_occupation(double a, double b, double T) {
  auto p00 = [&](double t) { return (b + a * std::exp(-(a + b) * t)) / (a + b); };
  const int n = 20000;
  const double h = T / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * p00(i * h) * p00(T - i * h);
  }
  return acc * h / 3.0 / p00(T);
}

TEST(DiscretizedSmoother, PinnedTwoStateOccupation) {
  const double a = 1.3, b = 0.6, T = 2.0;
  const DenseRates q({{0.0, a}, {b, 0.0}});
  std::vector<PointObservation<int>> ev{observe_exactly(0.0, 0), observe_exactly(T, 0)};
  const double exact = pinned_occupation(a, b, T);
  const auto coarse = discretized_smoother(q, InitialDistribution<int>::uniform(2), ev, T, 2e-3);
  const auto fine = discretized_smoother(q, InitialDistribution<int>::uniform(2), ev, T, 1e-3);
  EXPECT_NEAR(fine[0] + fine[1], T, 1e-12);
  EXPECT_NEAR(fine[0], exact, 5e-3);
  // First-order convergence.
  const double e1 = std::abs(coarse[0] - exact), e2 = std::abs(fine[0] - exact);
  EXPECT_LT(e2, 0.7 * e1);
  EXPECT_GT(e2, 0.3 * e1);
}

TEST(DiscretizedSmoother, UnobservedMatchesTransient) {
  const double a = 0.8, b = 2.0, T = 1.5;
  const DenseRates q({{0.0, a}, {b, 0.0}});
  // Start in 0; integral of P00.
  const double exact = b / (a + b) * T + a / ((a + b) * (a + b)) * (1 - std::exp(-(a + b) * T));
  const auto occ = discretized_smoother(q, InitialDistribution<int>::point_mass(0), {}, T, 1e-4);
  EXPECT_NEAR(occ[0], exact, 1e-3);
  EXPECT_THROW(discretized_smoother(q, InitialDistribution<int>::point_mass(0), {}, T, 1.0), ConfigError);
}

}  // namespace
}  // namespace mjp
