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
#include <vector>

#include "mjp/ctbn.hpp"
#include "mjp/diagnostics.hpp"
#include "mjp/mcmc.hpp"

namespace mjp {
namespace {

const DenseRates kQ({{0.0, 1.0, 0.5}, {0.8, 0.0, 1.2}, {0.3, 0.9, 0.0}});

// nu exp(Qt) through the uniformized power series.
std::vector<double> transient(const FiniteRates& q, std::vector<double> p, double t) {
  const std::size_t S = p.size();
  const double lam = q.max_exit_rate() + 1.0;
  std::vector<double> out(S, 0.0), next(S);
  double w = std::exp(-lam * t);
  for (int k = 0; k < 400; ++k) {
    for (std::size_t s = 0; s < S; ++s) out[s] += w * p[s];
    for (std::size_t b = 0; b < S; ++b) {
      next[b] = p[b] * (1.0 - q.exit_rate(int(b)) / lam);
      for (std::size_t a = 0; a < S; ++a)
        if (a != b) next[b] += p[a] * q.rate(int(a), int(b)) / lam;
    }
    p = next;
    w *= lam * t / (k + 1);
  }
  return out;
}

// Expected prior occupation of state s on [0, T] by Simpson's rule.
double prior_occupation(const FiniteRates& q, const std::vector<double>& nu, int s, double T) {
  const int n = 2000;
  const double h = T / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * transient(q, nu, i * h)[static_cast<std::size_t>(s)];
  }
  return acc * h / 3.0;
}

// |mean - target| within k Monte Carlo standard errors, with the ESS of the
// correlated chain.
::testing::AssertionResult mean_agrees(const std::vector<double>& x, double target, double k = 4.0) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double v = 0.0;
  for (double y : x) v += (y - m) * (y - m);
  v /= x.size();
  const double se = std::sqrt(v / ess(x).value);
  if (std::abs(m - target) <= k * se + 1e-12) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << "mean " << m << " target " << target << " se " << se;
}

std::vector<double> chain_occupation(const ConditionalProblem<DenseRates>& problem, const ChainConfig& cfg, int state,
                                     std::uint64_t seed) {
  RandomStream rng(seed);
  auto start = initial_trajectory(kQ, problem, rng);
  std::vector<double> occ;
  run_chain(problem, start, cfg, rng, [&](std::size_t, const Trajectory<int>& tr, double) {
    occ.push_back(sufficient_stats(tr, 3).occupation[static_cast<std::size_t>(state)]);
  });
  return occ;
}

TEST(Ergodicity, PolicyPreconditions) {
  EXPECT_THROW(validate_ergodicity(kQ, AugmentationPolicy::uniformization(2.0)), ConfigError);
  EXPECT_NO_THROW(validate_ergodicity(kQ, AugmentationPolicy::uniformization(2.0001)));
  EXPECT_NO_THROW(validate_ergodicity(kQ, AugmentationPolicy::homogeneous(0.1)));
  EXPECT_NO_THROW(validate_ergodicity(kQ, AugmentationPolicy::proportional(1.5)));
  EXPECT_THROW(validate_ergodicity(LotkaVolterraRates{}, AugmentationPolicy::uniformization(1e6)), ConfigError);
  EXPECT_NO_THROW(validate_ergodicity(LotkaVolterraRates{}, AugmentationPolicy::homogeneous(30.0)));
}

TEST(Ergodicity, NetworkSkipsClampedNodes) {
  auto slow = std::make_shared<DenseRates>(std::vector<std::vector<double>>{{0, 1}, {1, 0}});
  auto fast = std::make_shared<DenseRates>(std::vector<std::vector<double>>{{0, 50}, {50, 0}});
  const CtbnModel m({CtbnNode{"X", 2, {}, {slow}, {}}, CtbnNode{"Y", 2, {0}, {slow, fast}, {}}});
  ChainConfig cfg;
  cfg.policy = AugmentationPolicy::uniformization(5.0);
  EXPECT_THROW(validate_ergodicity(m, cfg), ConfigError);
  CtbnEvidence ev(2);
  ev.paths[1] = Trajectory<int>{0, {}, 1.0};
  EXPECT_NO_THROW(validate_ergodicity(m, cfg, &ev));
  cfg.node_policies = {AugmentationPolicy::uniformization(5.0), AugmentationPolicy::uniformization(60.0)};
  EXPECT_NO_THROW(validate_ergodicity(m, cfg));
}

TEST(ChainConfig, Validation) {
  ChainConfig c;
  EXPECT_EQ(c.recorded(), 900u);
  c.thin = 4;
  EXPECT_EQ(c.recorded(), 225u);
  c.burn_in = 1000;
  EXPECT_THROW(c.validate(), ConfigError);
  c.burn_in = 10;
  c.thin = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.thin = 1;
  c.method = Method::pgas(1);
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(Method::parse("ffbs", 7).kind, Method::Kind::ffbs);
  EXPECT_THROW(Method::parse("gibbs", 7), ConfigError);
}

TEST(RunChain, RecordsBurnInAndThinning) {
  const auto problem = make_problem(kQ, InitialDistribution<int>::uniform(3), 1.0);
  for (std::size_t thin : {1u, 3u}) {
    ChainConfig cfg;
    cfg.thin = thin;
    RandomStream rng(1);
    std::vector<std::size_t> its;
    const auto run = run_chain(problem, Trajectory<int>{0, {}, 1.0}, cfg, rng,
                               [&](std::size_t it, const Trajectory<int>&, double) { its.push_back(it); });
    EXPECT_EQ(its.size(), 900u / thin);
    EXPECT_EQ(run.recorded, its.size());
    EXPECT_EQ(its.front(), 100u + thin);
    EXPECT_EQ(run.iteration_ms.size(), 1000u);
    EXPECT_EQ(run.pgas.steps > 0, true);
  }
}

TEST(RunChain, SameSeedSameSamples) {
  const auto problem = make_problem(kQ, InitialDistribution<int>::uniform(3), 2.0, {observe_exactly(1.0, 2)});
  ChainConfig cfg;
  cfg.iterations = 200;
  cfg.burn_in = 10;
  auto collect = [&] {
    RandomStream rng(42);
    std::vector<Trajectory<int>> out;
    run_chain(problem, initial_trajectory(kQ, problem, rng), cfg, rng,
              [&](std::size_t, const Trajectory<int>& tr, double) { out.push_back(tr); });
    return out;
  };
  EXPECT_EQ(collect(), collect());
}

TEST(RunChain, EndpointsAreHonoured) {
  const auto problem =
      make_problem(kQ, InitialDistribution<int>::uniform(3), 1.5, {observe_exactly(0.0, 1), observe_exactly(1.5, 2)});
  for (Method m : {Method::pgas(3), Method::ffbs()}) {
    ChainConfig cfg;
    cfg.method = m;
    cfg.iterations = 300;
    RandomStream rng(2);
    run_chain(problem, initial_trajectory(kQ, problem, rng), cfg, rng, [&](std::size_t, const Trajectory<int>& tr, double) {
      EXPECT_EQ(tr.initial, 1);
      EXPECT_EQ(tr.state_at(1.5), 2);
    });
  }
}

TEST(InitialTrajectory, BridgesImprobableEnds) {
  // Endpoint evidence a forward draw essentially never meets.
  const DenseRates slow({{0.0, 1e-9}, {1e-9, 0.0}});
  const auto problem =
      make_problem(slow, InitialDistribution<int>::uniform(2), 1.0, {observe_exactly(0.0, 0), observe_exactly(1.0, 1)});
  RandomStream rng(3);
  ChainRun run;
  const auto tr = initial_trajectory(slow, problem, rng, &run, 20);
  EXPECT_EQ(run.start, "bridge");
  EXPECT_EQ(tr.initial, 0);
  EXPECT_EQ(tr.state_at(1.0), 1);
}

// With no evidence the chain targets the prior.
TEST(MjpPosterior, PriorRecovery) {
  const std::vector<double> nu{0.2, 0.5, 0.3};
  const double T = 1.5;
  const double exact = prior_occupation(kQ, nu, 0, T);
  const auto problem = make_problem(kQ, InitialDistribution<int>::indexed(nu), T);
  int seed = 10;
  for (const auto& pol : {AugmentationPolicy::uniformization(4.0), AugmentationPolicy::homogeneous(2.0),
                          AugmentationPolicy::proportional(2.0)}) {
    for (Method m : {Method::pgas(2), Method::pgas(10), Method::pgas(5, 4), Method::ffbs()}) {
      ChainConfig cfg;
      cfg.policy = pol;
      cfg.method = m;
      cfg.iterations = 20000;
      EXPECT_TRUE(mean_agrees(chain_occupation(problem, cfg, 0, ++seed), exact)) << pol.to_string() << " " << m.to_string();
    }
  }
}

// Against the fine-grid smoother on noisy evidence.
TEST(MjpPosterior, MatchesDiscretizedSmoother) {
  const double T = 1.5;
  std::vector<PointObservation<int>> ev{observe_table(0.3, {-2.0, 0.0, -1.0}), observe_table(0.9, {0.0, -3.0, -0.5}),
                                        observe_table(1.4, {-1.0, -1.0, 0.0})};
  const auto nu = InitialDistribution<int>::uniform(3);
  const auto smooth = discretized_smoother(kQ, nu, ev, T, 1e-4);
  const auto problem = make_problem(kQ, nu, T, ev);
  int seed = 30;
  for (const auto& pol : {AugmentationPolicy::uniformization(3.0), AugmentationPolicy::homogeneous(1.0)}) {
    for (Method m : {Method::pgas(5), Method::ffbs()}) {
      ChainConfig cfg;
      cfg.policy = pol;
      cfg.method = m;
      cfg.iterations = 20000;
      for (int s : {0, 2})
        EXPECT_TRUE(mean_agrees(chain_occupation(problem, cfg, s, ++seed), smooth[static_cast<std::size_t>(s)]))
            << pol.to_string() << " " << m.to_string() << " state " << s;
    }
  }
}

TEST(MjpPosterior, ChainMovesAndCanStay) {
  const auto problem = make_problem(kQ, InitialDistribution<int>::uniform(3), 0.3);
  RandomStream rng(4);
  Trajectory<int> x{0, {}, 0.3};
  int moved = 0, repeated = 0;
  for (int i = 0; i < 500; ++i) {
    auto y = mjp_mcmc_step(x, problem, AugmentationPolicy::homogeneous(2.0), Method::pgas(3), rng);
    (y == x ? repeated : moved) += 1;
    x = y;
  }
  EXPECT_GT(moved, 0);
  EXPECT_GT(repeated, 0);
}

// Gibbs over a small cyclic network against the flat product-space smoother.
TEST(CtbnPosterior, GibbsMatchesFlatSmoother) {
  auto q = [](double a, double b) {
    return std::make_shared<DenseRates>(std::vector<std::vector<double>>{{0, a}, {b, 0}});
  };
  const CtbnModel m({CtbnNode{"A", 2, {1}, {q(0.5, 1.0), q(2.0, 0.3)}, InitialDistribution<int>::uniform(2)},
                     CtbnNode{"B", 2, {0}, {q(1.0, 1.5), q(0.4, 0.6)}, InitialDistribution<int>::uniform(2)}});
  const double T = 1.2;
  CtbnEvidence ev(2);
  ev.points[0] = {observe_table(0.4, {-1.5, 0.0})};
  ev.points[1] = {observe_table(1.0, {0.0, -2.0})};
  const auto flat = flatten(m);
  // Joint code = a + 2 b.
  std::vector<PointObservation<int>> fev{observe_table(0.4, {-1.5, 0.0, -1.5, 0.0}),
                                         observe_table(1.0, {0.0, 0.0, -2.0, -2.0})};
  const auto smooth = discretized_smoother(*flat.rates, flat.initial, fev, T, 1e-4);
  for (NodeOrder order : {NodeOrder::fixed, NodeOrder::random_permutation}) {
    ChainConfig cfg;
    cfg.policy = AugmentationPolicy::homogeneous(1.5);
    cfg.method = Method::pgas(5);
    cfg.iterations = 20000;
    cfg.node_order = order;
    RandomStream rng(50 + static_cast<int>(order));
    std::vector<double> a1, b1;
    run_chain(m, ev, initial_ctbn_path(m, ev, T, rng), cfg, rng, [&](std::size_t, const CtbnPath& p, double) {
      a1.push_back(sufficient_stats(p.nodes[0], 2).occupation[1]);
      b1.push_back(sufficient_stats(p.nodes[1], 2).occupation[1]);
    });
    EXPECT_TRUE(mean_agrees(a1, smooth[1] + smooth[3]));
    EXPECT_TRUE(mean_agrees(b1, smooth[2] + smooth[3]));
  }
}

}  // namespace
}  // namespace mjp
