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

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "mjp/ctbn.hpp"
#include "mjp/density.hpp"
#include "mjp/presets.hpp"
#include "mjp/simulate.hpp"
#include "stat_helpers.hpp"

namespace mjp {
namespace {

std::shared_ptr<const FiniteRates> random_cim(int S, RandomStream& rng) {
  std::vector<std::vector<double>> q(static_cast<std::size_t>(S), std::vector<double>(static_cast<std::size_t>(S), 0.0));
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j)
      if (i != j) q[i][j] = 0.2 + 1.5 * rng.uniform();
  return std::make_shared<DenseRates>(q);
}

// A <- C, B <- A, C <- {A, B}: a cycle through A and C.
CtbnModel cyclic_model(std::uint64_t seed) {
  RandomStream rng(seed);
  auto cims = [&](int S, int configs) {
    std::vector<std::shared_ptr<const FiniteRates>> v;
    for (int c = 0; c < configs; ++c) v.push_back(random_cim(S, rng));
    return v;
  };
  return CtbnModel({CtbnNode{"A", 2, {2}, cims(2, 2), InitialDistribution<int>::indexed({0.4, 0.6})},
                    CtbnNode{"B", 3, {0}, cims(3, 2), InitialDistribution<int>::uniform(3)},
                    CtbnNode{"C", 2, {0, 1}, cims(2, 6), InitialDistribution<int>::indexed({0.7, 0.3})}});
}

// Every time any node jumps, plus the ends.
std::vector<double> breakpoints(const CtbnPath& path) {
  std::vector<double> t{0.0, path.t_max()};
  for (const auto& n : path.nodes)
    for (const auto& j : n.jumps) t.push_back(j.time);
  std::sort(t.begin(), t.end());
  return t;
}

// Node density by brute force over the merged event list; rates looked up
// from the joint state in force on each piece.
double node_density_oracle(const CtbnModel& m, std::size_t w, const CtbnPath& path) {
  const auto t = breakpoints(path);
  double lp = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = t[i], b = t[i + 1];
    if (b <= a) continue;
    const auto joint = path.state_at(0.5 * (a + b));
    const auto& q = m.cim(w, m.config_code(w, joint));
    lp -= q.exit_rate(joint[w]) * (b - a);
  }
  for (const auto& j : path.nodes[w].jumps) {
    auto before = path.state_at(j.time);
    before[w] = path.nodes[w].state_at(std::nextafter(j.time, 0.0));
    lp += std::log(m.cim(w, m.config_code(w, before)).rate(before[w], j.state));
  }
  return lp;
}

// Integral of node w's exit rate plus the thinning terms at virtual grid points.
double augmentation_terms(const CtbnModel& m, std::size_t w, const CtbnPath& path, double R,
                          const std::vector<double>& grid) {
  const auto t = breakpoints(path);
  double v = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = t[i], b = t[i + 1];
    if (b <= a) continue;
    const auto joint = path.state_at(0.5 * (a + b));
    v += m.cim(w, m.config_code(w, joint)).exit_rate(joint[w]) * (b - a);
  }
  const auto& x = path.nodes[w];
  for (double g : grid) {
    const bool jump = std::any_of(x.jumps.begin(), x.jumps.end(), [&](const auto& j) { return j.time == g; });
    if (jump) continue;
    const auto joint = path.state_at(g);
    v += std::log(R - m.cim(w, m.config_code(w, joint)).exit_rate(joint[w]));
  }
  return v;
}

Trajectory<int> from_skeleton(const std::vector<double>& grid, const std::vector<int>& s, double t_max) {
  Trajectory<int> x{s[0], {}, t_max};
  for (std::size_t k = 1; k < s.size(); ++k)
    if (s[k] != s[k - 1]) x.jumps.push_back({grid[k - 1], s[k]});
  return x;
}

TEST(CtbnModel, ValidatesStructure) {
  auto two = std::make_shared<DenseRates>(std::vector<std::vector<double>>{{0, 1}, {1, 0}});
  EXPECT_THROW(CtbnModel(std::vector<CtbnNode>{}), ModelError);
  EXPECT_THROW(CtbnModel({CtbnNode{"X", 2, {0}, {two, two}, InitialDistribution<int>::uniform(2)}}), ModelError);
  EXPECT_THROW(CtbnModel({CtbnNode{"X", 2, {}, {two, two}, InitialDistribution<int>::uniform(2)}}), ModelError);
  EXPECT_THROW(CtbnModel({CtbnNode{"X", 2, {3}, {two, two}, InitialDistribution<int>::uniform(2)}}), ModelError);
  const auto m = cyclic_model(1);
  EXPECT_EQ(m.children(0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(m.children(2), (std::vector<std::size_t>{0}));
  EXPECT_EQ(m.stride(2, 0), 1u);
  EXPECT_EQ(m.stride(2, 1), 2u);
  std::vector<int> joint{1, 2, 0};
  EXPECT_EQ(m.config_code(2, joint), 5u);
}

TEST(CtbnPath, RejectsSimultaneousJumps) {
  const auto m = toy_model();
  CtbnPath p{{Trajectory<int>{0, {{0.5, 1}}, 1.0}, Trajectory<int>{0, {{0.5, 1}}, 1.0}}};
  EXPECT_THROW(validate(p, m), ModelError);
  EXPECT_THROW(log_density_ctbn(m, p), ModelError);
  p.nodes[1].jumps[0].time = 0.6;
  EXPECT_NO_THROW(validate(p, m));
}

TEST(CtbnDensity, NodeDensityMatchesMergedEventOracle) {
  const auto m = cyclic_model(2);
  RandomStream rng(3);
  for (int r = 0; r < 50; ++r) {
    const auto path = simulate_ctbn(m, 2.0, rng);
    for (std::size_t w = 0; w < m.size(); ++w)
      EXPECT_NEAR(log_density_node_given_parents(m, w, path), node_density_oracle(m, w, path), 1e-9);
  }
}

TEST(CtbnDensity, EqualsFlatProductSpaceDensity) {
  const auto m = cyclic_model(4);
  const auto flat = flatten(m);
  EXPECT_EQ(flat.rates->num_states(), 12u);
  RandomStream rng(5);
  for (int r = 0; r < 50; ++r) {
    const auto path = simulate_ctbn(m, 1.5, rng);
    EXPECT_NEAR(log_density_ctbn(m, path), log_density_trajectory(*flat.rates, flat.initial, flat.flatten(path)),
                1e-9);
  }
  for (int code = 0; code < 12; ++code) EXPECT_EQ(flat.encode(flat.decode(code)), code);
}

TEST(CtbnDensity, ParentlessNodeIsPlainPathDensity) {
  const auto q = std::make_shared<DenseRates>(std::vector<std::vector<double>>{{0, 2, 1}, {0.5, 0, 0.5}, {1, 1, 0}});
  const CtbnModel m({CtbnNode{"X", 3, {}, {q}, InitialDistribution<int>::uniform(3)}});
  RandomStream rng(6);
  for (int r = 0; r < 20; ++r) {
    const auto path = simulate_ctbn(m, 3.0, rng);
    EXPECT_NEAR(log_density_ctbn(m, path), log_density_trajectory(*q, InitialDistribution<int>::uniform(3), path.nodes[0]),
                1e-12);
  }
}

TEST(CtbnDensity, IndependentNodesFactorize) {
  RandomStream g(7);
  const auto qa = random_cim(2, g), qb = random_cim(3, g);
  const CtbnModel m({CtbnNode{"A", 2, {}, {qa}, InitialDistribution<int>::uniform(2)},
                     CtbnNode{"B", 3, {}, {qb}, InitialDistribution<int>::uniform(3)}});
  RandomStream rng(8);
  const auto path = simulate_ctbn(m, 2.0, rng);
  EXPECT_NEAR(log_density_ctbn(m, path),
              log_density_trajectory(*qa, InitialDistribution<int>::uniform(2), path.nodes[0]) +
                  log_density_trajectory(*qb, InitialDistribution<int>::uniform(3), path.nodes[1]),
              1e-12);
}

TEST(CtbnSimulate, MarginalMatchesFlatChain) {
  // Occupation of the joint state at t = 1 against a flat simulation.
  const auto m = cyclic_model(9);
  const auto flat = flatten(m);
  RandomStream a(10), b(11);
  std::vector<double> ca(12, 0.0), cb(12, 0.0);
  for (int r = 0; r < 20000; ++r) {
    ca[static_cast<std::size_t>(flat.encode(simulate_ctbn(m, 1.0, a).state_at(0.999)))] += 1.0;
    cb[static_cast<std::size_t>(simulate_gillespie(*flat.rates, flat.initial, 1.0, b).state_at(0.999))] += 1.0;
  }
  EXPECT_GT(testing::chi_square_two_sample(ca, cb), 0.001);
}

TEST(ConfigSegments, PartitionTheHorizon) {
  const auto m = cyclic_model(12);
  RandomStream rng(13);
  for (int r = 0; r < 30; ++r) {
    const auto path = simulate_ctbn(m, 2.0, rng);
    for (std::size_t w = 0; w < m.size(); ++w) {
      const auto seg = config_segments(m, w, path);
      ASSERT_EQ(seg.starts.size(), seg.codes.size());
      EXPECT_EQ(seg.starts.front(), 0.0);
      double total = 0.0;
      for (std::size_t j = 0; j < seg.starts.size(); ++j) {
        const double end = j + 1 < seg.starts.size() ? seg.starts[j + 1] : path.t_max();
        EXPECT_GT(end, seg.starts[j]);
        total += end - seg.starts[j];
        EXPECT_EQ(seg.codes[j], m.config_code(w, path.state_at(seg.starts[j])));
        if (j) EXPECT_NE(seg.codes[j], seg.codes[j - 1]);
      }
      EXPECT_NEAR(total, path.t_max(), 1e-12);
    }
  }
}

TEST(FullConditional, ChainNodeSeesOnlyItsChild) {
  const auto m = chain_model(5, 3);
  RandomStream rng(14);
  const auto path = simulate_ctbn(m, 2.0, rng);
  CtbnEvidence ev(5);
  for (std::size_t w = 0; w < 5; ++w) {
    const auto p = node_full_conditional(m, w, path, ev);
    if (w + 1 < 5) {
      ASSERT_EQ(p.children.size(), 1u);
      EXPECT_EQ(p.children[0].path, path.nodes[w + 1]);
    } else {
      EXPECT_TRUE(p.children.empty());
    }
  }
}

// Differences of the HMM target across skeletons of node A equal
// differences of the joint augmented density with the rest of the network fixed.
TEST(FullConditional, HmmTargetMatchesJointDensity) {
  const auto m = cyclic_model(15);
  RandomStream rng(16);
  const double T = 2.0;
  const std::size_t w = 0;
  double R = 0.0;
  for (const auto& c : m.node(w).cims) R = std::max(R, c->max_exit_rate());
  R += 1.0;
  CtbnEvidence ev(3);
  ev.points[0] = {observe_table(0.5, {-0.2, -1.1}), observe_table(1.7, {-0.9, 0.0})};
  for (int rep = 0; rep < 5; ++rep) {
    auto path = simulate_ctbn(m, T, rng);
    std::vector<double> grid;
    for (int k = 0; k < 6; ++k) grid.push_back(T * rng.uniform());
    std::sort(grid.begin(), grid.end());
    const auto problem = node_full_conditional(m, w, path, ev);
    const auto f = build_hmm_factors(problem, AugmentationPolicy::uniformization(R), grid);
    double base_h = kNegInf, base_j = 0.0;
    int compared = 0;
    for (int code = 0; code < (1 << 7); ++code) {
      std::vector<int> s(7);
      for (int k = 0; k < 7; ++k) s[k] = (code >> k) & 1;
      path.nodes[w] = from_skeleton(grid, s, T);
      double joint;
      try {
        validate(path, m);
        joint = log_density_ctbn(m, path) + ev.log_likelihood(path) + augmentation_terms(m, w, path, R, grid);
      } catch (const ModelError&) {
        continue;
      }
      const double h = f.log_target(s);
      if (base_h == kNegInf) {
        base_h = h;
        base_j = joint;
        continue;
      }
      EXPECT_NEAR(h - base_h, joint - base_j, 1e-9);
      ++compared;
    }
    EXPECT_GT(compared, 50);
  }
}

TEST(CtbnEvidence, ClampedPathMismatchIsImpossible) {
  const auto m = toy_model();
  RandomStream rng(17);
  const auto path = simulate_ctbn(m, 1.0, rng);
  CtbnEvidence ev(2);
  ev.paths[1] = path.nodes[1];
  EXPECT_TRUE(ev.observed(1));
  EXPECT_FALSE(ev.observed(0));
  EXPECT_EQ(ev.log_likelihood(path), 0.0);
  auto other = path;
  other.nodes[1].initial = 1 - other.nodes[1].initial;
  EXPECT_EQ(ev.log_likelihood(other), kNegInf);
}

}  // namespace
}  // namespace mjp
