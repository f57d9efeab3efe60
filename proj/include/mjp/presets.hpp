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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "mjp/ctbn.hpp"
#include "mjp/lotka_volterra.hpp"
#include "mjp/mcmc.hpp"
#include "mjp/observation.hpp"
#include "mjp/rates.hpp"
#include "mjp/simulate.hpp"

namespace mjp {

struct CtbnPreset {
  CtbnModel model;
  CtbnEvidence evidence;
  CtbnPath truth;
  ChainConfig config;
  double t_max = 1.0;
  std::size_t replications = 1;
};

namespace detail {

inline std::shared_ptr<const FiniteRates> symmetric2(double rate) {
  return std::make_shared<DenseRates>(std::vector<std::vector<double>>{{0.0, rate}, {rate, 0.0}});
}

inline void observe_endpoints(CtbnEvidence& ev, const CtbnPath& truth, std::size_t w) {
  ev.points[w].push_back(observe_exactly(0.0, truth.nodes[w].initial));
  ev.points[w].push_back(observe_exactly(truth.t_max(), truth.nodes[w].final_state()));
}

}  // namespace detail

inline CtbnModel toy_model() {
  CtbnNode x{"X", 2, {}, {detail::symmetric2(10.0)}, InitialDistribution<int>::uniform(2)};
  CtbnNode y{"Y", 2, {0}, {detail::symmetric2(10.0), detail::symmetric2(100.0)}, InitialDistribution<int>::uniform(2)};
  return CtbnModel({std::move(x), std::move(y)});
}

// Two binary nodes X -> Y on [0, 1]. Y is observed over the whole interval,
// X only at both ends. `data_seed` draws the hidden truth.
inline CtbnPreset preset_toy(std::uint64_t data_seed, bool homogeneous = false) {
  CtbnPreset p;
  p.model = toy_model();
  p.t_max = 1.0;
  RandomStream rng(data_seed);
  p.truth = simulate_ctbn(p.model, p.t_max, rng);
  p.evidence = CtbnEvidence(2);
  p.evidence.paths[1] = p.truth.nodes[1];
  detail::observe_endpoints(p.evidence, p.truth, 0);
  p.config.policy = homogeneous ? AugmentationPolicy::homogeneous(10.0) : AugmentationPolicy::uniformization(20.0);
  p.config.method = Method::pgas(4);
  p.config.iterations = 1000;
  p.config.burn_in = 100;
  p.replications = 100;
  return p;
}

inline CtbnModel chain_model(std::size_t M, int S) {
  if (M < 1) throw ConfigError("chain needs at least one node");
  if (S < 2) throw ConfigError("chain nodes need at least 2 states");
  std::vector<CtbnNode> nodes;
  for (std::size_t m = 0; m < M; ++m) {
    CtbnNode n{"X" + std::to_string(m + 1), S, {}, {}, InitialDistribution<int>::uniform(S)};
    if (m == 0) {
      n.cims.push_back(std::make_shared<ChainHeadRates>(S));
    } else {
      n.parents = {m - 1};
      for (int c = 0; c < S; ++c) n.cims.push_back(std::make_shared<ChainFollowerRates>(S, c));
    }
    nodes.push_back(std::move(n));
  }
  return CtbnModel(std::move(nodes));
}

// Chain X1 -> X2 -> ... -> XM with S states per node on [0, T]. Every node is
// observed at 0 and T; R = 2 Q for every node.
inline CtbnPreset preset_chain(std::size_t M, int S, double T, std::uint64_t data_seed) {
  if (!(T > 0.0)) throw ConfigError("horizon must be positive");
  CtbnPreset p;
  p.model = chain_model(M, S);
  p.t_max = T;
  RandomStream rng(data_seed);
  p.truth = simulate_ctbn(p.model, T, rng);
  p.evidence = CtbnEvidence(M);
  for (std::size_t w = 0; w < M; ++w) detail::observe_endpoints(p.evidence, p.truth, w);
  p.config.policy = AugmentationPolicy::proportional(2.0);
  p.config.method = Method::pgas(10);
  p.config.iterations = 1000;
  p.config.burn_in = 100;
  p.replications = 20;
  return p;
}

struct LvPreset {
  std::shared_ptr<const LotkaVolterraRates> model;
  ConditionalProblem<LotkaVolterraRates> problem;
  Trajectory<LvState> truth;
  std::vector<LvState> observed;
  ChainConfig config;
  std::size_t replications = 1;
};

struct LvOptions {
  LotkaVolterraRates::Params params{};
  LvState initial{100, 100};
  double t_max = 3000.0;
  double obs_end = 1500.0;
  std::size_t observations = 50;
};

// Two-sided geometric noise: the difference of two Geometric(1/2) counts,
// which has P(d) = 2^{-|d|} / 3.
inline std::int64_t lv_noise(RandomStream& rng) {
  std::geometric_distribution<std::int64_t> g(0.5);
  return g(rng) - g(rng);
}

inline LvPreset preset_lotka_volterra(std::uint64_t data_seed, const LvOptions& opt = {}) {
  if (opt.observations < 2) throw ConfigError("need at least two observation times");
  if (!(opt.obs_end <= opt.t_max) || !(opt.obs_end > 0.0)) throw ConfigError("observation window must lie in (0, t_max]");
  LvPreset p;
  p.model = std::make_shared<LotkaVolterraRates>(opt.params);
  RandomStream rng(data_seed);
  auto nu = InitialDistribution<LvState>::point_mass(opt.initial);
  p.truth = simulate_gillespie(*p.model, nu, opt.t_max, rng);
  std::vector<PointObservation<LvState>> obs;
  for (std::size_t i = 0; i < opt.observations; ++i) {
    const double t = opt.obs_end * static_cast<double>(i) / static_cast<double>(opt.observations - 1);
    const LvState x = p.truth.state_at(t);
    LvState y{std::max<std::int64_t>(0, x.prey + lv_noise(rng)), std::max<std::int64_t>(0, x.predator + lv_noise(rng))};
    p.observed.push_back(y);
    obs.push_back(observe_lv_geometric(t, y));
  }
  p.problem = make_problem(*p.model, nu, opt.t_max, std::move(obs));
  p.config.policy = AugmentationPolicy::homogeneous(30.0);
  // Observations are ~90 grid steps apart; resampling at every step makes
  // the genealogy collapse onto the reference between them.
  p.config.method = Method::pgas(100, 25);
  p.config.iterations = 1000;
  p.config.burn_in = 100;
  return p;
}

}  // namespace mjp
