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

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mjp/ctbn.hpp"
#include "mjp/density.hpp"
#include "mjp/error.hpp"
#include "mjp/lotka_volterra.hpp"
#include "mjp/observation.hpp"
#include "mjp/policy.hpp"
#include "mjp/random.hpp"
#include "mjp/simulate.hpp"
#include "mjp/smc.hpp"
#include "mjp/trajectory.hpp"

namespace mjp {

struct Method {
  enum class Kind { pgas, ffbs };
  Kind kind = Kind::pgas;
  std::size_t particles = 10;
  // PGAS only: resample before every K-th grid step (1 = every step).
  std::size_t resample_every = 1;

  static Method pgas(std::size_t n, std::size_t every = 1) { return {Kind::pgas, n, every}; }
  static Method ffbs() { return {Kind::ffbs, 0, 1}; }

  static Method parse(const std::string& name, std::size_t particles) {
    if (name == "pgas") return pgas(particles);
    if (name == "ffbs") return ffbs();
    throw ConfigError("unknown method '" + name + "' (expected pgas or ffbs)");
  }

  std::string to_string() const {
    if (kind == Kind::ffbs) return "ffbs";
    return "pgas(" + std::to_string(particles) + (resample_every > 1 ? ", every " + std::to_string(resample_every) : "") +
           ")";
  }
};

enum class NodeOrder { fixed, random_permutation };

struct ChainConfig {
  Method method;
  AugmentationPolicy policy = AugmentationPolicy::homogeneous(1.0);
  // Per-node overrides for networks; empty means `policy` everywhere.
  std::vector<AugmentationPolicy> node_policies;
  std::size_t iterations = 1000;
  std::size_t burn_in = 100;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  NodeOrder node_order = NodeOrder::fixed;

  const AugmentationPolicy& policy_for(std::size_t w) const {
    return w < node_policies.size() ? node_policies[w] : policy;
  }

  void validate() const {
    if (!(iterations > burn_in)) throw ConfigError("iterations must exceed burn-in");
    if (thin == 0) throw ConfigError("thinning interval must be at least 1");
    if (method.kind == Method::Kind::pgas && method.particles < 2)
      throw ConfigError("particle Gibbs needs at least 2 particles");
    if (method.resample_every == 0) throw ConfigError("resampling interval must be at least 1");
  }

  std::size_t recorded() const { return (iterations - burn_in) / thin; }
};

namespace detail {

inline void check_policy_strict(const AugmentationPolicy& p, double max_exit, const std::string& where) {
  switch (p.kind()) {
    case AugmentationPolicy::Kind::uniformization:
      if (!(p.parameter() > max_exit))
        throw ConfigError("uniformization rate " + std::to_string(p.parameter()) + " must exceed the largest exit rate " +
                          std::to_string(max_exit) + where);
      break;
    case AugmentationPolicy::Kind::homogeneous:
      if (!(p.parameter() > 0.0)) throw ConfigError("virtual-jump rate must be positive" + where);
      break;
    case AugmentationPolicy::Kind::proportional:
      if (!(p.parameter() > 1.0)) throw ConfigError("proportional factor must exceed 1" + where);
      break;
  }
}

}  // namespace detail

// Preconditions under which the sampler is irreducible and aperiodic.
inline void validate_ergodicity(const FiniteRates& model, const AugmentationPolicy& policy) {
  detail::check_policy_strict(policy, model.max_exit_rate(), "");
}

inline void validate_ergodicity(const LotkaVolterraRates&, const AugmentationPolicy& policy) {
  if (policy.kind() == AugmentationPolicy::Kind::uniformization)
    throw ConfigError("uniformization needs bounded exit rates; this model's rates are unbounded");
  detail::check_policy_strict(policy, 0.0, "");
}

// Observed nodes are never resampled and are skipped.
inline void validate_ergodicity(const CtbnModel& model, const ChainConfig& config,
                                const CtbnEvidence* evidence = nullptr) {
  for (std::size_t w = 0; w < model.size(); ++w) {
    if (evidence && evidence->observed(w)) continue;
    double max_exit = 0.0;
    for (const auto& c : model.node(w).cims) max_exit = std::max(max_exit, c->max_exit_rate());
    detail::check_policy_strict(config.policy_for(w), max_exit, " (node " + model.node(w).name + ")");
  }
}

// One trajectory update: add virtual jumps, redraw the skeleton on the fixed
// grid, drop the virtual jumps.
template <RateModel M>
Trajectory<typename M::state_type> mjp_mcmc_step(const Trajectory<typename M::state_type>& current,
                                                 const ConditionalProblem<M>& problem,
                                                 const AugmentationPolicy& policy, const Method& method,
                                                 RandomStream& rng, PgasDiagnostics* diag = nullptr) {
  auto aug = resample_virtual(current, problem.schedule, policy, rng);
  const auto times = aug.times();
  const auto factors = build_hmm_factors(problem, policy, times);
  std::vector<typename M::state_type> skeleton;
  if (method.kind == Method::Kind::ffbs) {
    skeleton = ffbs_sample(factors, rng);
  } else {
    const auto reference = aug.skeleton();
    skeleton = pgas_step(factors, std::span<const typename M::state_type>(reference), method.particles, rng, diag,
                         method.resample_every);
  }
  aug.initial = skeleton[0];
  for (std::size_t k = 0; k < aug.grid.size(); ++k) aug.grid[k].state = skeleton[k + 1];
  return strip_virtual(aug);
}

// One Gibbs sweep over the unobserved nodes of a network.
inline void ctbn_gibbs_sweep(const CtbnModel& model, CtbnPath& path, const CtbnEvidence& evidence,
                             const ChainConfig& config, RandomStream& rng, PgasDiagnostics* diag = nullptr) {
  std::vector<std::size_t> order(model.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.node_order == NodeOrder::random_permutation) std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t w : order) {
    if (evidence.observed(w)) continue;
    const auto problem = node_full_conditional(model, w, path, evidence);
    path.nodes[w] = mjp_mcmc_step(path.nodes[w], problem, config.policy_for(w), config.method, rng, diag);
  }
}

struct ChainRun {
  std::size_t recorded = 0;
  // "prior" when a forward draw honoured the evidence, otherwise "bridge".
  std::string start = "given";
  std::size_t start_attempts = 0;
  // Wall time of every iteration, including burn-in.
  std::vector<double> iteration_ms;
  PgasDiagnostics pgas;
};

template <class Path>
using SampleSink = std::function<void(std::size_t iteration, const Path& sample, double wall_ms)>;

namespace detail {

template <class Path, class Step>
ChainRun drive(Path& state, const ChainConfig& config, Step&& step, const SampleSink<Path>& sink, ChainRun run) {
  config.validate();
  using clock = std::chrono::steady_clock;
  run.iteration_ms.reserve(config.iterations);
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const auto t0 = clock::now();
    step(state);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    run.iteration_ms.push_back(ms);
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      ++run.recorded;
      if (sink) sink(it, state, ms);
    }
  }
  return run;
}

template <class State>
std::optional<State> witness_at(std::span<const PointObservation<State>> obs, double t) {
  for (const auto& o : obs)
    if (o.time == t && o.witness) return *o.witness;
  return std::nullopt;
}

}  // namespace detail

// Starting path for a single process: prior draws with the t = 0 evidence
// assigned directly, retried until the evidence has positive likelihood;
// otherwise a path that sits in the t = 0 state and jumps once to the t_max
// state.
template <RateModel M>
Trajectory<typename M::state_type> initial_trajectory(const M& model, const ConditionalProblem<M>& problem,
                                                      RandomStream& rng, ChainRun* run = nullptr,
                                                      std::size_t attempts = 100) {
  using State = typename M::state_type;
  const double T = problem.t_max();
  auto start = detail::witness_at<State>(problem.observations, 0.0);
  if (start && !(problem.initial.log_prob(*start) > kNegInf)) start.reset();
  auto feasible = [&](const Trajectory<State>& tr) {
    double ll = log_density_trajectory(model, problem.initial, tr);
    for (const auto& o : problem.observations) ll += o.loglik(tr.state_at(o.time));
    return ll > kNegInf;
  };
  for (std::size_t a = 1; a <= attempts; ++a) {
    auto nu = start ? InitialDistribution<State>::point_mass(*start) : problem.initial;
    auto tr = simulate_gillespie(model, nu, T, rng);
    if (feasible(tr)) {
      if (run) run->start = "prior", run->start_attempts = a;
      return tr;
    }
  }
  const State s0 = start ? *start : problem.initial.sample(rng);
  Trajectory<State> tr{s0, {}, T};
  std::optional<State> end;
  for (const auto& o : problem.observations)
    if (o.witness && (!end || o.time >= T)) end = *o.witness;
  if (end && !(*end == s0)) tr.jumps.push_back({0.5 * T, *end});
  if (run) run->start = "bridge", run->start_attempts = attempts;
  if (!feasible(tr)) throw SamplingError("no starting path consistent with the evidence was found");
  return tr;
}

inline CtbnPath initial_ctbn_path(const CtbnModel& model, const CtbnEvidence& evidence, double t_max,
                                  RandomStream& rng, ChainRun* run = nullptr, std::size_t attempts = 100) {
  const std::size_t M = model.size();
  auto clamp = [&](CtbnPath& p) {
    for (std::size_t w = 0; w < M; ++w)
      if (evidence.observed(w)) p.nodes[w] = *evidence.paths[w];
  };
  auto feasible = [&](const CtbnPath& p) {
    return evidence.log_likelihood(p) > kNegInf && log_density_ctbn(model, p) > kNegInf;
  };
  // Prior draws with each node's t = 0 evidence imposed through its initial law.
  std::vector<CtbnNode> nodes = model.nodes();
  for (std::size_t w = 0; w < M; ++w) {
    const auto s = detail::witness_at<int>(evidence.points[w], 0.0);
    if (s) nodes[w].initial = InitialDistribution<int>::point_mass(*s);
    if (evidence.observed(w)) nodes[w].initial = InitialDistribution<int>::point_mass(evidence.paths[w]->initial);
  }
  const CtbnModel pinned(std::move(nodes));
  for (std::size_t a = 1; a <= attempts; ++a) {
    auto p = simulate_ctbn(pinned, t_max, rng);
    clamp(p);
    if (feasible(p)) {
      if (run) run->start = "prior", run->start_attempts = a;
      return p;
    }
  }
  CtbnPath p;
  for (std::size_t w = 0; w < M; ++w) {
    const auto& pts = evidence.points[w];
    const int s0 = pinned.node(w).initial.sample(rng);
    Trajectory<int> tr{s0, {}, t_max};
    std::optional<int> end;
    for (const auto& o : pts)
      if (o.witness && (!end || o.time >= t_max)) end = *o.witness;
    // Distinct jump times across nodes.
    if (end && *end != s0) tr.jumps.push_back({t_max * static_cast<double>(w + 1) / static_cast<double>(M + 1), *end});
    p.nodes.push_back(std::move(tr));
  }
  clamp(p);
  if (run) run->start = "bridge", run->start_attempts = attempts;
  if (!feasible(p)) throw SamplingError("no starting path consistent with the evidence was found");
  return p;
}

// Runs the single-process chain from `start`. The sink receives every
// recorded (post-burn-in, thinned) sample.
template <RateModel M>
ChainRun run_chain(const ConditionalProblem<M>& problem, Trajectory<typename M::state_type> start,
                   const ChainConfig& config, RandomStream& rng,
                   const SampleSink<Trajectory<typename M::state_type>>& sink, ChainRun run = {}) {
  PgasDiagnostics diag;
  auto out = detail::drive(
      start, config,
      [&](Trajectory<typename M::state_type>& tr) {
        tr = mjp_mcmc_step(tr, problem, config.policy, config.method, rng, &diag);
      },
      sink, std::move(run));
  out.pgas = diag;
  return out;
}

inline ChainRun run_chain(const CtbnModel& model, const CtbnEvidence& evidence, CtbnPath start,
                          const ChainConfig& config, RandomStream& rng, const SampleSink<CtbnPath>& sink,
                          ChainRun run = {}) {
  validate(start, model);
  PgasDiagnostics diag;
  auto out = detail::drive(
      start, config, [&](CtbnPath& p) { ctbn_gibbs_sweep(model, p, evidence, config, rng, &diag); }, sink,
      std::move(run));
  out.pgas = diag;
  return out;
}

}  // namespace mjp
