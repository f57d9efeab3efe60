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
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mjp/error.hpp"
#include "mjp/initial.hpp"
#include "mjp/lotka_volterra.hpp"
#include "mjp/policy.hpp"
#include "mjp/rates.hpp"
#include "mjp/trajectory.hpp"

namespace mjp {

// Noisy observation of X(time). `witness`, when set, is a state with finite
// log-likelihood; it lets degenerate evidence be detected without scanning
// the state space.
template <class State>
struct PointObservation {
  double time = 0.0;
  std::function<double(const State&)> loglik;
  std::optional<State> witness;
  // Serializable form of loglik, when it has one.
  nlohmann::json description;
};

template <class State>
PointObservation<State> observe_exactly(double time, State s) {
  return {time, [s](const State& x) { return x == s ? 0.0 : kNegInf; }, s, {{"rule", "point_mass"}, {"state", s}}};
}

inline PointObservation<int> observe_table(double time, std::vector<double> loglik) {
  std::optional<int> best;
  for (std::size_t i = 0; i < loglik.size(); ++i)
    if (loglik[i] > kNegInf && (!best || loglik[i] > loglik[static_cast<std::size_t>(*best)]))
      best = static_cast<int>(i);
  nlohmann::json desc = nlohmann::json::array();
  for (double v : loglik) desc.push_back(v > kNegInf ? nlohmann::json(v) : nlohmann::json("-inf"));
  return {time,
          [table = std::move(loglik)](const int& x) {
            return x >= 0 && static_cast<std::size_t>(x) < table.size() ? table[static_cast<std::size_t>(x)] : kNegInf;
          },
          best, std::move(desc)};
}

// log L = -log(2^|x - y| + 1e-6), summed over the two populations.
inline double lv_geometric_loglik(const LvState& x, const LvState& observed) {
  auto term = [](std::int64_t d) {
    const double a = static_cast<double>(d < 0 ? -d : d);
    return -std::log(std::exp2(a) + 1e-6);
  };
  return term(x.prey - observed.prey) + term(x.predator - observed.predator);
}

inline PointObservation<LvState> observe_lv_geometric(double time, LvState observed) {
  LvState witness{std::max<std::int64_t>(observed.prey, 0), std::max<std::int64_t>(observed.predator, 0)};
  return {time, [observed](const LvState& x) { return lv_geometric_loglik(x, observed); }, witness,
          {{"rule", "lv_geometric"}, {"observed", observed}}};
}

// Fully observed child process u of the node being sampled. The child's rate
// table in force at time t is cims[base(t) + stride * s], where s is the
// sampled node's state and base(t) encodes the child's other parents
// (base_codes[j] on [base_starts[j], base_starts[j+1])).
struct ChildTerm {
  Trajectory<int> path;
  std::vector<double> base_starts{0.0};
  std::vector<std::size_t> base_codes{0};
  std::size_t stride = 1;
  std::vector<const FiniteRates*> cims;
};

// Child Y of a single parent X: cim_by_parent[x] are the rates of Y when X = x.
struct ChildProcessEvidence {
  Trajectory<int> path;
  std::vector<std::shared_ptr<const FiniteRates>> cim_by_parent;

  ChildTerm as_term() const {
    ChildTerm term;
    term.path = path;
    for (const auto& c : cim_by_parent) term.cims.push_back(c.get());
    return term;
  }
};

// Everything needed to sample one hidden path given the rest of the world:
// piecewise rates, initial law, point evidence and child processes.
template <RateModel M>
struct ConditionalProblem {
  using State = typename M::state_type;

  RateSchedule<M> schedule;
  InitialDistribution<State> initial;
  // Optional instrumental law for the initial particles; weights are then
  // corrected by nu / proposal.
  std::optional<InitialDistribution<State>> proposal;
  std::vector<PointObservation<State>> observations;
  std::vector<ChildTerm> children;

  double t_max() const { return schedule.t_max; }
};

template <RateModel M>
ConditionalProblem<M> make_problem(const M& model, InitialDistribution<typename M::state_type> nu, double t_max,
                                   std::vector<PointObservation<typename M::state_type>> observations = {}) {
  ConditionalProblem<M> p;
  p.schedule = RateSchedule<M>::homogeneous(model, t_max);
  p.initial = std::move(nu);
  p.observations = std::move(observations);
  return p;
}

// For every observation time, the index i* of the last grid point at or
// before it (0 when it precedes the whole grid).
inline std::vector<std::size_t> locate_observation_steps(std::span<const double> grid_times,
                                                         std::span<const double> obs_times, double t_max) {
  std::vector<std::size_t> out;
  out.reserve(obs_times.size());
  for (double t : obs_times) {
    if (!(t >= 0.0) || t > t_max)
      throw ModelError("observation time " + std::to_string(t) + " outside [0, t_max]");
    out.push_back(static_cast<std::size_t>(std::upper_bound(grid_times.begin(), grid_times.end(), t) -
                                           grid_times.begin()));
  }
  return out;
}

// Per-interval log-potentials contributed by one child process: interval k is
// [t_k, t_{k+1}) with t_0 = 0 and t_{n+1} = t_max. A child jump that falls
// exactly on a grid time is charged to the earlier interval.
class ChildPotentials {
 public:
  ChildPotentials(const ChildTerm& term, std::span<const double> times, double t_max)
      : stride_(term.stride), cims_(term.cims) {
    const std::size_t n = times.size();
    offsets_.assign(n + 2, 0);
    const auto& jumps = term.path.jumps;
    constexpr double inf = std::numeric_limits<double>::infinity();
    double cur = 0.0;
    int y = term.path.initial;
    std::size_t base = term.base_codes.at(0);
    std::size_t jy = 0, jb = 0, k = 0;
    for (;;) {
      const double next_grid = k < n ? times[k] : t_max;
      const double next_jump = jy < jumps.size() ? jumps[jy].time : inf;
      const double next_base = jb + 1 < term.base_starts.size() ? term.base_starts[jb + 1] : inf;
      if (next_jump <= next_grid && next_jump <= next_base && next_jump < t_max) {
        if (next_jump == next_base)
          throw ModelError("child jump coincides with a jump of one of its other parents");
        if (next_jump == next_grid && k < n) ++ties_;
        pieces_.push_back({next_jump - cur, y, base, jumps[jy].state});
        y = jumps[jy].state;
        cur = next_jump;
        ++jy;
      } else if (next_base < next_grid) {
        if (next_base > cur) pieces_.push_back({next_base - cur, y, base, -1});
        base = term.base_codes[jb + 1];
        cur = next_base;
        ++jb;
      } else {
        if (next_grid > cur) pieces_.push_back({next_grid - cur, y, base, -1});
        cur = next_grid;
        offsets_[k + 1] = pieces_.size();
        if (k == n) break;
        ++k;
      }
    }
  }

  double operator()(std::size_t k, int s) const {
    double lg = 0.0;
    const std::size_t shift = stride_ * static_cast<std::size_t>(s);
    for (std::size_t i = offsets_[k]; i < offsets_[k + 1]; ++i) {
      const Piece& p = pieces_[i];
      const FiniteRates& cim = *cims_[p.base + shift];
      lg -= p.dt * cim.exit_rate(p.y);
      if (p.jump_to >= 0) {
        const double r = cim.rate(p.y, p.jump_to);
        lg += r > 0.0 ? std::log(r) : kNegInf;
      }
    }
    return lg;
  }

  std::size_t intervals() const { return offsets_.size() - 1; }
  // Number of child jumps that landed exactly on a grid time.
  std::size_t ties() const { return ties_; }

 private:
  struct Piece {
    double dt;
    int y;
    std::size_t base;
    int jump_to;
  };

  std::size_t stride_;
  std::vector<const FiniteRates*> cims_;
  std::vector<std::size_t> offsets_;
  std::vector<Piece> pieces_;
  std::size_t ties_ = 0;
};

inline ChildPotentials child_process_potentials(const ChildTerm& term, std::span<const double> times,
                                                double t_max) {
  return ChildPotentials(term, times, t_max);
}

// log g_k(s) of the skeleton-as-HMM representation: observation terms grouped
// by grid index, child-process terms and, unless the policy is
// uniformization, the holding factors
//   log R_{k+1}(s) - integral_{t_k}^{t_{k+1}} R(s) du   (k < n),
//   - integral_{t_n}^{t_max} R(s) du                     (k = n).
template <RateModel M>
class SkeletonPotentials {
 public:
  using State = typename M::state_type;

  SkeletonPotentials(const ConditionalProblem<M>& problem, const AugmentationPolicy& policy,
                     std::span<const double> times)
      : n_(times.size()), policy_(policy) {
    const double t_max = problem.t_max();

    std::vector<double> obs_times;
    for (const auto& o : problem.observations) obs_times.push_back(o.time);
    const auto steps = locate_observation_steps(times, obs_times, t_max);
    obs_offsets_.assign(n_ + 2, 0);
    for (std::size_t i = 0; i < steps.size(); ++i) ++obs_offsets_[steps[i] + 1];
    for (std::size_t k = 0; k <= n_; ++k) obs_offsets_[k + 1] += obs_offsets_[k];
    obs_.resize(steps.size());
    {
      std::vector<std::size_t> fill(obs_offsets_.begin(), obs_offsets_.end() - 1);
      for (std::size_t i = 0; i < steps.size(); ++i) obs_[fill[steps[i]]++] = problem.observations[i];
    }

    if (!policy_.constant_holding()) {
      const auto& sched = problem.schedule;
      hold_offsets_.assign(n_ + 2, 0);
      next_model_.resize(n_);
      double cur = 0.0;
      std::size_t seg = 0;
      for (std::size_t k = 0; k <= n_; ++k) {
        const double stop = k < n_ ? times[k] : t_max;
        while (cur < stop) {
          const double b = std::min(stop, sched.end(seg));
          if (b > cur) hold_pieces_.push_back({b - cur, sched.models[seg]});
          cur = b;
          if (cur >= sched.end(seg) && seg + 1 < sched.size()) ++seg;
        }
        hold_offsets_[k + 1] = hold_pieces_.size();
        if (k < n_) next_model_[k] = &sched.at(times[k]);
      }
    }

    if constexpr (std::same_as<State, int>) {
      for (const auto& c : problem.children) children_.emplace_back(c, times, t_max);
    } else {
      if (!problem.children.empty()) throw ModelError("child-process evidence needs a finite state space");
    }
  }

  std::size_t steps() const { return n_; }

  double operator()(std::size_t k, const State& s) const {
    double lg = observation_term(k, s);
    if (lg == kNegInf) return lg;
    if (!policy_.constant_holding()) {
      if (k < n_) lg += std::log(policy_.dominating_rate(next_model_[k]->exit_rate(s)));
      for (std::size_t i = hold_offsets_[k]; i < hold_offsets_[k + 1]; ++i)
        lg -= hold_pieces_[i].first * policy_.dominating_rate(hold_pieces_[i].second->exit_rate(s));
    }
    if constexpr (std::same_as<State, int>) {
      for (const auto& c : children_) lg += c(k, s);
    }
    return lg;
  }

  double observation_term(std::size_t k, const State& s) const {
    double lg = 0.0;
    for (std::size_t i = obs_offsets_[k]; i < obs_offsets_[k + 1]; ++i) lg += obs_[i].loglik(s);
    return lg;
  }

  // Throws if some grid index carries observations that no state satisfies.
  template <class StateCount>
  void check_not_degenerate(StateCount num_states) const {
    for (std::size_t k = 0; k <= n_; ++k) {
      if (obs_offsets_[k] == obs_offsets_[k + 1]) continue;
      bool ok = false;
      for (std::size_t i = obs_offsets_[k]; i < obs_offsets_[k + 1] && !ok; ++i)
        if (obs_[i].witness && observation_term(k, *obs_[i].witness) > kNegInf) ok = true;
      if constexpr (std::same_as<State, int>) {
        for (int s = 0; !ok && static_cast<std::size_t>(s) < num_states; ++s)
          ok = observation_term(k, s) > kNegInf;
      }
      if (!ok) throw ModelError("evidence rules out every state at grid step " + std::to_string(k));
    }
  }

  std::size_t child_ties() const {
    std::size_t t = 0;
    if constexpr (std::same_as<State, int>) {
      for (const auto& c : children_) t += c.ties();
    }
    return t;
  }

 private:
  std::size_t n_;
  AugmentationPolicy policy_;
  std::vector<std::size_t> obs_offsets_;
  std::vector<PointObservation<State>> obs_;
  std::vector<std::size_t> hold_offsets_;
  std::vector<std::pair<double, const M*>> hold_pieces_;
  std::vector<const M*> next_model_;
  std::vector<ChildPotentials> children_;
};

// Conditional law of the skeleton given the grid and the evidence, as a
// discrete-time HMM:  p(S | T, V, Y) ∝ nu(s_0) g_0(s_0) prod_k P_k(s_{k-1}, s_k) g_k(s_k).
template <RateModel M>
struct HmmFactors {
  using State = typename M::state_type;

  std::vector<double> times;
  double t_max = 1.0;
  // Cardinality of a finite state space, 0 for rule-based spaces.
  std::size_t num_states = 0;
  InitialDistribution<State> initial;
  std::optional<InitialDistribution<State>> proposal;
  // kernels[k - 1] moves s_{k-1} to s_k.
  std::vector<SkeletonKernel<M>> kernels;
  std::function<double(std::size_t, const State&)> log_potential;

  std::size_t steps() const { return kernels.size(); }
  const SkeletonKernel<M>& kernel(std::size_t k) const { return kernels[k - 1]; }

  // Unnormalized log-probability of a skeleton s_0..s_n.
  double log_target(std::span<const State> skeleton) const {
    if (skeleton.size() != steps() + 1) throw ModelError("skeleton length does not match the grid");
    double lp = initial.log_prob(skeleton[0]) + log_potential(0, skeleton[0]);
    for (std::size_t k = 1; k <= steps() && lp > kNegInf; ++k)
      lp += kernel(k).log_prob(skeleton[k - 1], skeleton[k]) + log_potential(k, skeleton[k]);
    return lp;
  }
};

template <RateModel M>
HmmFactors<M> build_hmm_factors(const ConditionalProblem<M>& problem, const AugmentationPolicy& policy,
                                std::span<const double> times) {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (!(times[k] > (k ? times[k - 1] : 0.0)) || !(times[k] < problem.t_max()))
      throw ModelError("grid times must be strictly increasing inside (0, t_max)");
  HmmFactors<M> f;
  f.times.assign(times.begin(), times.end());
  f.t_max = problem.t_max();
  f.initial = problem.initial;
  f.proposal = problem.proposal;
  f.kernels.reserve(times.size());
  for (double t : times) f.kernels.emplace_back(problem.schedule.at(t), policy);
  auto pot = std::make_shared<SkeletonPotentials<M>>(problem, policy, times);
  if constexpr (FiniteRateModel<M>) f.num_states = problem.schedule.models.front()->num_states();
  pot->check_not_degenerate(f.num_states);
  f.log_potential = [pot](std::size_t k, const typename M::state_type& s) { return (*pot)(k, s); };
  return f;
}

template <RateModel M>
HmmFactors<M> build_hmm_factors(const M& model, const AugmentationPolicy& policy,
                                const InitialDistribution<typename M::state_type>& nu, std::span<const double> times,
                                double t_max, std::vector<PointObservation<typename M::state_type>> evidence = {}) {
  return build_hmm_factors(make_problem(model, nu, t_max, std::move(evidence)), policy, times);
}

}  // namespace mjp
