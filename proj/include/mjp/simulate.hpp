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
#include <string>
#include <vector>

#include "mjp/error.hpp"
#include "mjp/initial.hpp"
#include "mjp/policy.hpp"
#include "mjp/random.hpp"
#include "mjp/rates.hpp"
#include "mjp/trajectory.hpp"

namespace mjp {

inline constexpr std::size_t kDefaultJumpCap = 1'000'000;

namespace detail {

inline void jump_cap_exceeded(std::size_t cap) {
  throw SamplingError("more than " + std::to_string(cap) +
                      " jumps in one path; rates are likely explosive or mis-specified");
}

// Next point of a rate-`rate` Poisson process after `t`, redrawn if floating
// point rounding fails to advance the clock.
inline double next_arrival(double t, double rate, RandomStream& rng) {
  for (;;) {
    double next = t + rng.exponential(rate);
    if (next > t) return next;
  }
}

}  // namespace detail

// Direct (Gillespie) simulation: exponential holding times with the current
// exit rate, next state drawn proportionally to rate(s, s').
template <RateModel M>
Trajectory<typename M::state_type> simulate_gillespie(const M& model,
                                                      const InitialDistribution<typename M::state_type>& nu,
                                                      double t_max, RandomStream& rng,
                                                      std::size_t jump_cap = kDefaultJumpCap) {
  detail::check_horizon(t_max);
  Trajectory<typename M::state_type> traj{nu.sample(rng), {}, t_max};
  auto s = traj.initial;
  double t = 0.0;
  for (;;) {
    const double q = model.exit_rate(s);
    if (!(q > 0.0)) break;
    t = detail::next_arrival(t, q, rng);
    if (t >= t_max) break;
    s = sample_target(model, s, rng);
    traj.jumps.push_back({t, s});
    if (traj.jumps.size() > jump_cap) detail::jump_cap_exceeded(jump_cap);
  }
  return traj;
}

// Thinning: candidate times arrive at rate R(s) of the current state and the
// skeleton moves with the kernel P = build_kernel(model, policy). Candidates
// at or beyond t_max are discarded.
template <RateModel M>
AugmentedTrajectory<typename M::state_type> thinning_sample(const M& model, const AugmentationPolicy& policy,
                                                            const InitialDistribution<typename M::state_type>& nu,
                                                            double t_max, RandomStream& rng,
                                                            std::size_t jump_cap = kDefaultJumpCap) {
  detail::check_horizon(t_max);
  const auto kernel = build_kernel(model, policy);
  AugmentedTrajectory<typename M::state_type> aug{nu.sample(rng), {}, t_max};
  auto s = aug.initial;
  double t = 0.0;
  for (;;) {
    policy.check(model, s);
    const double r = policy.dominating_rate(model.exit_rate(s));
    if (!(r > 0.0)) break;
    t = detail::next_arrival(t, r, rng);
    if (t >= t_max) break;
    s = kernel.sample(s, rng);
    aug.grid.push_back({t, s});
    if (aug.grid.size() > jump_cap) detail::jump_cap_exceeded(jump_cap);
  }
  return aug;
}

// Adds virtual jumps to a trajectory: on every stretch where the state is s
// and the rates are those of model m, virtual times form a Poisson process
// with intensity R_m(s) - Q_m(s). True jumps are kept unchanged.
template <RateModel M>
AugmentedTrajectory<typename M::state_type> resample_virtual(const Trajectory<typename M::state_type>& traj,
                                                             const RateSchedule<M>& schedule,
                                                             const AugmentationPolicy& policy, RandomStream& rng,
                                                             std::size_t jump_cap = kDefaultJumpCap) {
  AugmentedTrajectory<typename M::state_type> aug{traj.initial, {}, traj.t_max};
  aug.grid.reserve(traj.jumps.size() * 2 + 16);
  auto s = traj.initial;
  double last = 0.0;
  std::size_t seg = 0;
  std::size_t j = 0;
  double a = 0.0;
  while (a < traj.t_max) {
    const double next_jump = j < traj.jumps.size() ? traj.jumps[j].time : traj.t_max;
    while (seg + 1 < schedule.size() && schedule.starts[seg + 1] <= a) ++seg;
    const double b = std::min(next_jump, schedule.end(seg));
    const M& m = *schedule.models[seg];
    policy.check(m, s);
    const double v = policy.virtual_rate(m.exit_rate(s));
    if (v > 0.0) {
      double t = a;
      for (;;) {
        t = detail::next_arrival(t, v, rng);
        if (t >= b) break;
        if (t > last) {
          aug.grid.push_back({t, s});
          last = t;
        }
        if (aug.grid.size() > jump_cap) detail::jump_cap_exceeded(jump_cap);
      }
    }
    if (b == next_jump && j < traj.jumps.size()) {
      aug.grid.push_back(traj.jumps[j]);
      last = next_jump;
      s = traj.jumps[j].state;
      ++j;
    }
    a = b;
  }
  return aug;
}

template <RateModel M>
AugmentedTrajectory<typename M::state_type> resample_virtual(const Trajectory<typename M::state_type>& traj,
                                                             const M& model, const AugmentationPolicy& policy,
                                                             RandomStream& rng) {
  return resample_virtual(traj, RateSchedule<M>::homogeneous(model, traj.t_max), policy, rng);
}

}  // namespace mjp
