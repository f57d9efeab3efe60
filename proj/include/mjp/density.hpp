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

#include <cmath>

#include "mjp/initial.hpp"
#include "mjp/policy.hpp"
#include "mjp/rates.hpp"
#include "mjp/trajectory.hpp"

namespace mjp {

namespace detail {

inline double log_or_neg_inf(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace detail

// Log-density of a path (jump times and skeleton) of a homogeneous MJP:
//   log nu(s_0) + sum_j [log Q(s_{j-1}, s_j) - Q(s_{j-1}) (t_j - t_{j-1})]
//               - Q(s_m) (t_max - t_m).
// Returns -inf for paths using a zero-rate transition.
template <RateModel M>
double log_density_trajectory(const M& model, const InitialDistribution<typename M::state_type>& nu,
                              const Trajectory<typename M::state_type>& traj) {
  double lp = nu.log_prob(traj.initial);
  if (lp == kNegInf) return lp;
  const auto* s = &traj.initial;
  double t = 0.0;
  for (const auto& jp : traj.jumps) {
    lp += detail::log_or_neg_inf(model.rate(*s, jp.state));
    lp -= model.exit_rate(*s) * (jp.time - t);
    if (lp == kNegInf) return lp;
    s = &jp.state;
    t = jp.time;
  }
  return lp - model.exit_rate(*s) * (traj.t_max - t);
}

// Log-density of (T, V, S) produced by thinning with intensity R:
//   log nu(s_0) + sum_k [1(s_k = s_{k-1}) log(R - Q)(s_{k-1}) + 1(s_k != s_{k-1}) log Q(s_{k-1}, s_k)]
//               - integral_0^t_max R(X(u)) du.
template <RateModel M>
double log_density_augmented(const M& model, const AugmentationPolicy& policy,
                             const InitialDistribution<typename M::state_type>& nu,
                             const AugmentedTrajectory<typename M::state_type>& aug) {
  double lp = nu.log_prob(aug.initial);
  if (lp == kNegInf) return lp;
  const auto* s = &aug.initial;
  double t = 0.0;
  for (const auto& g : aug.grid) {
    policy.check(model, *s);
    const double q = model.exit_rate(*s);
    if (g.state == *s)
      lp += detail::log_or_neg_inf(policy.virtual_rate(q));
    else
      lp += detail::log_or_neg_inf(model.rate(*s, g.state));
    lp -= policy.dominating_rate(q) * (g.time - t);
    if (lp == kNegInf) return lp;
    s = &g.state;
    t = g.time;
  }
  policy.check(model, *s);
  return lp - policy.dominating_rate(model.exit_rate(*s)) * (aug.t_max - t);
}

// Log-density of the virtual jumps given the true path: on each stretch
// with state s, |V_j| log(R(s) - Q(s)) - (R(s) - Q(s)) * length.
template <RateModel M>
double log_density_virtual(const M& model, const AugmentationPolicy& policy,
                           const AugmentedTrajectory<typename M::state_type>& aug) {
  double lp = 0.0;
  const auto* s = &aug.initial;
  double t = 0.0;
  for (const auto& g : aug.grid) {
    const double v = policy.virtual_rate(model.exit_rate(*s));
    lp -= v * (g.time - t);
    if (g.state == *s) lp += detail::log_or_neg_inf(v);
    s = &g.state;
    t = g.time;
  }
  return lp - policy.virtual_rate(model.exit_rate(*s)) * (aug.t_max - t);
}

}  // namespace mjp
