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
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mjp/error.hpp"

namespace mjp {

template <class State>
struct Jump {
  double time = 0.0;
  State state{};

  friend bool operator==(const Jump&, const Jump&) = default;
};

// Piecewise-constant right-continuous path on [0, t_max]: the process starts
// in `initial` and moves to jumps[j].state at jumps[j].time.
template <class State>
struct Trajectory {
  State initial{};
  std::vector<Jump<State>> jumps;
  double t_max = 1.0;

  std::size_t jump_count() const { return jumps.size(); }

  const State& final_state() const { return jumps.empty() ? initial : jumps.back().state; }

  // X(t), right-continuous.
  const State& state_at(double t) const {
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t,
                               [](double v, const Jump<State>& j) { return v < j.time; });
    return it == jumps.begin() ? initial : std::prev(it)->state;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Potential-jump grid with a redundant skeleton. Grid points where the
// state repeats are virtual jumps.
template <class State>
struct AugmentedTrajectory {
  State initial{};
  std::vector<Jump<State>> grid;
  double t_max = 1.0;

  std::size_t size() const { return grid.size(); }

  const State& state(std::size_t k) const { return k == 0 ? initial : grid[k - 1].state; }

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(grid.size());
    for (const auto& g : grid) t.push_back(g.time);
    return t;
  }

  // Skeleton s_0..s_n.
  std::vector<State> skeleton() const {
    std::vector<State> s;
    s.reserve(grid.size() + 1);
    s.push_back(initial);
    for (const auto& g : grid) s.push_back(g.state);
    return s;
  }

  // Indices k in 1..n with s_k != s_{k-1}.
  std::vector<std::size_t> true_jump_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 1; k <= grid.size(); ++k)
      if (!(state(k) == state(k - 1))) idx.push_back(k);
    return idx;
  }

  std::size_t virtual_count() const { return grid.size() - true_jump_indices().size(); }

  friend bool operator==(const AugmentedTrajectory&, const AugmentedTrajectory&) = default;
};

namespace detail {

inline void check_horizon(double t_max) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ModelError("t_max must be positive and finite");
}

template <class State>
void check_times(const std::vector<Jump<State>>& pts, double t_max, const char* what) {
  double prev = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double t = pts[i].time;
    if (!(t > prev) || !(t < t_max))
      throw ModelError(std::string(what) + " time #" + std::to_string(i) + " = " + std::to_string(t) +
                       " is not strictly increasing inside (0, t_max)");
    prev = t;
  }
}

}  // namespace detail

template <class State>
void validate(const Trajectory<State>& traj) {
  detail::check_horizon(traj.t_max);
  detail::check_times(traj.jumps, traj.t_max, "jump");
  const State* prev = &traj.initial;
  for (std::size_t j = 0; j < traj.jumps.size(); ++j) {
    if (traj.jumps[j].state == *prev)
      throw ModelError("jump #" + std::to_string(j) + " does not change the state");
    prev = &traj.jumps[j].state;
  }
}

template <class State>
void validate(const AugmentedTrajectory<State>& aug) {
  detail::check_horizon(aug.t_max);
  detail::check_times(aug.grid, aug.t_max, "grid");
}

// Keeps the grid points where the skeleton changes state.
template <class State>
Trajectory<State> strip_virtual(const AugmentedTrajectory<State>& aug) {
  Trajectory<State> out{aug.initial, {}, aug.t_max};
  const State* prev = &aug.initial;
  for (const auto& g : aug.grid) {
    if (!(g.state == *prev)) out.jumps.push_back(g);
    prev = &g.state;
  }
  return out;
}

template <class State>
void to_json(nlohmann::json& j, const Trajectory<State>& traj) {
  nlohmann::json jumps = nlohmann::json::array();
  for (const auto& jp : traj.jumps) jumps.push_back(nlohmann::json::array({jp.time, jp.state}));
  j = nlohmann::json{{"s0", traj.initial}, {"t_max", traj.t_max}, {"jumps", jumps}};
}

template <class State>
void from_json(const nlohmann::json& j, Trajectory<State>& traj) {
  traj.initial = j.at("s0").get<State>();
  traj.t_max = j.at("t_max").get<double>();
  traj.jumps.clear();
  for (const auto& e : j.at("jumps")) traj.jumps.push_back({e.at(0).get<double>(), e.at(1).get<State>()});
  validate(traj);
}

template <class State>
void to_json(nlohmann::json& j, const AugmentedTrajectory<State>& aug) {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : aug.grid) grid.push_back(nlohmann::json::array({g.time, g.state}));
  to_json(j, strip_virtual(aug));
  j["grid"] = grid;
}

template <class State>
void from_json(const nlohmann::json& j, AugmentedTrajectory<State>& aug) {
  aug.initial = j.at("s0").get<State>();
  aug.t_max = j.at("t_max").get<double>();
  aug.grid.clear();
  for (const auto& e : j.at("grid")) aug.grid.push_back({e.at(0).get<double>(), e.at(1).get<State>()});
  validate(aug);
}

}  // namespace mjp
