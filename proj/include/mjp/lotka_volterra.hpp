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

#include <cstdint>
#include <functional>
#include <ostream>

#include <nlohmann/json.hpp>

#include "mjp/error.hpp"
#include "mjp/random.hpp"

namespace mjp {

// Prey/predator population pair.
struct LvState {
  std::int64_t prey = 0;
  std::int64_t predator = 0;

  friend bool operator==(const LvState&, const LvState&) = default;
  friend std::ostream& operator<<(std::ostream& os, const LvState& s) {
    return os << '(' << s.prey << ", " << s.predator << ')';
  }
};

inline void to_json(nlohmann::json& j, const LvState& s) { j = nlohmann::json::array({s.prey, s.predator}); }
inline void from_json(const nlohmann::json& j, LvState& s) {
  if (!j.is_array() || j.size() != 2) throw ModelError("Lotka-Volterra state must be [prey, predator]");
  s.prey = j.at(0).get<std::int64_t>();
  s.predator = j.at(1).get<std::int64_t>();
  if (s.prey < 0 || s.predator < 0) throw ModelError("Lotka-Volterra populations must be >= 0");
}

// Stochastic Lotka-Volterra kinetics on the unbounded lattice N x N:
//   (x, y) -> (x + 1, y)  at alpha x      (x, y) -> (x - 1, y)  at beta x y
//   (x, y) -> (x, y + 1)  at delta x y    (x, y) -> (x, y - 1)  at gamma y
class LotkaVolterraRates {
 public:
  using state_type = LvState;

  struct Params {
    double alpha = 5e-4;
    double beta = 1e-4;
    double gamma = 5e-4;
    double delta = 1e-4;
  };

  LotkaVolterraRates() = default;
  explicit LotkaVolterraRates(Params p) : p_(p) {
    if (!(p_.alpha >= 0 && p_.beta >= 0 && p_.gamma >= 0 && p_.delta >= 0))
      throw ModelError("Lotka-Volterra rates must be >= 0");
  }

  const Params& params() const { return p_; }

  double rate(const LvState& from, const LvState& to) const {
    const double x = static_cast<double>(from.prey), y = static_cast<double>(from.predator);
    if (to.predator == from.predator) {
      if (to.prey == from.prey + 1) return p_.alpha * x;
      if (to.prey == from.prey - 1) return p_.beta * x * y;
    } else if (to.prey == from.prey) {
      if (to.predator == from.predator + 1) return p_.delta * x * y;
      if (to.predator == from.predator - 1) return p_.gamma * y;
    }
    return 0.0;
  }

  double exit_rate(const LvState& s) const {
    const double x = static_cast<double>(s.prey), y = static_cast<double>(s.predator);
    return p_.alpha * x + p_.beta * x * y + p_.delta * x * y + p_.gamma * y;
  }

  template <class F>
  void for_each_target(const LvState& s, F&& f) const {
    const double x = static_cast<double>(s.prey), y = static_cast<double>(s.predator);
    const double r[4] = {p_.alpha * x, p_.beta * x * y, p_.delta * x * y, p_.gamma * y};
    for (int k = 0; k < 4; ++k)
      if (r[k] > 0.0) f(neighbour(s, k), r[k]);
  }

  LvState sample_target(const LvState& s, RandomStream& rng) const {
    const double x = static_cast<double>(s.prey), y = static_cast<double>(s.predator);
    const double r[4] = {p_.alpha * x, p_.beta * x * y, p_.delta * x * y, p_.gamma * y};
    double u = rng.uniform() * (r[0] + r[1] + r[2] + r[3]);
    int last = 0;
    for (int k = 0; k < 4; ++k) {
      if (r[k] <= 0.0) continue;
      last = k;
      u -= r[k];
      if (u <= 0.0) return neighbour(s, k);
    }
    return neighbour(s, last);
  }

 private:
  static LvState neighbour(const LvState& s, int k) {
    switch (k) {
      case 0: return {s.prey + 1, s.predator};
      case 1: return {s.prey - 1, s.predator};
      case 2: return {s.prey, s.predator + 1};
      default: return {s.prey, s.predator - 1};
    }
  }

  Params p_{};
};

}  // namespace mjp

template <>
struct std::hash<mjp::LvState> {
  std::size_t operator()(const mjp::LvState& s) const noexcept {
    return std::hash<std::int64_t>{}(s.prey) * 1000003u ^ std::hash<std::int64_t>{}(s.predator);
  }
};
