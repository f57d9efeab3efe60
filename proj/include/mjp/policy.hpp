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
#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "mjp/error.hpp"
#include "mjp/random.hpp"
#include "mjp/rates.hpp"

namespace mjp {

// Choice of the dominating intensity R(s) used to add virtual jumps.
//
//   uniformization(lambda): R(s) = lambda
//   homogeneous(theta):     R(s) = Q(s) + theta
//   proportional(c):        R(s) = c * Q(s)
class AugmentationPolicy {
 public:
  enum class Kind { uniformization, homogeneous, proportional };

  // allow_boundary admits lambda == Q(s); such a grid has no virtual jumps
  // and is only useful for checking the thinning construction.
  static AugmentationPolicy uniformization(double lambda, bool allow_boundary = false) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("uniformization rate must be positive");
    return AugmentationPolicy(Kind::uniformization, lambda, allow_boundary);
  }

  static AugmentationPolicy homogeneous(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("virtual-jump rate theta must be positive");
    return AugmentationPolicy(Kind::homogeneous, theta, false);
  }

  static AugmentationPolicy proportional(double factor) {
    if (!(factor >= 1.0) || !std::isfinite(factor)) throw ConfigError("proportional factor must be >= 1");
    return AugmentationPolicy(Kind::proportional, factor, false);
  }

  // Parses "uniformization:20", "homogeneous:10" or "proportional:2".
  static AugmentationPolicy parse(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("virtual-jump policy must look like kind:value, got '" + text + "'");
    std::string kind = text.substr(0, colon);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("cannot parse policy value in '" + text + "'");
    }
    if (kind == "uniformization") return uniformization(value);
    if (kind == "homogeneous") return homogeneous(value);
    if (kind == "proportional") return proportional(value);
    throw ConfigError("unknown virtual-jump policy '" + kind + "'");
  }

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }
  bool allows_boundary() const { return allow_boundary_; }

  // Holding factors of the augmented density do not depend on the skeleton.
  bool constant_holding() const { return kind_ == Kind::uniformization; }

  double dominating_rate(double exit) const {
    switch (kind_) {
      case Kind::uniformization: return param_;
      case Kind::homogeneous: return exit + param_;
      default: return param_ * exit;
    }
  }

  double virtual_rate(double exit) const {
    switch (kind_) {
      case Kind::uniformization: return param_ - exit;
      case Kind::homogeneous: return param_;
      default: return (param_ - 1.0) * exit;
    }
  }

  template <RateModel M>
  void check(const M& model, const typename M::state_type& s) const {
    if (kind_ != Kind::uniformization) return;
    const double q = model.exit_rate(s);
    if (param_ < q || (param_ == q && !allow_boundary_ && q > 0.0))
      throw PolicyViolation("uniformization rate " + std::to_string(param_) + " does not dominate exit rate " +
                            std::to_string(q) + " of state " + describe_state(s));
  }

  std::string to_string() const {
    const char* name = kind_ == Kind::uniformization ? "uniformization"
                       : kind_ == Kind::homogeneous  ? "homogeneous"
                                                     : "proportional";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, param_);
    return std::string(name) + ":" + std::string(buf, res.ptr);
  }

  friend bool operator==(const AugmentationPolicy&, const AugmentationPolicy&) = default;

 private:
  AugmentationPolicy(Kind k, double p, bool b) : kind_(k), param_(p), allow_boundary_(b) {}

  Kind kind_;
  double param_;
  bool allow_boundary_;
};

// Transition kernel of the redundant skeleton:
//   P(s, s') = Q(s, s') / R(s)  for s' != s,   P(s, s) = 1 - Q(s) / R(s).
template <RateModel M>
class SkeletonKernel {
 public:
  using State = typename M::state_type;

  SkeletonKernel(const M& rates, AugmentationPolicy policy) : rates_(&rates), policy_(policy) {}

  const M& rates() const { return *rates_; }
  const AugmentationPolicy& policy() const { return policy_; }

  double stay_probability(const State& s) const {
    policy_.check(*rates_, s);
    const double q = rates_->exit_rate(s);
    const double r = policy_.dominating_rate(q);
    return r > 0.0 ? 1.0 - q / r : 1.0;
  }

  double prob(const State& from, const State& to) const {
    if (from == to) return stay_probability(from);
    policy_.check(*rates_, from);
    const double r = policy_.dominating_rate(rates_->exit_rate(from));
    return r > 0.0 ? rates_->rate(from, to) / r : 0.0;
  }

  double log_prob(const State& from, const State& to) const {
    const double p = prob(from, to);
    return p > 0.0 ? std::log(p) : kNegInf;
  }

  State sample(const State& s, RandomStream& rng) const {
    policy_.check(*rates_, s);
    const double q = rates_->exit_rate(s);
    const double r = policy_.dominating_rate(q);
    if (!(q > 0.0) || rng.uniform() * r >= q) return s;
    return sample_target(*rates_, s, rng);
  }

 private:
  const M* rates_;
  AugmentationPolicy policy_;
};

template <RateModel M>
SkeletonKernel<M> build_kernel(const M& rates, const AugmentationPolicy& policy) {
  return SkeletonKernel<M>(rates, policy);
}

// Piecewise-homogeneous rates: models[j] is in force on [starts[j], starts[j+1])
// (the last segment ends at t_max). A plain MJP is the one-segment case; a
// CTBN node given its parents' paths is the general case.
template <RateModel M>
struct RateSchedule {
  std::vector<double> starts;
  std::vector<const M*> models;
  double t_max = 1.0;

  static RateSchedule homogeneous(const M& model, double t_max) { return RateSchedule{{0.0}, {&model}, t_max}; }

  std::size_t size() const { return models.size(); }

  double end(std::size_t j) const { return j + 1 < starts.size() ? starts[j + 1] : t_max; }

  std::size_t segment_at(double t) const {
    auto it = std::upper_bound(starts.begin(), starts.end(), t);
    return it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin()) - 1;
  }

  const M& at(double t) const { return *models[segment_at(t)]; }
};

}  // namespace mjp
