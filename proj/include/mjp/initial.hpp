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
#include <numeric>
#include <string>
#include <vector>

#include "mjp/error.hpp"
#include "mjp/random.hpp"

namespace mjp {

// Initial law nu of the process: either a point mass or a categorical
// distribution over an explicit support.
template <class State>
class InitialDistribution {
 public:
  InitialDistribution() = default;

  static InitialDistribution point_mass(State s) {
    InitialDistribution d;
    d.support_ = {std::move(s)};
    d.probs_ = {1.0};
    d.finish();
    return d;
  }

  static InitialDistribution categorical(std::vector<State> support, std::vector<double> probs) {
    if (support.empty() || support.size() != probs.size())
      throw ModelError("initial distribution: support and probabilities must be non-empty and aligned");
    InitialDistribution d;
    d.support_ = std::move(support);
    d.probs_ = std::move(probs);
    d.finish();
    return d;
  }

  // Categorical over {0, ..., probs.size() - 1}.
  static InitialDistribution indexed(std::vector<double> probs)
    requires std::same_as<State, int>
  {
    std::vector<int> support(probs.size());
    std::iota(support.begin(), support.end(), 0);
    InitialDistribution d = categorical(std::move(support), std::move(probs));
    d.indexed_ = true;
    return d;
  }

  static InitialDistribution uniform(int num_states)
    requires std::same_as<State, int>
  {
    return indexed(std::vector<double>(static_cast<std::size_t>(num_states), 1.0 / num_states));
  }

  bool is_point_mass() const { return support_.size() == 1; }
  const std::vector<State>& support() const { return support_; }
  const std::vector<double>& probabilities() const { return probs_; }

  double log_prob(const State& s) const {
    if constexpr (std::same_as<State, int>) {
      if (indexed_) {
        if (s < 0 || static_cast<std::size_t>(s) >= log_probs_.size()) return kNegInf;
        return log_probs_[static_cast<std::size_t>(s)];
      }
    }
    for (std::size_t i = 0; i < support_.size(); ++i)
      if (support_[i] == s) return log_probs_[i];
    return kNegInf;
  }

  const State& sample(RandomStream& rng) const {
    if (support_.size() == 1) return support_[0];
    return support_[sample_categorical(probs_, rng)];
  }

 private:
  void finish() {
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError("initial probabilities must be finite and >= 0");
      total += p;
    }
    if (!(total > 0.0)) throw ModelError("initial probabilities sum to zero");
    log_probs_.resize(probs_.size());
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      probs_[i] /= total;
      log_probs_[i] = probs_[i] > 0.0 ? std::log(probs_[i]) : kNegInf;
    }
  }

  std::vector<State> support_;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
  bool indexed_ = false;
};

}  // namespace mjp
