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
#include <concepts>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mjp/error.hpp"
#include "mjp/random.hpp"

namespace mjp {

// Transition-rate accessor of a homogeneous Markov jump process.
//
// rate(s, s') is never queried with s' == s. exit_rate(s) is the sum of the
// off-diagonal rates of row s, and for_each_target(s, f) calls f(s', rate)
// for every s' with positive rate, in a fixed order.
template <class M>
concept RateModel = requires(const M& m, const typename M::state_type& s) {
  typename M::state_type;
  { m.rate(s, s) } -> std::convertible_to<double>;
  { m.exit_rate(s) } -> std::convertible_to<double>;
  m.for_each_target(s, [](const typename M::state_type&, double) {});
};

// Models that can draw the next state in O(1) instead of scanning targets.
template <class M>
concept DirectTargetSampler = requires(const M& m, const typename M::state_type& s, RandomStream& rng) {
  { m.sample_target(s, rng) } -> std::same_as<typename M::state_type>;
};

// Finite state spaces {0, ..., num_states() - 1}.
template <class M>
concept FiniteRateModel = RateModel<M> && std::same_as<typename M::state_type, int> &&
                          requires(const M& m) {
                            { m.num_states() } -> std::convertible_to<std::size_t>;
                          };

template <RateModel M>
std::vector<typename M::state_type> targets(const M& model, const typename M::state_type& s) {
  std::vector<typename M::state_type> out;
  model.for_each_target(s, [&](const typename M::state_type& t, double) { out.push_back(t); });
  return out;
}

// Draws s' with probability rate(s, s') / exit_rate(s). exit_rate(s) must be positive.
template <RateModel M>
typename M::state_type sample_target(const M& model, const typename M::state_type& s, RandomStream& rng) {
  if constexpr (DirectTargetSampler<M>) {
    return model.sample_target(s, rng);
  } else {
    double u = rng.uniform() * model.exit_rate(s);
    typename M::state_type chosen = s;
    bool done = false;
    model.for_each_target(s, [&](const typename M::state_type& t, double r) {
      if (done) return;
      chosen = t;
      u -= r;
      if (u <= 0.0) done = true;
    });
    return chosen;
  }
}

// Walker/Vose alias table for O(1) categorical draws.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> weights) {
    const std::size_t n = weights.size();
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (n == 0 || !(total > 0.0)) {
      prob_.clear();
      return;
    }
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      std::size_t s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = 1.0;
  }

  bool empty() const { return prob_.empty(); }

  std::size_t sample(RandomStream& rng) const {
    std::size_t i = rng.uniform_index(prob_.size());
    return rng.uniform() < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

// Rate table on a finite state space. Conditional intensity matrices of
// CTBN nodes are held through this interface so that dense tables and
// rule-based rows can be mixed within one network.
class FiniteRates {
 public:
  using state_type = int;

  virtual ~FiniteRates() = default;

  virtual std::size_t num_states() const = 0;
  virtual double rate(int from, int to) const = 0;
  virtual double exit_rate(int s) const = 0;
  virtual int sample_target(int s, RandomStream& rng) const = 0;
  virtual nlohmann::json to_json() const = 0;

  double max_exit_rate() const {
    double m = 0.0;
    for (std::size_t s = 0; s < num_states(); ++s) m = std::max(m, exit_rate(static_cast<int>(s)));
    return m;
  }

  template <class F>
  void for_each_target(int s, F&& f) const {
    const int n = static_cast<int>(num_states());
    for (int t = 0; t < n; ++t) {
      if (t == s) continue;
      double r = rate(s, t);
      if (r > 0.0) f(t, r);
    }
  }
};

// Dense intensity matrix. Diagonal entries are ignored; exit rates and
// per-row alias tables are computed once.
class DenseRates final : public FiniteRates {
 public:
  explicit DenseRates(std::vector<std::vector<double>> matrix) : n_(matrix.size()) {
    if (n_ == 0) throw ModelError("rate matrix has no states");
    table_.assign(n_ * n_, 0.0);
    exit_.assign(n_, 0.0);
    rows_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      if (matrix[i].size() != n_) throw ModelError("rate matrix is not square");
      for (std::size_t j = 0; j < n_; ++j) {
        if (i == j) continue;
        double r = matrix[i][j];
        if (!std::isfinite(r) || r < 0.0)
          throw ModelError("rate(" + std::to_string(i) + ", " + std::to_string(j) + ") must be finite and >= 0");
        table_[i * n_ + j] = r;
        exit_[i] += r;
      }
      std::vector<double> row(table_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                              table_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_));
      rows_[i] = AliasTable(row);
    }
  }

  std::size_t num_states() const override { return n_; }
  double rate(int from, int to) const override { return table_[static_cast<std::size_t>(from) * n_ + to]; }
  double exit_rate(int s) const override { return exit_[static_cast<std::size_t>(s)]; }
  int sample_target(int s, RandomStream& rng) const override {
    return static_cast<int>(rows_[static_cast<std::size_t>(s)].sample(rng));
  }

  nlohmann::json to_json() const override {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < n_; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < n_; ++j) row.push_back(i == j ? 0.0 : table_[i * n_ + j]);
      rows.push_back(row);
    }
    return rows;
  }

 private:
  std::size_t n_;
  std::vector<double> table_;
  std::vector<double> exit_;
  std::vector<AliasTable> rows_;
};

namespace detail {

// Uniform draw from {0..n-1} \ {a, b}, where a != b (or a == b, excluded once).
inline int uniform_excluding(int n, int a, int b, RandomStream& rng) {
  if (a > b) std::swap(a, b);
  const int excluded = (a == b) ? 1 : 2;
  int r = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - excluded)));
  if (r >= a) ++r;
  if (a != b && r >= b) ++r;
  return r;
}

}  // namespace detail

// Head node of the chain network: rate 1/2 to (x + 1) mod S and
// 1/(2(S - 2)) to every other state. For S = 2 the second branch is empty.
class ChainHeadRates final : public FiniteRates {
 public:
  explicit ChainHeadRates(int num_states) : n_(num_states) {
    if (n_ < 2) throw ModelError("chain node needs at least 2 states");
  }

  std::size_t num_states() const override { return static_cast<std::size_t>(n_); }
  double rate(int from, int to) const override {
    if (to == (from + 1) % n_) return 0.5;
    return n_ > 2 ? 1.0 / (2.0 * (n_ - 2)) : 0.0;
  }
  double exit_rate(int) const override { return n_ > 2 ? 1.0 : 0.5; }
  int sample_target(int s, RandomStream& rng) const override {
    const int preferred = (s + 1) % n_;
    if (n_ == 2 || rng.uniform() < 0.5) return preferred;
    return detail::uniform_excluding(n_, s, preferred, rng);
  }
  nlohmann::json to_json() const override { return {{"rule", "chain_head"}, {"states", n_}}; }

 private:
  int n_;
};

// Interior node of the chain network given the parent's current state p:
// if x == p every other state has rate 1/(S - 1); otherwise p has rate 1 and
// every remaining state 1/(S - 2).
class ChainFollowerRates final : public FiniteRates {
 public:
  ChainFollowerRates(int num_states, int parent_state) : n_(num_states), parent_(parent_state) {
    if (n_ < 2) throw ModelError("chain node needs at least 2 states");
    if (parent_ < 0 || parent_ >= n_) throw ModelError("chain parent state out of range");
  }

  std::size_t num_states() const override { return static_cast<std::size_t>(n_); }
  double rate(int from, int to) const override {
    if (from == parent_) return 1.0 / (n_ - 1);
    if (to == parent_) return 1.0;
    return n_ > 2 ? 1.0 / (n_ - 2) : 0.0;
  }
  double exit_rate(int s) const override {
    if (s == parent_) return 1.0;
    return n_ > 2 ? 2.0 : 1.0;
  }
  int sample_target(int s, RandomStream& rng) const override {
    if (s == parent_) return detail::uniform_excluding(n_, s, s, rng);
    if (n_ == 2 || rng.uniform() < 0.5) return parent_;
    return detail::uniform_excluding(n_, s, parent_, rng);
  }
  nlohmann::json to_json() const override {
    return {{"rule", "chain_follower"}, {"states", n_}, {"parent_state", parent_}};
  }

 private:
  int n_;
  int parent_;
};

}  // namespace mjp
