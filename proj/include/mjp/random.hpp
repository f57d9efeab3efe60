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
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mjp/error.hpp"

namespace mjp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A seeded Mersenne-Twister stream. Substreams are derived from
// (seed, index) through std::seed_seq so that replications, nodes and
// particles get reproducible, decorrelated generators.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;
  using result_type = engine_type::result_type;

  explicit RandomStream(std::uint64_t seed = 0) : seed_(seed), engine_(make_engine(seed, 0, 0)) {}

  static RandomStream derive(std::uint64_t seed, std::uint64_t index) {
    RandomStream r;
    r.seed_ = seed;
    r.engine_ = make_engine(seed, index, 1);
    return r;
  }

  RandomStream split(std::uint64_t index) const { return derive(seed_ ^ 0x9e3779b97f4a7c15ULL, index); }

  std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return engine_type::min(); }
  static constexpr result_type max() { return engine_type::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  static engine_type make_engine(std::uint64_t seed, std::uint64_t index, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), tag};
    return engine_type(seq);
  }

  std::uint64_t seed_ = 0;
  engine_type engine_;
};

inline double log_sum_exp(std::span<const double> x) {
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  if (m == std::numeric_limits<double>::infinity()) return m;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

// Draws one index with probability proportional to exp(logw[i]).
inline std::size_t sample_log_categorical(std::span<const double> logw, RandomStream& rng) {
  double m = kNegInf;
  for (double v : logw) m = std::max(m, v);
  if (m == kNegInf) throw SamplingError("all log-weights are -inf");
  double total = 0.0;
  for (double v : logw) total += std::exp(v - m);
  double u = rng.uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    double w = std::exp(logw[i] - m);
    if (w > 0.0) last_positive = i;
    u -= w;
    if (u <= 0.0 && w > 0.0) return i;
  }
  return last_positive;
}

// Draws one index with probability proportional to w[i] >= 0.
inline std::size_t sample_categorical(std::span<const double> w, RandomStream& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw SamplingError("categorical weights sum to zero");
  double u = rng.uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) last_positive = i;
    u -= w[i];
    if (u <= 0.0 && w[i] > 0.0) return i;
  }
  return last_positive;
}

}  // namespace mjp
