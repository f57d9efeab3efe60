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
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "mjp/error.hpp"
#include "mjp/initial.hpp"
#include "mjp/observation.hpp"
#include "mjp/rates.hpp"
#include "mjp/trajectory.hpp"

namespace mjp {

// Occupation time and number of departures per state of one path.
struct SuffStats {
  std::vector<double> occupation;
  std::vector<std::size_t> departures;

  std::size_t jump_count() const { return std::accumulate(departures.begin(), departures.end(), std::size_t{0}); }
};

inline SuffStats sufficient_stats(const Trajectory<int>& traj, std::size_t num_states) {
  SuffStats st{std::vector<double>(num_states, 0.0), std::vector<std::size_t>(num_states, 0)};
  auto at = [&](int s) -> std::size_t {
    if (s < 0 || static_cast<std::size_t>(s) >= num_states)
      throw ModelError("state " + std::to_string(s) + " outside 0.." + std::to_string(num_states - 1));
    return static_cast<std::size_t>(s);
  };
  int s = traj.initial;
  double prev = 0.0;
  for (const auto& j : traj.jumps) {
    st.occupation[at(s)] += j.time - prev;
    ++st.departures[at(s)];
    prev = j.time;
    s = j.state;
  }
  st.occupation[at(s)] += traj.t_max - prev;
  return st;
}

// Time integral of f(X(t)) over [0, t_max].
template <class State, class F>
double integrate_path(const Trajectory<State>& traj, F&& f) {
  double acc = 0.0, prev = 0.0;
  const State* s = &traj.initial;
  for (const auto& j : traj.jumps) {
    acc += f(*s) * (j.time - prev);
    prev = j.time;
    s = &j.state;
  }
  return acc + f(*s) * (traj.t_max - prev);
}

struct EssResult {
  double value = 0.0;
  bool constant = false;
};

// Effective sample size with Geyer's initial positive sequence: pairs of
// autocorrelations are summed while their sum stays positive.
inline EssResult ess(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 10) throw ConfigError("ESS needs at least 10 values");
  for (double v : x)
    if (!std::isfinite(v)) throw ConfigError("ESS needs finite values");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - mean) * (x[i + lag] - mean);
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 1e-300 * (1.0 + mean * mean))) return {static_cast<double>(n), true};
  double tau = -1.0;  // 1 + 2 sum rho_k = -1 + 2 sum of pair sums from lag 0
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (!(pair > 0.0)) break;
    tau += 2.0 * pair;
  }
  const double e = static_cast<double>(n) / std::max(tau, 1.0 / static_cast<double>(n));
  return {std::min(e, static_cast<double>(n)), false};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct GridSummary {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> sd;
};

// Mean and (population) standard deviation of value(X(t)) across samples.
template <class State, class F>
GridSummary grid_summary(std::span<const Trajectory<State>> samples, std::span<const double> grid, F&& value) {
  GridSummary g{{grid.begin(), grid.end()}, std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
  if (samples.empty()) return g;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double m = 0.0, m2 = 0.0;
    std::size_t c = 0;
    for (const auto& tr : samples) {
      if (tr.t_max != samples.front().t_max) throw ModelError("samples disagree on t_max");
      const double v = value(tr.state_at(grid[i]));
      ++c;
      const double d = v - m;
      m += d / static_cast<double>(c);
      m2 += d * (v - m);
    }
    g.mean[i] = m;
    g.sd[i] = std::sqrt(std::max(0.0, m2 / static_cast<double>(c)));
  }
  return g;
}

template <class State>
GridSummary grid_summary(std::span<const Trajectory<State>> samples, std::span<const double> grid) {
  return grid_summary(samples, grid, [](const State& s) { return static_cast<double>(s); });
}

// Across-replication standard deviation of the running posterior-mean
// estimate after each budget k: series[r][i] is the statistic of replication r
// at its i-th recorded iteration.
inline std::vector<double> running_mean_sd(const std::vector<std::vector<double>>& series,
                                           std::span<const std::size_t> budgets) {
  std::vector<double> out;
  for (std::size_t k : budgets) {
    std::vector<double> est;
    for (const auto& s : series) {
      if (k == 0 || k > s.size()) throw ConfigError("budget exceeds the recorded chain length");
      est.push_back(std::accumulate(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
                    static_cast<double>(k));
    }
    const double m = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
    double v = 0.0;
    for (double e : est) v += (e - m) * (e - m);
    out.push_back(est.size() > 1 ? std::sqrt(v / static_cast<double>(est.size() - 1)) : 0.0);
  }
  return out;
}

// Normalized probabilities of every skeleton s_0..s_n, indexed by the
// mixed-radix code with s_0 varying fastest.
struct SkeletonTable {
  std::size_t num_states = 0;
  std::size_t length = 0;
  std::vector<double> probs;

  std::size_t encode(std::span<const int> skeleton) const {
    std::size_t code = 0, mult = 1;
    for (int s : skeleton) {
      code += static_cast<std::size_t>(s) * mult;
      mult *= num_states;
    }
    return code;
  }

  std::vector<int> decode(std::size_t code) const {
    std::vector<int> s(length);
    for (auto& v : s) {
      v = static_cast<int>(code % num_states);
      code /= num_states;
    }
    return s;
  }

  // Marginal law of s_k.
  std::vector<double> marginal(std::size_t k) const {
    std::vector<double> m(num_states, 0.0);
    for (std::size_t c = 0; c < probs.size(); ++c) m[decode(c)[k]] += probs[c];
    return m;
  }
};

template <FiniteRateModel M>
SkeletonTable exact_skeleton_posterior(const HmmFactors<M>& f, std::size_t max_size = 1'000'000) {
  const std::size_t S = f.num_states, len = f.steps() + 1;
  if (S == 0) throw UnsupportedModel("enumeration needs a finite state space");
  double size = std::pow(static_cast<double>(S), static_cast<double>(len));
  if (size > static_cast<double>(max_size)) throw UnsupportedModel("too many skeletons to enumerate");
  SkeletonTable t{S, len, std::vector<double>(static_cast<std::size_t>(size), 0.0)};
  std::vector<double> logp(t.probs.size());
  for (std::size_t c = 0; c < logp.size(); ++c) {
    const auto sk = t.decode(c);
    logp[c] = f.log_target(sk);
  }
  const double z = log_sum_exp(logp);
  if (!(z > kNegInf)) throw SamplingError("every skeleton has zero probability");
  for (std::size_t c = 0; c < logp.size(); ++c) t.probs[c] = std::exp(logp[c] - z);
  return t;
}

// Smoothed marginals P(s_k | evidence) by the forward-backward recursions on
// the skeleton HMM.
template <FiniteRateModel M>
std::vector<std::vector<double>> skeleton_marginals(const HmmFactors<M>& f) {
  const std::size_t S = f.num_states, n = f.steps();
  if (S == 0) throw UnsupportedModel("forward-backward needs a finite state space");
  std::vector<std::vector<double>> alpha(n + 1, std::vector<double>(S)), beta(n + 1, std::vector<double>(S, 1.0));
  auto g = [&](std::size_t k, std::size_t s) { return std::exp(f.log_potential(k, static_cast<int>(s))); };
  auto norm = [](std::vector<double>& v) {
    const double z = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(z > 0.0)) throw SamplingError("forward-backward degenerate");
    for (auto& x : v) x /= z;
  };
  for (std::size_t s = 0; s < S; ++s) alpha[0][s] = std::exp(f.initial.log_prob(static_cast<int>(s))) * g(0, s);
  norm(alpha[0]);
  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t b = 0; b < S; ++b) {
      double acc = 0.0;
      for (std::size_t a = 0; a < S; ++a) acc += alpha[k - 1][a] * f.kernel(k).prob(static_cast<int>(a), static_cast<int>(b));
      alpha[k][b] = acc * g(k, b);
    }
    norm(alpha[k]);
  }
  for (std::size_t k = n; k >= 1; --k) {
    for (std::size_t a = 0; a < S; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < S; ++b)
        acc += f.kernel(k).prob(static_cast<int>(a), static_cast<int>(b)) * g(k, b) * beta[k][b];
      beta[k - 1][a] = acc;
    }
    norm(beta[k - 1]);
  }
  for (std::size_t k = 0; k <= n; ++k) {
    for (std::size_t s = 0; s < S; ++s) alpha[k][s] *= beta[k][s];
    norm(alpha[k]);
  }
  return alpha;
}

// Posterior expected occupation time per state, from the Euler-discretized
// chain with transition matrix I + hQ on the grid 0, h, ..., t_max and
// forward-backward smoothing. Each observation acts at the nearest grid point.
// Bias is O(h).
inline std::vector<double> discretized_smoother(const FiniteRates& q, const InitialDistribution<int>& nu,
                                                std::span<const PointObservation<int>> evidence, double t_max,
                                                double h) {
  const std::size_t S = q.num_states();
  const auto K = static_cast<std::size_t>(std::llround(t_max / h));
  if (K == 0) throw ConfigError("time step larger than the horizon");
  const double dt = t_max / static_cast<double>(K);
  std::vector<std::vector<double>> P(S, std::vector<double>(S, 0.0));
  for (std::size_t a = 0; a < S; ++a) {
    P[a][a] = 1.0 - dt * q.exit_rate(static_cast<int>(a));
    if (P[a][a] < 0.0) throw ConfigError("time step too large: negative transition probability");
    for (std::size_t b = 0; b < S; ++b)
      if (b != a) P[a][b] = dt * q.rate(static_cast<int>(a), static_cast<int>(b));
  }
  std::vector<std::vector<double>> like(K + 1, std::vector<double>(S, 1.0));
  for (const auto& o : evidence) {
    if (o.time < 0.0 || o.time > t_max) throw ModelError("observation outside [0, t_max]");
    const auto i = static_cast<std::size_t>(std::llround(o.time / dt));
    for (std::size_t s = 0; s < S; ++s) like[i][s] *= std::exp(o.loglik(static_cast<int>(s)));
  }
  auto norm = [](std::vector<double>& v) {
    const double z = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(z > 0.0)) throw SamplingError("discretized smoother degenerate");
    for (auto& x : v) x /= z;
  };
  std::vector<std::vector<double>> alpha(K + 1, std::vector<double>(S)), beta(K + 1, std::vector<double>(S, 1.0));
  for (std::size_t s = 0; s < S; ++s) alpha[0][s] = std::exp(nu.log_prob(static_cast<int>(s))) * like[0][s];
  norm(alpha[0]);
  for (std::size_t i = 1; i <= K; ++i) {
    for (std::size_t a = 0; a < S; ++a) {
      if (alpha[i - 1][a] == 0.0) continue;
      for (std::size_t b = 0; b < S; ++b) alpha[i][b] += alpha[i - 1][a] * P[a][b];
    }
    for (std::size_t b = 0; b < S; ++b) alpha[i][b] *= like[i][b];
    norm(alpha[i]);
  }
  for (std::size_t i = K; i >= 1; --i) {
    for (std::size_t a = 0; a < S; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < S; ++b) acc += P[a][b] * like[i][b] * beta[i][b];
      beta[i - 1][a] = acc;
    }
    norm(beta[i - 1]);
  }
  std::vector<double> occ(S, 0.0), m(S);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t s = 0; s < S; ++s) m[s] = alpha[i][s] * beta[i][s];
    norm(m);
    for (std::size_t s = 0; s < S; ++s) occ[s] += m[s] * dt;
  }
  return occ;
}

}  // namespace mjp
