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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mjp/error.hpp"
#include "mjp/observation.hpp"
#include "mjp/random.hpp"
#include "mjp/rates.hpp"

namespace mjp {

// N weighted particle paths over steps 0..n with their genealogy.
template <class State>
struct ParticleSystem {
  std::size_t particles = 0;
  std::size_t rows = 0;  // n + 1
  std::vector<State> states;
  std::vector<double> logw;
  // ancestors[k * N + i]: index at step k - 1 of the parent of particle i at step k.
  std::vector<std::uint32_t> ancestors;
  std::optional<std::size_t> reference_slot;

  ParticleSystem() = default;
  ParticleSystem(std::size_t n_particles, std::size_t n_rows)
      : particles(n_particles),
        rows(n_rows),
        states(n_particles * n_rows),
        logw(n_particles * n_rows, kNegInf),
        ancestors(n_particles * n_rows, 0) {}

  State& state(std::size_t k, std::size_t i) { return states[k * particles + i]; }
  const State& state(std::size_t k, std::size_t i) const { return states[k * particles + i]; }
  double& log_weight(std::size_t k, std::size_t i) { return logw[k * particles + i]; }
  double log_weight(std::size_t k, std::size_t i) const { return logw[k * particles + i]; }
  std::span<const double> log_weights(std::size_t k) const { return {logw.data() + k * particles, particles}; }
  std::uint32_t& ancestor(std::size_t k, std::size_t i) { return ancestors[k * particles + i]; }

  // Path s_0..s_n of the particle in slot i at the last step.
  std::vector<State> trace(std::size_t i) const {
    std::vector<State> path(rows);
    for (std::size_t k = rows; k-- > 0;) {
      path[k] = state(k, i);
      if (k > 0) i = ancestors[k * particles + i];
    }
    return path;
  }
};

// Counters exposed to the diagnostics: how often the reference path took a
// new ancestor, and the average effective particle count of the weights.
struct PgasDiagnostics {
  std::size_t steps = 0;
  std::size_t ancestor_switches = 0;
  double weight_ess_sum = 0.0;

  double ancestor_switch_rate() const { return steps ? static_cast<double>(ancestor_switches) / steps : 0.0; }
  double mean_weight_ess() const { return steps ? weight_ess_sum / static_cast<double>(steps) : 0.0; }
};

namespace detail {

// Normalized linear weights w_i = exp(logw_i - max); returns the sum.
inline double linear_weights(std::span<const double> logw, std::vector<double>& out) {
  double m = kNegInf;
  for (double v : logw) m = std::max(m, v);
  out.resize(logw.size());
  if (m == kNegInf) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) total += (out[i] = std::exp(logw[i] - m));
  return total;
}

// Multinomial draws by walking sorted uniforms (generated from exponential
// spacings) through the cumulative weights: O(N + count).
inline void multinomial_from_linear(std::span<const double> w, double total, std::size_t count, RandomStream& rng,
                                    std::span<std::uint32_t> out) {
  double e_total = 0.0;
  std::vector<double> spacing(count + 1);
  for (double& e : spacing) e_total += (e = -std::log(rng.uniform()));
  double target = 0.0, cum = 0.0;
  std::size_t i = 0;
  std::size_t last_positive = 0;
  for (std::size_t d = 0; d < count; ++d) {
    target += spacing[d] / e_total * total;
    while (i < w.size() && cum + w[i] < target) {
      if (w[i] > 0.0) last_positive = i;
      cum += w[i];
      ++i;
    }
    if (i >= w.size()) {
      out[d] = static_cast<std::uint32_t>(last_positive);
    } else {
      if (w[i] > 0.0) last_positive = i;
      out[d] = static_cast<std::uint32_t>(w[i] > 0.0 ? i : last_positive);
    }
  }
}

template <class State>
double initial_log_weight(const InitialDistribution<State>& nu, const std::optional<InitialDistribution<State>>& r0,
                          const State& s) {
  if (!r0) return 0.0;
  return nu.log_prob(s) - r0->log_prob(s);
}

}  // namespace detail

// count i.i.d. indices with P(i) ∝ exp(logw[i]).
inline std::vector<std::uint32_t> multinomial_resample(std::span<const double> logw, std::size_t count,
                                                       RandomStream& rng) {
  std::vector<double> w;
  const double total = detail::linear_weights(logw, w);
  if (!(total > 0.0)) throw SamplingError("weight collapse: every log-weight is -inf");
  std::vector<std::uint32_t> out(count);
  detail::multinomial_from_linear(w, total, count, rng, out);
  // The walk returns sorted indices; shuffle so draws are exchangeable.
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

template <class State>
struct SmcResult {
  ParticleSystem<State> system;
  double log_z = 0.0;
};

// Bootstrap particle filter over the skeleton HMM with the prior kernels as
// proposals, so the incremental weights are the potentials g_k.
template <RateModel M>
SmcResult<typename M::state_type> smc_run(const HmmFactors<M>& f, std::size_t n_particles, RandomStream& rng) {
  using State = typename M::state_type;
  if (n_particles < 1) throw ConfigError("SMC needs at least one particle");
  const std::size_t n = f.steps(), N = n_particles;
  SmcResult<State> res{ParticleSystem<State>(N, n + 1), 0.0};
  auto& ps = res.system;
  const auto& r0 = f.proposal ? *f.proposal : f.initial;
  for (std::size_t i = 0; i < N; ++i) {
    ps.state(0, i) = r0.sample(rng);
    ps.log_weight(0, i) = f.log_potential(0, ps.state(0, i)) + detail::initial_log_weight(f.initial, f.proposal, ps.state(0, i));
  }
  std::vector<double> w;
  std::vector<std::uint32_t> anc(N);
  for (std::size_t k = 0;; ++k) {
    const double total = detail::linear_weights(ps.log_weights(k), w);
    if (!(total > 0.0)) throw SamplingError("weight collapse at step " + std::to_string(k));
    double m = kNegInf;
    for (double v : ps.log_weights(k)) m = std::max(m, v);
    res.log_z += m + std::log(total / static_cast<double>(N));
    if (k == n) break;
    detail::multinomial_from_linear(w, total, N, rng, anc);
    for (std::size_t i = 0; i < N; ++i) {
      ps.ancestor(k + 1, i) = anc[i];
      ps.state(k + 1, i) = f.kernel(k + 1).sample(ps.state(k, anc[i]), rng);
      ps.log_weight(k + 1, i) = f.log_potential(k + 1, ps.state(k + 1, i));
    }
  }
  return res;
}

// Conditional SMC with ancestor sampling. Slot N - 1 carries the reference
// skeleton; the N - 1 free particles are resampled from the full weighted
// system and the reference picks a new ancestor i with probability
// ∝ w_{k-1}^i P_k(xi_{k-1}^i, s_k). The returned skeleton is drawn ∝ w_n. The
// kernel leaves the normalized HMM target invariant for N >= 2.
//
// With resample_every = K > 1, resampling and ancestor sampling happen only
// before steps 1, K + 1, 2K + 1, ...; in between every particle keeps its own
// lineage and accumulates its weights. The schedule depends on the grid
// alone, so this is the same sampler on the HMM with blocked states.
template <RateModel M>
std::vector<typename M::state_type> pgas_step(const HmmFactors<M>& f,
                                              std::span<const typename M::state_type> reference,
                                              std::size_t n_particles, RandomStream& rng,
                                              PgasDiagnostics* diag = nullptr, std::size_t resample_every = 1) {
  using State = typename M::state_type;
  if (n_particles < 2) throw ConfigError("particle Gibbs needs at least 2 particles");
  if (resample_every < 1) throw ConfigError("resampling interval must be at least 1");
  const std::size_t n = f.steps(), N = n_particles, ref = N - 1;
  if (reference.size() != n + 1) throw ModelError("reference skeleton does not match the grid");
  if (!(f.log_target(reference) > kNegInf)) throw ModelError("reference skeleton has zero target density");

  ParticleSystem<State> ps(N, n + 1);
  ps.reference_slot = ref;
  const auto& r0 = f.proposal ? *f.proposal : f.initial;
  for (std::size_t i = 0; i < ref; ++i) ps.state(0, i) = r0.sample(rng);
  ps.state(0, ref) = reference[0];
  for (std::size_t i = 0; i < N; ++i)
    ps.log_weight(0, i) =
        f.log_potential(0, ps.state(0, i)) + detail::initial_log_weight(f.initial, f.proposal, ps.state(0, i));

  std::vector<double> w, aw(N);
  std::vector<std::uint32_t> anc(ref);
  for (std::size_t k = 1; k <= n; ++k) {
    const auto& kernel = f.kernel(k);
    if ((k - 1) % resample_every != 0) {
      for (std::size_t i = 0; i < ref; ++i) {
        ps.ancestor(k, i) = static_cast<std::uint32_t>(i);
        ps.state(k, i) = kernel.sample(ps.state(k - 1, i), rng);
        ps.log_weight(k, i) = ps.log_weight(k - 1, i) + f.log_potential(k, ps.state(k, i));
      }
      ps.ancestor(k, ref) = static_cast<std::uint32_t>(ref);
      ps.state(k, ref) = reference[k];
      ps.log_weight(k, ref) = ps.log_weight(k - 1, ref) + f.log_potential(k, reference[k]);
      continue;
    }
    const double total = detail::linear_weights(ps.log_weights(k - 1), w);
    if (!(total > 0.0)) throw SamplingError("weight collapse at step " + std::to_string(k - 1));
    detail::multinomial_from_linear(w, total, ref, rng, anc);
    for (std::size_t i = 0; i < N; ++i) aw[i] = w[i] > 0.0 ? w[i] * kernel.prob(ps.state(k - 1, i), reference[k]) : 0.0;
    const auto j = static_cast<std::uint32_t>(sample_categorical(aw, rng));
    if (diag) {
      double sq = 0.0;
      for (double v : w) sq += v * v;
      diag->weight_ess_sum += total * total / sq;
      ++diag->steps;
      // The reference would otherwise descend from its own previous slot.
      if (j != ref) ++diag->ancestor_switches;
    }
    for (std::size_t i = 0; i < ref; ++i) {
      ps.ancestor(k, i) = anc[i];
      ps.state(k, i) = kernel.sample(ps.state(k - 1, anc[i]), rng);
      ps.log_weight(k, i) = f.log_potential(k, ps.state(k, i));
    }
    ps.ancestor(k, ref) = j;
    ps.state(k, ref) = reference[k];
    ps.log_weight(k, ref) = f.log_potential(k, reference[k]);
  }
  return ps.trace(sample_log_categorical(ps.log_weights(n), rng));
}

// Forward filtering, backward sampling: an exact draw from the normalized
// HMM target. Costs O(|X|^2) per grid step; finite state spaces only.
template <RateModel M>
std::vector<typename M::state_type> ffbs_sample(const HmmFactors<M>& f, RandomStream& rng) {
  if constexpr (!FiniteRateModel<M>) {
    throw UnsupportedModel("FFBS needs a finite state space; this model is rule-based and unbounded");
  } else {
    const std::size_t n = f.steps(), S = f.num_states;
    if (S == 0) throw UnsupportedModel("FFBS needs the number of states");
    std::vector<double> alpha((n + 1) * S, 0.0), lg(S), next(S);
    auto normalize_row = [&](std::size_t k) {
      double* row = alpha.data() + k * S;
      double total = 0.0;
      for (std::size_t s = 0; s < S; ++s) total += row[s];
      if (!(total > 0.0)) throw SamplingError("forward filter degenerate at step " + std::to_string(k));
      for (std::size_t s = 0; s < S; ++s) row[s] /= total;
    };
    auto potentials = [&](std::size_t k) {
      double m = kNegInf;
      for (std::size_t s = 0; s < S; ++s) m = std::max(m, lg[s] = f.log_potential(k, static_cast<int>(s)));
      if (m == kNegInf) throw SamplingError("forward filter degenerate at step " + std::to_string(k));
      for (std::size_t s = 0; s < S; ++s) lg[s] = std::exp(lg[s] - m);
    };

    potentials(0);
    for (std::size_t s = 0; s < S; ++s) alpha[s] = std::exp(f.initial.log_prob(static_cast<int>(s))) * lg[s];
    normalize_row(0);
    for (std::size_t k = 1; k <= n; ++k) {
      const auto& kernel = f.kernel(k);
      const auto& rates = kernel.rates();
      const double* prev = alpha.data() + (k - 1) * S;
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t s = 0; s < S; ++s) {
        const double a = prev[s];
        if (a == 0.0) continue;
        const int si = static_cast<int>(s);
        kernel.policy().check(rates, si);
        const double q = rates.exit_rate(si);
        const double r = kernel.policy().dominating_rate(q);
        if (!(r > 0.0)) {
          next[s] += a;
          continue;
        }
        next[s] += a * (1.0 - q / r);
        const double scale = a / r;
        rates.for_each_target(si, [&](int t, double rate) { next[static_cast<std::size_t>(t)] += scale * rate; });
      }
      potentials(k);
      double* row = alpha.data() + k * S;
      for (std::size_t s = 0; s < S; ++s) row[s] = next[s] * lg[s];
      normalize_row(k);
    }

    std::vector<int> skeleton(n + 1);
    skeleton[n] = static_cast<int>(sample_categorical(std::span<const double>(alpha.data() + n * S, S), rng));
    for (std::size_t k = n; k >= 1; --k) {
      const auto& kernel = f.kernel(k);
      const double* row = alpha.data() + (k - 1) * S;
      for (std::size_t s = 0; s < S; ++s)
        next[s] = row[s] > 0.0 ? row[s] * kernel.prob(static_cast<int>(s), skeleton[k]) : 0.0;
      skeleton[k - 1] = static_cast<int>(sample_categorical(next, rng));
    }
    return skeleton;
  }
}

}  // namespace mjp
