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
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mjp/ctbn.hpp"
#include "mjp/diagnostics.hpp"
#include "mjp/error.hpp"
#include "mjp/io.hpp"
#include "mjp/mcmc.hpp"
#include "mjp/presets.hpp"

namespace mjp::cli {

using nlohmann::json;

enum ExitCode { kOk = 0, kConfig = 2, kRuntime = 3, kValidation = 4 };

// Raised when recomputed outputs fail their own consistency checks.
class ValidationError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string method = "pgas";
  std::size_t particles = 0;
  std::size_t resample_every = 0;
  std::string virtual_policy;
  std::size_t iters = 0;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::size_t replications = 0;
  std::size_t threads = 1;
  std::size_t M = 3;
  int S = 10;
  double T = 5.0;
  double t_max = 0.0;
  std::size_t observations = 50;
  double obs_end = 0.0;
  std::string node_order = "fixed";
  bool timing = false;
  bool burnin_set = false;
  std::string model, evidence, stats, preset;
};

namespace detail {

inline std::string path_in(const Options& o, const std::string& name) {
  return (std::filesystem::path(o.out_dir) / name).string();
}

// Command-line overrides on top of a preset's defaults.
inline ChainConfig apply_overrides(ChainConfig c, const Options& o) {
  if (!o.method.empty()) {
    const std::size_t every = c.method.resample_every;
    c.method = Method::parse(o.method, o.particles ? o.particles : c.method.particles);
    c.method.resample_every = every;
  }
  if (c.method.kind == Method::Kind::pgas && c.method.particles < 2) c.method.particles = 10;
  if (o.particles && c.method.kind == Method::Kind::pgas) c.method.particles = o.particles;
  if (o.resample_every) c.method.resample_every = o.resample_every;
  if (!o.virtual_policy.empty()) c.policy = AugmentationPolicy::parse(o.virtual_policy);
  if (o.iters) c.iterations = o.iters;
  if (o.burnin_set) c.burn_in = o.burnin;
  c.thin = o.thin;
  c.seed = o.seed;
  if (o.node_order == "random") c.node_order = NodeOrder::random_permutation;
  else if (o.node_order != "fixed") throw ConfigError("node order must be fixed or random");
  c.validate();
  return c;
}

inline json config_json(const ChainConfig& c, const Options& o, std::size_t replications) {
  return {{"method", c.method.kind == Method::Kind::ffbs ? "ffbs" : "pgas"},
          {"particles", c.method.kind == Method::Kind::ffbs ? 0 : c.method.particles},
          {"resample_every", c.method.resample_every},
          {"policy", c.policy.to_string()},
          {"iterations", c.iterations},
          {"burn_in", c.burn_in},
          {"thin", c.thin},
          {"seed", c.seed},
          {"node_order", o.node_order},
          {"replications", replications},
          {"threads", o.threads}};
}

inline void append_ctbn_rows(std::string& csv, const CtbnModel& model, const CtbnPath& path, std::size_t rep,
                             std::size_t it, double ms) {
  for (std::size_t w = 0; w < model.size(); ++w) {
    const auto st = sufficient_stats(path.nodes[w], static_cast<std::size_t>(model.node(w).num_states));
    for (std::size_t s = 0; s < st.occupation.size(); ++s)
      io::append_csv(csv, {rep, it, w, static_cast<std::int64_t>(s), st.occupation[s], st.departures[s], ms});
  }
}

// Rule-based paths are summarized per population: time-averaged level and
// number of jumps that change it.
inline void append_lv_rows(std::string& csv, const Trajectory<LvState>& tr, std::size_t rep, std::size_t it,
                           double ms) {
  std::size_t dx = 0, dy = 0;
  LvState prev = tr.initial;
  for (const auto& j : tr.jumps) {
    dx += j.state.prey != prev.prey;
    dy += j.state.predator != prev.predator;
    prev = j.state;
  }
  const double mx = integrate_path(tr, [](const LvState& s) { return static_cast<double>(s.prey); }) / tr.t_max;
  const double my = integrate_path(tr, [](const LvState& s) { return static_cast<double>(s.predator); }) / tr.t_max;
  io::append_csv(csv, {rep, it, 0, -1, mx, dx, ms});
  io::append_csv(csv, {rep, it, 1, -1, my, dy, ms});
}

struct RepResult {
  std::string csv;
  ChainRun run;
  std::vector<double> grid_mean;  // per-replication grid summary
  std::vector<double> grid_lo, grid_hi;
  std::exception_ptr error;
};

// Runs body(r) for r in [0, n) on a pool of `threads` workers; results are
// indexed by replication so the merge order never depends on scheduling.
template <class Body>
std::vector<RepResult> run_replications(std::size_t n, std::size_t threads, Body&& body) {
  std::vector<RepResult> out(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < n;) {
      try {
        out[r] = body(r);
      } catch (...) {
        out[r].error = std::current_exception();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

inline json timing_json(const std::vector<RepResult>& reps, std::size_t burn_in) {
  std::vector<double> all, sweeps;
  for (const auto& r : reps) {
    all.insert(all.end(), r.run.iteration_ms.begin(), r.run.iteration_ms.end());
    for (std::size_t i = burn_in; i < r.run.iteration_ms.size(); ++i) sweeps.push_back(r.run.iteration_ms[i]);
  }
  if (all.empty()) return json::object();
  if (sweeps.empty()) sweeps = all;
  return {{"iteration_ms_p05", quantile(all, 0.05)},
          {"iteration_ms_p50", quantile(all, 0.5)},
          {"iteration_ms_p95", quantile(all, 0.95)},
          {"sweep_ms_median", median(sweeps)},
          {"total_ms", std::accumulate(all.begin(), all.end(), 0.0)}};
}

inline json run_json(const std::vector<RepResult>& reps) {
  json starts = json::array();
  std::size_t steps = 0, switches = 0;
  double ess_sum = 0.0;
  for (const auto& r : reps) {
    starts.push_back({{"start", r.run.start}, {"attempts", r.run.start_attempts}, {"recorded", r.run.recorded}});
    steps += r.run.pgas.steps;
    switches += r.run.pgas.ancestor_switches;
    ess_sum += r.run.pgas.weight_ess_sum;
  }
  json j{{"replications", starts}};
  if (steps) j["pgas"] = {{"ancestor_switch_rate", static_cast<double>(switches) / static_cast<double>(steps)},
                          {"mean_weight_ess", ess_sum / static_cast<double>(steps)}};
  return j;
}

inline void rethrow_first(const std::vector<RepResult>& reps) {
  for (const auto& r : reps)
    if (r.error) std::rethrow_exception(r.error);
}

inline std::string merge_csv(const std::vector<RepResult>& reps) {
  std::string csv = io::kStatsHeader;
  for (const auto& r : reps) csv += r.csv;
  return csv;
}

inline void finish(const Options& o, const std::vector<RepResult>& reps, const ChainConfig& cfg, json metadata,
                   json summary_extra) {
  const std::string csv = merge_csv(reps);
  std::filesystem::create_directories(o.out_dir);
  io::write_text(path_in(o, "stats.csv"), csv);
  metadata["run"] = run_json(reps);
  if (o.timing) {
    metadata["timing"] = timing_json(reps, cfg.burn_in);
    std::cout << "per-sweep median ms: " << metadata["timing"]["sweep_ms_median"].get<double>() << "\n";
  }
  io::write_text(path_in(o, "metadata.json"), io::canonical(metadata));
  rethrow_first(reps);
  std::vector<io::StatRow> rows;
  {
    const auto tmp = path_in(o, "stats.csv");
    rows = io::read_stats_csv(tmp);
  }
  json summary = io::summarize_stats(rows);
  for (auto& [k, v] : summary_extra.items()) summary[k] = v;
  io::write_text(path_in(o, "summary.json"), io::canonical(summary));
}

// Chains over a network on fixed evidence, one replication per substream.
inline std::vector<RepResult> run_ctbn(const CtbnModel& model, const CtbnEvidence& evidence, double t_max,
                                       const ChainConfig& cfg, const Options& o, std::size_t replications,
                                       std::span<const double> grid) {
  validate_ergodicity(model, cfg, &evidence);
  return run_replications(replications, o.threads, [&](std::size_t r) {
    RepResult res;
    RandomStream rng = RandomStream::derive(cfg.seed, r + 1);
    auto start = initial_ctbn_path(model, evidence, t_max, rng, &res.run);
    std::vector<double> acc(grid.size(), 0.0);
    res.run = run_chain(
        model, evidence, std::move(start), cfg, rng,
        [&](std::size_t it, const CtbnPath& p, double ms) {
          append_ctbn_rows(res.csv, model, p, r, it, o.timing ? ms : 0.0);
          for (std::size_t i = 0; i < grid.size(); ++i) acc[i] += p.nodes[0].state_at(grid[i]) == 1 ? 1.0 : 0.0;
        },
        res.run);
    for (auto& a : acc) a /= static_cast<double>(std::max<std::size_t>(res.run.recorded, 1));
    res.grid_mean = std::move(acc);
    return res;
  });
}

inline std::vector<RepResult> run_lv(const LotkaVolterraRates& model, const ConditionalProblem<LotkaVolterraRates>& problem,
                                     const ChainConfig& cfg, const Options& o, std::size_t replications,
                                     std::span<const double> grid) {
  validate_ergodicity(model, cfg.policy);
  if (cfg.method.kind == Method::Kind::ffbs)
    throw UnsupportedModel("FFBS needs a finite state space; the predator-prey model is unbounded");
  return run_replications(replications, o.threads, [&](std::size_t r) {
    RepResult res;
    RandomStream rng = RandomStream::derive(cfg.seed, r + 1);
    auto start = initial_trajectory(model, problem, rng, &res.run);
    std::vector<std::vector<double>> prey(grid.size());
    res.run = run_chain(
        problem, std::move(start), cfg, rng,
        [&](std::size_t it, const Trajectory<LvState>& tr, double ms) {
          append_lv_rows(res.csv, tr, r, it, o.timing ? ms : 0.0);
          for (std::size_t i = 0; i < grid.size(); ++i)
            prey[i].push_back(static_cast<double>(tr.state_at(grid[i]).prey));
        },
        res.run);
    for (const auto& v : prey) {
      res.grid_mean.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
      res.grid_lo.push_back(quantile(v, 0.05));
      res.grid_hi.push_back(quantile(v, 0.95));
    }
    return res;
  });
}

inline json grid_json(std::span<const double> grid, const std::vector<RepResult>& reps) {
  json per_rep = json::array();
  for (const auto& r : reps) {
    json e{{"mean", r.grid_mean}};
    if (!r.grid_lo.empty()) e["q05"] = r.grid_lo, e["q95"] = r.grid_hi;
    per_rep.push_back(std::move(e));
  }
  return {{"times", std::vector<double>(grid.begin(), grid.end())}, {"replications", per_rep}};
}

inline std::vector<double> even_grid(double t_max, std::size_t n) {
  std::vector<double> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(t_max * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return g;
}

inline bool is_lv(const json& model) { return model.value("type", std::string()) == "lotka_volterra"; }

inline int cmd_simulate(const Options& o) {
  const json mj = io::read_json(o.model);
  RandomStream rng(o.seed);
  json out;
  if (is_lv(mj)) {
    const auto spec = io::lv_from_json(mj);
    const double T = o.t_max > 0.0 ? o.t_max : spec.t_max;
    out = simulate_gillespie(LotkaVolterraRates(spec.params), InitialDistribution<LvState>::point_mass(spec.initial), T, rng);
  } else {
    const auto model = io::ctbn_from_json(mj);
    const double T = o.t_max > 0.0 ? o.t_max : mj.value("t_max", 1.0);
    out = io::to_json(simulate_ctbn(model, T, rng));
  }
  std::filesystem::create_directories(o.out_dir);
  io::write_text(path_in(o, "trajectory.json"), io::canonical(out));
  return kOk;
}

inline int cmd_infer(const Options& o) {
  const json mj = io::read_json(o.model);
  const json ej = io::read_json(o.evidence);
  ChainConfig base;
  base.method = Method::pgas(10);
  if (o.virtual_policy.empty()) throw ConfigError("infer needs --virtual");
  const auto cfg = apply_overrides(base, o);
  const std::size_t reps = o.replications ? o.replications : 1;
  json meta{{"command", "infer"}, {"model", o.model}, {"evidence", o.evidence}, {"config", config_json(cfg, o, reps)}};
  if (is_lv(mj)) {
    const auto spec = io::lv_from_json(mj);
    const LotkaVolterraRates model(spec.params);
    auto problem = make_problem(model, InitialDistribution<LvState>::point_mass(spec.initial), spec.t_max,
                                io::lv_evidence_from_json(ej));
    const auto grid = even_grid(spec.t_max, 60);
    const auto reps_out = run_lv(model, problem, cfg, o, reps, grid);
    finish(o, reps_out, cfg, meta, {{"grid", grid_json(grid, reps_out)}});
  } else {
    const auto model = io::ctbn_from_json(mj);
    const double T = mj.value("t_max", 1.0);
    const auto ev = io::ctbn_evidence_from_json(ej, model, T);
    const auto grid = even_grid(T, 10);
    const auto reps_out = run_ctbn(model, ev, T, cfg, o, reps, grid);
    finish(o, reps_out, cfg, meta, {{"grid", grid_json(grid, reps_out)}});
  }
  return kOk;
}

inline int cmd_experiment(const Options& o) {
  std::filesystem::create_directories(o.out_dir);
  json meta{{"command", "experiment"}, {"preset", o.preset}};
  if (o.preset == "toy" || o.preset == "chain") {
    CtbnPreset p = o.preset == "toy" ? preset_toy(o.seed) : preset_chain(o.M, o.S, o.T, o.seed);
    if (o.preset == "chain") meta["chain"] = {{"M", o.M}, {"S", o.S}, {"T", o.T}};
    const auto cfg = apply_overrides(p.config, o);
    const std::size_t reps = o.replications ? o.replications : p.replications;
    meta["config"] = config_json(cfg, o, reps);
    io::write_text(path_in(o, "model.json"), io::canonical(io::to_json(p.model, p.t_max)));
    io::write_text(path_in(o, "evidence.json"), io::canonical(io::to_json(p.evidence)));
    io::write_text(path_in(o, "truth.json"), io::canonical(io::to_json(p.truth)));
    const auto grid = even_grid(p.t_max, 10);
    const auto out = run_ctbn(p.model, p.evidence, p.t_max, cfg, o, reps, grid);
    finish(o, out, cfg, meta, {{"grid", grid_json(grid, out)}});
    return kOk;
  }
  if (o.preset == "lotka_volterra" || o.preset == "lotka-volterra") {
    LvOptions lo;
    if (o.t_max > 0.0) lo.t_max = o.t_max;
    lo.obs_end = o.obs_end > 0.0 ? o.obs_end : lo.t_max / 2.0;
    lo.observations = o.observations;
    const LvPreset p = preset_lotka_volterra(o.seed, lo);
    const auto cfg = apply_overrides(p.config, o);
    const std::size_t reps = o.replications ? o.replications : p.replications;
    meta["config"] = config_json(cfg, o, reps);
    meta["observations"] = {{"count", lo.observations}, {"window_end", lo.obs_end}};
    io::write_text(path_in(o, "model.json"), io::canonical(io::to_json(io::LvModelSpec{lo.params, lo.initial, lo.t_max})));
    io::write_text(path_in(o, "evidence.json"), io::canonical(io::to_json(p.problem.observations)));
    io::write_text(path_in(o, "truth.json"), io::canonical(json(p.truth)));
    const auto grid = even_grid(lo.t_max, 60);
    const auto out = run_lv(*p.model, p.problem, cfg, o, reps, grid);
    finish(o, out, cfg, meta, {{"grid", grid_json(grid, out)}});
    return kOk;
  }
  throw ConfigError("unknown preset '" + o.preset + "' (expected toy, chain or lotka_volterra)");
}

// Recomputes summary.json from a statistics table and checks that the
// occupation times of every (replication, iteration, node) add up to the
// same horizon.
inline int cmd_diag(const Options& o) {
  const auto rows = io::read_stats_csv(o.stats);
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> sums;
  for (const auto& r : rows) {
    if (r.occupation_time < 0.0) throw ValidationError("negative occupation time in " + o.stats);
    if (r.state >= 0) sums[{r.replication, r.iteration, r.node}] += r.occupation_time;
  }
  if (!sums.empty()) {
    const double ref = sums.begin()->second;
    for (const auto& [k, v] : sums)
      if (std::abs(v - ref) > 1e-9 * std::max(1.0, ref))
        throw ValidationError("occupation times of iteration " + std::to_string(std::get<1>(k)) +
                              " do not add up to the horizon");
  }
  std::filesystem::create_directories(o.out_dir);
  io::write_text(path_in(o, "summary.json"), io::canonical(io::summarize_stats(rows)));
  return kOk;
}

inline int report(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return code;
}

}  // namespace detail

inline int cli_main(int argc, char** argv) {
  CLI::App app{"Posterior sampling of Markov jump process trajectories"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--out-dir", o.out_dir, "Output directory");
  app.add_option("--method", o.method, "pgas or ffbs")->check(CLI::IsMember({"pgas", "ffbs"}));
  app.add_option("--particles", o.particles, "Particles for pgas (>= 2)");
  app.add_option("--resample-every", o.resample_every, "pgas: resample before every k-th grid step");
  app.add_option("--virtual", o.virtual_policy, "uniformization:L, homogeneous:THETA or proportional:C");
  app.add_option("--iters", o.iters, "MCMC iterations");
  auto* burn = app.add_option("--burnin", o.burnin, "Burn-in iterations");
  app.add_option("--thin", o.thin, "Keep every k-th post-burn-in sample");
  app.add_option("--replications", o.replications, "Independent chains");
  app.add_option("--threads", o.threads, "Worker threads for replications");
  app.add_option("--node-order", o.node_order, "fixed or random");
  app.add_flag("--timing", o.timing, "Record wall-clock times");

  auto* sim = app.add_subcommand("simulate", "Forward draw from a model file");
  sim->add_option("--model", o.model, "Model JSON")->required();
  sim->add_option("--t-max", o.t_max, "Override the horizon");
  auto* inf = app.add_subcommand("infer", "Run the sampler on a model and evidence");
  inf->add_option("--model", o.model, "Model JSON")->required();
  inf->add_option("--evidence", o.evidence, "Evidence JSON")->required();
  auto* exp = app.add_subcommand("experiment", "Run a preset experiment");
  exp->add_option("preset", o.preset, "toy, chain or lotka_volterra")->required();
  exp->add_option("--M", o.M, "Chain: number of nodes");
  exp->add_option("--S", o.S, "Chain: states per node");
  exp->add_option("--T", o.T, "Chain: horizon");
  exp->add_option("--t-max", o.t_max, "Predator-prey: horizon");
  exp->add_option("--obs-end", o.obs_end, "Predator-prey: end of the observation window");
  exp->add_option("--observations", o.observations, "Predator-prey: number of observations");
  auto* dg = app.add_subcommand("diag", "Recompute summaries from a statistics table");
  dg->add_option("--stats", o.stats, "Statistics CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return detail::report("config", e.what(), kConfig);
  }
  o.burnin_set = burn->count() > 0;

  try {
    if (o.threads == 0) throw ConfigError("--threads must be at least 1");
    if (*sim) return detail::cmd_simulate(o);
    if (*inf) return detail::cmd_infer(o);
    if (*exp) return detail::cmd_experiment(o);
    return detail::cmd_diag(o);
  } catch (const ValidationError& e) {
    return detail::report("validation", e.what(), kValidation);
  } catch (const ConfigError& e) {
    return detail::report("config", e.what(), kConfig);
  } catch (const Error& e) {
    return detail::report("runtime", e.what(), kRuntime);
  } catch (const std::exception& e) {
    return detail::report("runtime", e.what(), kRuntime);
  }
}

}  // namespace mjp::cli
