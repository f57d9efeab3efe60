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

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "mjp/ctbn.hpp"
#include "mjp/diagnostics.hpp"
#include "mjp/error.hpp"
#include "mjp/initial.hpp"
#include "mjp/lotka_volterra.hpp"
#include "mjp/observation.hpp"
#include "mjp/rates.hpp"
#include "mjp/trajectory.hpp"

namespace mjp::io {

using nlohmann::json;

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Keys are sorted by nlohmann's std::map storage; doubles are written in
// shortest round-trip form.
inline std::string canonical(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

inline double parse_loglik_value(const json& v) {
  if (v.is_string() && v.get<std::string>() == "-inf") return kNegInf;
  return v.get<double>();
}

inline std::shared_ptr<const FiniteRates> rates_from_json(const json& j, int states) {
  if (j.is_array()) {
    auto m = j.get<std::vector<std::vector<double>>>();
    if (m.size() != static_cast<std::size_t>(states)) throw ConfigError("rate matrix size does not match the node");
    return std::make_shared<DenseRates>(std::move(m));
  }
  const auto rule = j.at("rule").get<std::string>();
  const int s = j.value("states", states);
  if (s != states) throw ConfigError("rule state count does not match the node");
  if (rule == "chain_head") return std::make_shared<ChainHeadRates>(s);
  if (rule == "chain_follower") return std::make_shared<ChainFollowerRates>(s, j.at("parent_state").get<int>());
  throw ConfigError("unknown rate rule '" + rule + "'");
}

inline InitialDistribution<int> initial_from_json(const json& j, int states) {
  if (j.is_null()) return InitialDistribution<int>::uniform(states);
  if (j.is_object() && j.contains("state")) {
    std::vector<double> p(static_cast<std::size_t>(states), 0.0);
    const int s = j.at("state").get<int>();
    if (s < 0 || s >= states) throw ConfigError("initial state out of range");
    p[static_cast<std::size_t>(s)] = 1.0;
    return InitialDistribution<int>::indexed(std::move(p));
  }
  auto p = j.get<std::vector<double>>();
  if (p.size() != static_cast<std::size_t>(states)) throw ConfigError("initial probabilities do not match the node");
  return InitialDistribution<int>::indexed(std::move(p));
}

// {"type": "ctbn", "t_max": T, "nodes": [{"name", "states", "parents", "cims", "initial"}]}
// or {"type": "mjp", "t_max": T, "rates": [[...]], "initial": [...]} for a single process.
inline CtbnModel ctbn_from_json(const json& j) {
  try {
    const auto type = j.value("type", std::string("ctbn"));
    if (type == "mjp") {
      const auto& r = j.at("rates");
      const int S = static_cast<int>(r.size());
      CtbnNode n{"X", S, {}, {rates_from_json(r, S)}, initial_from_json(j.value("initial", json()), S)};
      return CtbnModel({std::move(n)});
    }
    if (type != "ctbn") throw ConfigError("model type '" + type + "' is not a network");
    std::vector<CtbnNode> nodes;
    for (const auto& nj : j.at("nodes")) {
      CtbnNode n;
      n.num_states = nj.at("states").get<int>();
      n.name = nj.value("name", "X" + std::to_string(nodes.size() + 1));
      n.parents = nj.value("parents", std::vector<std::size_t>{});
      for (const auto& c : nj.at("cims")) n.cims.push_back(rates_from_json(c, n.num_states));
      n.initial = initial_from_json(nj.value("initial", json()), n.num_states);
      nodes.push_back(std::move(n));
    }
    return CtbnModel(std::move(nodes));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

inline json to_json(const CtbnModel& model, double t_max) {
  json nodes = json::array();
  for (const auto& n : model.nodes()) {
    json cims = json::array();
    for (const auto& c : n.cims) cims.push_back(c->to_json());
    nodes.push_back({{"name", n.name},
                     {"states", n.num_states},
                     {"parents", n.parents},
                     {"cims", cims},
                     {"initial", n.initial.probabilities()}});
  }
  return {{"type", "ctbn"}, {"t_max", t_max}, {"nodes", nodes}};
}

struct LvModelSpec {
  LotkaVolterraRates::Params params;
  LvState initial;
  double t_max = 0.0;
};

inline LvModelSpec lv_from_json(const json& j) {
  try {
    LvModelSpec m;
    const auto& p = j.at("params");
    m.params = {p.at("alpha").get<double>(), p.at("beta").get<double>(), p.at("gamma").get<double>(),
                p.at("delta").get<double>()};
    m.initial = j.at("initial").get<LvState>();
    m.t_max = j.at("t_max").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

inline json to_json(const LvModelSpec& m) {
  return {{"type", "lotka_volterra"},
          {"params",
           {{"alpha", m.params.alpha}, {"beta", m.params.beta}, {"gamma", m.params.gamma}, {"delta", m.params.delta}}},
          {"initial", m.initial},
          {"t_max", m.t_max}};
}

template <class State>
json observation_to_json(const PointObservation<State>& o, std::size_t node) {
  if (o.description.is_null()) throw ConfigError("observation has no serializable form");
  return {{"kind", "point"}, {"node", node}, {"time", o.time}, {"loglik", o.description}};
}

inline PointObservation<int> int_observation_from_json(const json& o) {
  const double t = o.at("time").get<double>();
  const auto& l = o.at("loglik");
  if (l.is_array()) {
    std::vector<double> table;
    for (const auto& v : l) table.push_back(parse_loglik_value(v));
    return observe_table(t, std::move(table));
  }
  if (l.at("rule").get<std::string>() == "point_mass") return observe_exactly(t, l.at("state").get<int>());
  throw ConfigError("unsupported observation rule for a finite node");
}

inline PointObservation<LvState> lv_observation_from_json(const json& o) {
  const double t = o.at("time").get<double>();
  const auto& l = o.at("loglik");
  const auto rule = l.at("rule").get<std::string>();
  if (rule == "lv_geometric") return observe_lv_geometric(t, l.at("observed").get<LvState>());
  if (rule == "point_mass") return observe_exactly(t, l.at("state").get<LvState>());
  throw ConfigError("unsupported observation rule '" + rule + "' for the predator-prey model");
}

// {"observations": [{"kind": "point", "node", "time", "loglik"} |
//                   {"kind": "child_process", "node", "path"}]}
inline CtbnEvidence ctbn_evidence_from_json(const json& j, const CtbnModel& model, double t_max) {
  CtbnEvidence ev(model.size());
  try {
    for (const auto& o : j.at("observations")) {
      const auto w = o.value("node", std::size_t{0});
      if (w >= model.size()) throw ConfigError("observation refers to node " + std::to_string(w) + " which does not exist");
      const auto kind = o.at("kind").get<std::string>();
      if (kind == "point") {
        auto obs = int_observation_from_json(o);
        if (obs.time < 0.0 || obs.time > t_max) throw ConfigError("observation time outside [0, t_max]");
        ev.points[w].push_back(std::move(obs));
      } else if (kind == "child_process") {
        auto tr = o.at("path").get<Trajectory<int>>();
        if (tr.t_max != t_max) throw ConfigError("observed path has the wrong horizon");
        ev.paths[w] = std::move(tr);
      } else {
        throw ConfigError("unknown observation kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("evidence: ") + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(std::string("evidence: ") + e.what());
  }
  return ev;
}

inline json to_json(const CtbnEvidence& ev) {
  json obs = json::array();
  for (std::size_t w = 0; w < ev.points.size(); ++w)
    for (const auto& o : ev.points[w]) obs.push_back(observation_to_json(o, w));
  for (std::size_t w = 0; w < ev.paths.size(); ++w)
    if (ev.paths[w]) obs.push_back({{"kind", "child_process"}, {"node", w}, {"path", *ev.paths[w]}});
  return {{"observations", obs}};
}

inline std::vector<PointObservation<LvState>> lv_evidence_from_json(const json& j) {
  std::vector<PointObservation<LvState>> out;
  try {
    for (const auto& o : j.at("observations")) {
      if (o.at("kind").get<std::string>() != "point") throw ConfigError("predator-prey evidence must be point observations");
      out.push_back(lv_observation_from_json(o));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("evidence: ") + e.what());
  }
  return out;
}

inline json to_json(const std::vector<PointObservation<LvState>>& obs) {
  json arr = json::array();
  for (const auto& o : obs) arr.push_back(observation_to_json(o, 0));
  return {{"observations", arr}};
}

inline json to_json(const CtbnPath& path) {
  json nodes = json::array();
  for (const auto& tr : path.nodes) nodes.push_back(tr);
  return {{"nodes", nodes}};
}

// One row of the statistics table.
struct StatRow {
  std::size_t replication = 0;
  std::size_t iteration = 0;
  std::size_t node = 0;
  // -1 for whole-path summaries of rule-based models.
  std::int64_t state = 0;
  double occupation_time = 0.0;
  std::size_t jump_count = 0;
  double wall_ms = 0.0;
};

inline const char* kStatsHeader = "replication,iteration,node,state,occupation_time,jump_count,wall_ms\n";

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void append_csv(std::string& out, const StatRow& r) {
  out += std::to_string(r.replication);
  out += ',';
  out += std::to_string(r.iteration);
  out += ',';
  out += std::to_string(r.node);
  out += ',';
  out += std::to_string(r.state);
  out += ',';
  out += format_double(r.occupation_time);
  out += ',';
  out += std::to_string(r.jump_count);
  out += ',';
  out += format_double(r.wall_ms);
  out += '\n';
}

inline std::vector<StatRow> read_stats_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line + "\n" != kStatsHeader) throw ConfigError(path + ": unexpected header");
  std::vector<StatRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    StatRow r;
    char c1, c2, c3, c4, c5, c6;
    if (!(ls >> r.replication >> c1 >> r.iteration >> c2 >> r.node >> c3 >> r.state >> c4 >> r.occupation_time >> c5 >>
          r.jump_count >> c6 >> r.wall_ms) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',' || c6 != ',')
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed row");
    rows.push_back(r);
  }
  return rows;
}

// Per-statistic ESS and posterior summaries over a statistics table. The
// whole-run ESS is the median over (node, state, statistic) of the ESS
// averaged across replications.
inline json summarize_stats(const std::vector<StatRow>& rows) {
  using Key = std::tuple<std::size_t, std::int64_t>;
  std::map<Key, std::map<std::size_t, std::vector<double>>> occ, jumps;
  std::map<std::size_t, std::map<std::size_t, double>> wall;  // replication -> iteration -> ms
  for (const auto& r : rows) {
    occ[{r.node, r.state}][r.replication].push_back(r.occupation_time);
    jumps[{r.node, r.state}][r.replication].push_back(static_cast<double>(r.jump_count));
    wall[r.replication][r.iteration] = r.wall_ms;
  }
  json stats = json::array();
  std::vector<double> all_ess;
  auto add = [&](const Key& key, const char* name, const std::map<std::size_t, std::vector<double>>& by_rep) {
    std::vector<double> means, esses;
    bool constant = true;
    for (const auto& [rep, series] : by_rep) {
      means.push_back(std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size()));
      if (series.size() >= 10) {
        const auto e = ess(series);
        esses.push_back(e.value);
        constant = constant && e.constant;
      }
    }
    const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
    double v = 0.0;
    for (double x : means) v += (x - m) * (x - m);
    json s{{"node", std::get<0>(key)},
           {"state", std::get<1>(key)},
           {"statistic", name},
           {"posterior_mean", m},
           {"replication_sd", means.size() > 1 ? std::sqrt(v / static_cast<double>(means.size() - 1)) : 0.0}};
    if (!esses.empty()) {
      const double e = std::accumulate(esses.begin(), esses.end(), 0.0) / static_cast<double>(esses.size());
      s["ess"] = e;
      s["constant"] = constant;
      all_ess.push_back(e);
    }
    stats.push_back(std::move(s));
  };
  for (const auto& [key, by_rep] : occ) {
    add(key, "occupation_time", by_rep);
    add(key, "jump_count", jumps.at(key));
  }
  json out{{"statistics", stats}, {"rows", rows.size()}, {"replications", wall.size()}};
  if (!all_ess.empty()) {
    const double med = median(all_ess);
    double total_ms = 0.0;
    for (const auto& [rep, its] : wall)
      for (const auto& [it, ms] : its) total_ms += ms;
    total_ms /= static_cast<double>(std::max<std::size_t>(wall.size(), 1));
    out["median_ess"] = med;
    out["time_to_ess_100_ms"] = med > 0.0 ? total_ms * 100.0 / med : 0.0;
  }
  return out;
}

}  // namespace mjp::io
