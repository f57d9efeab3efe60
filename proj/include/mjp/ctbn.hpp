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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mjp/density.hpp"
#include "mjp/error.hpp"
#include "mjp/initial.hpp"
#include "mjp/observation.hpp"
#include "mjp/policy.hpp"
#include "mjp/random.hpp"
#include "mjp/rates.hpp"
#include "mjp/simulate.hpp"
#include "mjp/trajectory.hpp"

namespace mjp {

struct CtbnNode {
  std::string name;
  int num_states = 2;
  std::vector<std::size_t> parents;
  // Conditional intensity matrices indexed by the mixed-radix code of the
  // parents' configuration (first parent varies fastest).
  std::vector<std::shared_ptr<const FiniteRates>> cims;
  // Factor of the product-form initial distribution.
  InitialDistribution<int> initial;
};

// Continuous-time Bayesian network over finite node state spaces. The graph
// may contain cycles.
class CtbnModel {
 public:
  CtbnModel() = default;

  explicit CtbnModel(std::vector<CtbnNode> nodes) : nodes_(std::move(nodes)) {
    const std::size_t M = nodes_.size();
    if (M == 0) throw ModelError("network has no nodes");
    children_.assign(M, {});
    strides_.resize(M);
    for (std::size_t w = 0; w < M; ++w) {
      auto& node = nodes_[w];
      if (node.num_states < 1) throw ModelError("node " + node.name + " has no states");
      std::size_t configs = 1;
      for (std::size_t p : node.parents) {
        if (p >= M || p == w) throw ModelError("node " + node.name + " has an invalid parent");
        strides_[w].push_back(configs);
        configs *= static_cast<std::size_t>(nodes_[p].num_states);
        children_[p].push_back(w);
      }
      if (node.cims.size() != configs)
        throw ModelError("node " + node.name + " needs " + std::to_string(configs) + " rate tables, got " +
                         std::to_string(node.cims.size()));
      for (const auto& c : node.cims)
        if (!c || c->num_states() != static_cast<std::size_t>(node.num_states))
          throw ModelError("rate table of node " + node.name + " has the wrong size");
      if (node.initial.support().empty()) node.initial = InitialDistribution<int>::uniform(node.num_states);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const CtbnNode& node(std::size_t w) const { return nodes_[w]; }
  const std::vector<CtbnNode>& nodes() const { return nodes_; }
  const std::vector<std::size_t>& parents(std::size_t w) const { return nodes_[w].parents; }
  const std::vector<std::size_t>& children(std::size_t w) const { return children_[w]; }

  // Weight of parent slot `slot` of node w in the configuration code.
  std::size_t stride(std::size_t w, std::size_t slot) const { return strides_[w][slot]; }

  std::size_t config_code(std::size_t w, std::span<const int> joint) const {
    std::size_t code = 0;
    for (std::size_t i = 0; i < nodes_[w].parents.size(); ++i)
      code += strides_[w][i] * static_cast<std::size_t>(joint[nodes_[w].parents[i]]);
    return code;
  }

  const FiniteRates& cim(std::size_t w, std::size_t code) const {
    if (code >= nodes_[w].cims.size())
      throw ModelError("parent configuration " + std::to_string(code) + " of node " + nodes_[w].name +
                       " has no rate table");
    return *nodes_[w].cims[code];
  }

  double log_initial(std::span<const int> joint) const {
    double lp = 0.0;
    for (std::size_t w = 0; w < nodes_.size(); ++w) lp += nodes_[w].initial.log_prob(joint[w]);
    return lp;
  }

 private:
  std::vector<CtbnNode> nodes_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> strides_;
};

// One trajectory per node on a common horizon. No two nodes jump at the
// same time.
struct CtbnPath {
  std::vector<Trajectory<int>> nodes;

  double t_max() const { return nodes.front().t_max; }

  std::vector<int> state_at(double t) const {
    std::vector<int> s(nodes.size());
    for (std::size_t w = 0; w < nodes.size(); ++w) s[w] = nodes[w].state_at(t);
    return s;
  }

  friend bool operator==(const CtbnPath&, const CtbnPath&) = default;
};

inline void validate(const CtbnPath& path, const CtbnModel& model) {
  if (path.nodes.size() != model.size()) throw ModelError("path has the wrong number of nodes");
  std::vector<double> times;
  for (std::size_t w = 0; w < path.nodes.size(); ++w) {
    const auto& tr = path.nodes[w];
    validate(tr);
    if (tr.t_max != path.t_max()) throw ModelError("node trajectories disagree on t_max");
    auto in_range = [&](int s) { return s >= 0 && s < model.node(w).num_states; };
    if (!in_range(tr.initial)) throw ModelError("state out of range at node " + model.node(w).name);
    for (const auto& j : tr.jumps) {
      if (!in_range(j.state)) throw ModelError("state out of range at node " + model.node(w).name);
      times.push_back(j.time);
    }
  }
  std::sort(times.begin(), times.end());
  if (std::adjacent_find(times.begin(), times.end()) != times.end())
    throw ModelError("two nodes jump at the same time");
}

// Piecewise-constant configuration code of node w's parents, optionally
// leaving out parent `skip` (its contribution is then 0).
struct ConfigSegments {
  std::vector<double> starts;
  std::vector<std::size_t> codes;
};

inline ConfigSegments config_segments(const CtbnModel& model, std::size_t w, const CtbnPath& path,
                                      std::size_t skip = static_cast<std::size_t>(-1)) {
  const auto& parents = model.parents(w);
  std::vector<int> joint(model.size(), 0);
  std::vector<std::size_t> cursor(parents.size(), 0);
  for (std::size_t i = 0; i < parents.size(); ++i) joint[parents[i]] = path.nodes[parents[i]].initial;
  auto code_now = [&] {
    std::size_t code = 0;
    for (std::size_t i = 0; i < parents.size(); ++i)
      if (parents[i] != skip) code += model.stride(w, i) * static_cast<std::size_t>(joint[parents[i]]);
    return code;
  };
  ConfigSegments seg{{0.0}, {code_now()}};
  for (;;) {
    double t = std::numeric_limits<double>::infinity();
    std::size_t which = parents.size();
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (parents[i] == skip) continue;
      const auto& jumps = path.nodes[parents[i]].jumps;
      if (cursor[i] < jumps.size() && jumps[cursor[i]].time < t) {
        t = jumps[cursor[i]].time;
        which = i;
      }
    }
    if (which == parents.size()) break;
    joint[parents[which]] = path.nodes[parents[which]].jumps[cursor[which]].state;
    ++cursor[which];
    seg.starts.push_back(t);
    seg.codes.push_back(code_now());
  }
  return seg;
}

// Rates of node w over time given its parents' paths.
inline RateSchedule<FiniteRates> parent_schedule(const CtbnModel& model, std::size_t w, const CtbnPath& path) {
  const auto seg = config_segments(model, w, path);
  RateSchedule<FiniteRates> sched;
  sched.starts = seg.starts;
  sched.t_max = path.t_max();
  for (std::size_t code : seg.codes) sched.models.push_back(&model.cim(w, code));
  return sched;
}

// Log-density of node w's path given its parents' paths, without the
// initial-state term. Within each parent segment the node is homogeneous with
// the segment's rate table: jump factors Q_w(c; s_{i-1}, s_i) and survival
// factors split at the segment boundaries.
inline double log_density_node_given_parents(const CtbnModel& model, std::size_t w, const CtbnPath& path) {
  const auto seg = config_segments(model, w, path);
  const auto& traj = path.nodes[w];
  const double t_max = traj.t_max;
  double lp = 0.0;
  int s = traj.initial;
  std::size_t i = 0;
  for (std::size_t j = 0; j < seg.starts.size(); ++j) {
    const double a = seg.starts[j];
    const double b = j + 1 < seg.starts.size() ? seg.starts[j + 1] : t_max;
    const FiniteRates& cim = model.cim(w, seg.codes[j]);
    if (i < traj.jumps.size() && traj.jumps[i].time == a && a > 0.0)
      throw ModelError("node " + model.node(w).name + " jumps together with one of its parents");
    double prev = a;
    for (; i < traj.jumps.size() && traj.jumps[i].time < b; ++i) {
      const auto& jp = traj.jumps[i];
      lp += detail::log_or_neg_inf(cim.rate(s, jp.state)) - cim.exit_rate(s) * (jp.time - prev);
      prev = jp.time;
      s = jp.state;
    }
    lp -= cim.exit_rate(s) * (b - prev);
  }
  return lp;
}

// log nu(X(0)) + sum over nodes of the node-given-parents log-density.
inline double log_density_ctbn(const CtbnModel& model, const CtbnPath& path) {
  double lp = model.log_initial(path.state_at(0.0));
  for (std::size_t w = 0; w < model.size() && lp > kNegInf; ++w) lp += log_density_node_given_parents(model, w, path);
  return lp;
}

// Point evidence per node, plus the paths of fully observed nodes. Observed
// nodes are held fixed by the sampler.
struct CtbnEvidence {
  std::vector<std::vector<PointObservation<int>>> points;
  std::vector<std::optional<Trajectory<int>>> paths;

  explicit CtbnEvidence(std::size_t nodes = 0) : points(nodes), paths(nodes) {}

  bool observed(std::size_t w) const { return w < paths.size() && paths[w].has_value(); }

  double log_likelihood(const CtbnPath& path) const {
    double ll = 0.0;
    for (std::size_t w = 0; w < points.size(); ++w)
      for (const auto& o : points[w]) ll += o.loglik(path.nodes[w].state_at(o.time));
    for (std::size_t w = 0; w < paths.size(); ++w)
      if (paths[w] && !(*paths[w] == path.nodes[w])) return kNegInf;
    return ll;
  }
};

// Full conditional of node w given every other node: the piecewise process
// under the parents' configurations, the node's point evidence, and one
// likelihood term per child (the child's path density as a function of w).
inline ConditionalProblem<FiniteRates> node_full_conditional(const CtbnModel& model, std::size_t w,
                                                             const CtbnPath& path, const CtbnEvidence& evidence) {
  ConditionalProblem<FiniteRates> p;
  p.schedule = parent_schedule(model, w, path);
  p.initial = model.node(w).initial;
  if (w < evidence.points.size()) p.observations = evidence.points[w];
  for (std::size_t u : model.children(w)) {
    const auto& parents = model.parents(u);
    std::size_t slot = std::find(parents.begin(), parents.end(), w) - parents.begin();
    auto seg = config_segments(model, u, path, w);
    ChildTerm term;
    term.path = path.nodes[u];
    term.base_starts = std::move(seg.starts);
    term.base_codes = std::move(seg.codes);
    term.stride = model.stride(u, slot);
    for (const auto& c : model.node(u).cims) term.cims.push_back(c.get());
    p.children.push_back(std::move(term));
  }
  return p;
}

// Forward simulation of the whole network on the product space.
inline CtbnPath simulate_ctbn(const CtbnModel& model, double t_max, RandomStream& rng,
                              std::size_t jump_cap = kDefaultJumpCap) {
  detail::check_horizon(t_max);
  const std::size_t M = model.size();
  CtbnPath path;
  std::vector<int> s(M);
  for (std::size_t w = 0; w < M; ++w) {
    s[w] = model.node(w).initial.sample(rng);
    path.nodes.push_back({s[w], {}, t_max});
  }
  std::vector<double> rates(M);
  double t = 0.0;
  std::size_t jumps = 0;
  for (;;) {
    double total = 0.0;
    for (std::size_t w = 0; w < M; ++w) total += (rates[w] = model.cim(w, model.config_code(w, s)).exit_rate(s[w]));
    if (!(total > 0.0)) break;
    t = detail::next_arrival(t, total, rng);
    if (t >= t_max) break;
    const std::size_t w = sample_categorical(rates, rng);
    s[w] = model.cim(w, model.config_code(w, s)).sample_target(s[w], rng);
    path.nodes[w].jumps.push_back({t, s[w]});
    if (++jumps > jump_cap) detail::jump_cap_exceeded(jump_cap);
  }
  return path;
}

// Product-space representation of a small network: joint state index is the
// mixed-radix code with node 0 varying fastest.
struct FlatCtbn {
  std::shared_ptr<DenseRates> rates;
  InitialDistribution<int> initial;
  std::vector<int> radix;

  int encode(std::span<const int> joint) const {
    int code = 0, mult = 1;
    for (std::size_t w = 0; w < radix.size(); ++w) {
      code += joint[w] * mult;
      mult *= radix[w];
    }
    return code;
  }

  std::vector<int> decode(int code) const {
    std::vector<int> joint(radix.size());
    for (std::size_t w = 0; w < radix.size(); ++w) {
      joint[w] = code % radix[w];
      code /= radix[w];
    }
    return joint;
  }

  Trajectory<int> flatten(const CtbnPath& path) const {
    std::vector<std::pair<double, std::size_t>> events;
    for (std::size_t w = 0; w < path.nodes.size(); ++w)
      for (const auto& j : path.nodes[w].jumps) events.emplace_back(j.time, w);
    std::sort(events.begin(), events.end());
    Trajectory<int> out{encode(path.state_at(0.0)), {}, path.t_max()};
    for (const auto& [t, w] : events) out.jumps.push_back({t, encode(path.state_at(t))});
    return out;
  }
};

inline FlatCtbn flatten(const CtbnModel& model, std::size_t max_states = 4096) {
  FlatCtbn flat;
  std::size_t total = 1;
  for (const auto& n : model.nodes()) {
    flat.radix.push_back(n.num_states);
    total *= static_cast<std::size_t>(n.num_states);
    if (total > max_states) throw UnsupportedModel("network too large to flatten");
  }
  std::vector<std::vector<double>> q(total, std::vector<double>(total, 0.0));
  std::vector<double> nu(total, 0.0);
  for (std::size_t a = 0; a < total; ++a) {
    auto joint = flat.decode(static_cast<int>(a));
    nu[a] = std::exp(model.log_initial(joint));
    for (std::size_t w = 0; w < model.size(); ++w) {
      const auto& cim = model.cim(w, model.config_code(w, joint));
      const int keep = joint[w];
      for (int v = 0; v < model.node(w).num_states; ++v) {
        if (v == keep) continue;
        joint[w] = v;
        q[a][static_cast<std::size_t>(flat.encode(joint))] = cim.rate(keep, v);
      }
      joint[w] = keep;
    }
  }
  flat.rates = std::make_shared<DenseRates>(std::move(q));
  flat.initial = InitialDistribution<int>::indexed(std::move(nu));
  return flat;
}

}  // namespace mjp
