/* Copyright 2026 The cdse Authors
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

// Iteration simulator: one compute timeline plus one FIFO timeline per
// link class. Blocking collectives stall compute until their last phase
// completes; non-blocking ones only occupy their link classes.

#include <algorithm>
#include <array>
#include <deque>
#include <queue>
#include <string>
#include <vector>

#include "cdse/error.hpp"
#include "cdse/network.hpp"
#include "cdse/perfmodel.hpp"
#include "cdse/strategy.hpp"

namespace cdse {

struct PhaseBreakdown {
  Seconds compute_s = 0;
  Seconds exposed_s = 0;

  bool operator==(const PhaseBreakdown&) const = default;
};

struct LayerResult {
  std::string name;
  std::array<PhaseBreakdown, 3> phases{};

  const PhaseBreakdown& at(Phase p) const { return phases[static_cast<std::size_t>(p)]; }
  PhaseBreakdown& at(Phase p) { return phases[static_cast<std::size_t>(p)]; }
  bool operator==(const LayerResult&) const = default;
};

struct IterationResult {
  std::vector<LayerResult> layers;
  Seconds update_s = 0;                     // weight update, included in wg compute
  std::array<PhaseBreakdown, 3> totals_by_phase{};
  Seconds compute_s = 0;
  Seconds exposed_comm_s = 0;
  Seconds iteration_s = 0;
  Seconds raw_comm_s = 0;                   // sum of all phase durations
  std::array<Seconds, kLinkClassCount> link_busy_s{};
  Bytes footprint_bytes = 0;
  double bw_eff = 0;
  bool feasible = false;

  const PhaseBreakdown& total(Phase p) const { return totals_by_phase[static_cast<std::size_t>(p)]; }
  bool operator==(const IterationResult&) const = default;
};

namespace detail {

struct Op {
  enum Kind { compute, blocking, async } kind = compute;
  Seconds duration = 0;
  std::vector<CollectivePhase> phases;
  std::size_t layer = 0;
};

struct Request {
  std::size_t op = 0;
  std::size_t phase = 0;
  int iteration = 0;
};

struct Event {
  Seconds time = 0;
  std::uint64_t seq = 0;
  bool compute_done = false;
  std::size_t link = 0;
  Request req;

  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

// Completion times gathered while running `iterations` copies of ops.
struct Timeline {
  std::vector<Seconds> issue;  // per op of the last iteration
  std::vector<Seconds> done;
};

inline Timeline run_timeline(const std::vector<Op>& ops, int iterations) {
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::array<std::deque<Request>, kLinkClassCount> queues;
  std::array<bool, kLinkClassCount> busy{};
  std::uint64_t seq = 0;
  Timeline tl;
  tl.issue.assign(ops.size(), 0.0);
  tl.done.assign(ops.size(), 0.0);
  const int last = iterations - 1;

  const auto start_link = [&](std::size_t link, Seconds t) {
    const Request r = queues[link].front();
    queues[link].pop_front();
    busy[link] = true;
    events.push({t + ops[r.op].phases[r.phase].duration, seq++, false, link, r});
  };
  const auto submit = [&](const Request& r, Seconds t) {
    const auto link = static_cast<std::size_t>(ops[r.op].phases[r.phase].link_class);
    queues[link].push_back(r);
    if (!busy[link]) start_link(link, t);
  };

  std::size_t pc = 0;
  const std::size_t total = ops.size() * static_cast<std::size_t>(iterations);
  // Issues ops until one must wait; returns when compute is occupied.
  const auto advance = [&](Seconds t) {
    while (pc < total) {
      const std::size_t i = pc % ops.size();
      const int it = static_cast<int>(pc / ops.size());
      ++pc;
      const Op& op = ops[i];
      if (it == last) tl.issue[i] = t;
      if (op.kind == Op::compute) {
        if (op.duration > 0) {
          events.push({t + op.duration, seq++, true, 0, {i, 0, it}});
          return;
        }
        if (it == last) tl.done[i] = t;
      } else if (op.phases.empty()) {
        if (it == last) tl.done[i] = t;
      } else {
        submit({i, 0, it}, t);
        if (op.kind == Op::blocking) return;
      }
    }
  };

  advance(0.0);
  while (!events.empty()) {
    const Event e = events.top();
    events.pop();
    const Op& op = ops[e.req.op];
    if (e.compute_done) {
      if (e.req.iteration == last) tl.done[e.req.op] = e.time;
      advance(e.time);
      continue;
    }
    busy[e.link] = false;
    if (e.req.phase + 1 < op.phases.size()) {
      submit({e.req.op, e.req.phase + 1, e.req.iteration}, e.time);
    } else {
      if (e.req.iteration == last) tl.done[e.req.op] = e.time;
      if (op.kind == Op::blocking) advance(e.time);
    }
    if (!busy[e.link] && !queues[e.link].empty()) start_link(e.link, e.time);
  }
  return tl;
}

}  // namespace detail

/// Steady-state iteration time for trace on cluster. Two iterations run
/// back to back so that gradient traffic left over from one iteration
/// delays the next one's blocking collectives; the second is reported.
/// If a link class is busier than the compute-side period, the surplus is
/// exposed wg communication.
inline IterationResult simulate_iteration(const WorkloadTrace& trace, const ParallelConfig& cfg,
                                          const ClusterSpec& cluster, const NodeSpec& node) {
  if (!(trace.cfg == cfg)) {
    throw ConfigError("trace was built for " + trace.cfg.label() + ", not " + cfg.label());
  }
  validate(cluster);
  validate(node);
  IterationResult r;
  r.footprint_bytes = trace.per_node_footprint;
  if (trace.per_node_footprint > node.lm_capacity + node.em_capacity) {
    r.feasible = false;
    return r;
  }
  r.feasible = true;
  r.bw_eff = trace.per_node_footprint > 0 ? hybrid_bandwidth(trace.per_node_footprint, node) : node.lm_bw;

  const auto delay = [&](const PhaseTask& t) {
    return roofline_delay(t.flops, t.mem_traffic, r.bw_eff, node);
  };

  using detail::Op;
  std::vector<Op> ops;
  struct Slot {
    std::size_t op;
    std::size_t layer;
    Phase phase;
  };
  std::vector<Slot> comm_slots;
  r.layers.resize(trace.layers.size());
  const auto add_comm = [&](std::size_t li, Phase p) {
    const PhaseTask& t = trace.layers[li].at(p);
    if (t.collective == Collective::none) return;
    Op op;
    op.kind = t.blocking ? Op::blocking : Op::async;
    op.phases = collective_time(t, cfg, cluster);
    op.layer = li;
    for (const auto& ph : op.phases) {
      r.link_busy_s[static_cast<std::size_t>(ph.link_class)] += ph.duration;
      r.raw_comm_s += ph.duration;
    }
    comm_slots.push_back({ops.size(), li, p});
    ops.push_back(std::move(op));
  };
  const auto add_compute = [&](std::size_t li, Phase p) {
    const Seconds d = delay(trace.layers[li].at(p));
    r.layers[li].at(p).compute_s = d;
    ops.push_back({Op::compute, d, {}, li});
  };

  for (std::size_t li = 0; li < trace.layers.size(); ++li) {
    r.layers[li].name = trace.layers[li].name;
    add_compute(li, Phase::fp);
    add_comm(li, Phase::fp);
  }
  for (std::size_t li = trace.layers.size(); li-- > 0;) {
    add_compute(li, Phase::ig);
    add_comm(li, Phase::ig);
    add_compute(li, Phase::wg);
    add_comm(li, Phase::wg);
  }
  r.update_s = delay(trace.weight_update);
  ops.push_back({Op::compute, r.update_s, {}, 0});

  const detail::Timeline tl = detail::run_timeline(ops, 2);

  Seconds blocking_exposed = 0;
  Seconds last_async = -1;
  std::size_t last_async_layer = 0;
  for (const Slot& s : comm_slots) {
    const Seconds span = tl.done[s.op] - tl.issue[s.op];
    if (ops[s.op].kind == Op::blocking) {
      r.layers[s.layer].at(s.phase).exposed_s += span;
      blocking_exposed += span;
    } else if (tl.done[s.op] > last_async) {
      last_async = tl.done[s.op];
      last_async_layer = s.layer;
    }
  }

  Seconds compute = r.update_s;
  for (const auto& l : r.layers) {
    for (const auto& ph : l.phases) compute += ph.compute_s;
  }
  const Seconds period = compute + blocking_exposed;
  const Seconds busiest = *std::max_element(r.link_busy_s.begin(), r.link_busy_s.end());
  const Seconds wg_exposed = busiest > period ? busiest - period : 0.0;
  if (wg_exposed > 0 && last_async >= 0) r.layers[last_async_layer].at(Phase::wg).exposed_s += wg_exposed;

  for (const auto& l : r.layers) {
    for (Phase p : kPhases) {
      r.totals_by_phase[static_cast<std::size_t>(p)].compute_s += l.at(p).compute_s;
      r.totals_by_phase[static_cast<std::size_t>(p)].exposed_s += l.at(p).exposed_s;
    }
  }
  r.totals_by_phase[static_cast<std::size_t>(Phase::wg)].compute_s += r.update_s;
  r.compute_s = compute;
  r.exposed_comm_s = blocking_exposed + wg_exposed;
  r.iteration_s = r.compute_s + r.exposed_comm_s;
  return r;
}

inline double exposed_comm_ratio(const IterationResult& r) {
  if (!(r.compute_s > 0)) throw DomainError("exposed communication ratio undefined for zero compute");
  return r.exposed_comm_s / r.compute_s;
}

/// Convenience: trace + simulate for one configuration.
inline IterationResult evaluate(const LayerGraph& graph, const ParallelConfig& cfg, ZeroStage z,
                                const ClusterSpec& cluster, const NodeSpec& node) {
  return simulate_iteration(build_trace(graph, cfg, z, node), cfg, cluster, node);
}

}  // namespace cdse
