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

// Analytical collective cost model. Each collective is decomposed into
// phases bound to one link class so the engine can serialise traffic that
// shares a class.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "cdse/error.hpp"
#include "cdse/strategy.hpp"
#include "cdse/workload.hpp"

namespace cdse {

enum class Topology { two_level_switch, torus3d, single_switch };
enum class CollectiveAlgo { logical_ring, hierarchical };
enum class LinkClass { intra_pod, inter_pod, torus_x, torus_y, torus_z };
inline constexpr std::size_t kLinkClassCount = 5;

inline std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::two_level_switch: return "two_level_switch";
    case Topology::torus3d: return "torus3d";
    case Topology::single_switch: return "single_switch";
  }
  return "?";
}

inline std::string_view to_string(CollectiveAlgo a) {
  return a == CollectiveAlgo::logical_ring ? "logical_ring" : "hierarchical";
}

inline std::string_view to_string(LinkClass c) {
  switch (c) {
    case LinkClass::intra_pod: return "intra_pod";
    case LinkClass::inter_pod: return "inter_pod";
    case LinkClass::torus_x: return "torus_x";
    case LinkClass::torus_y: return "torus_y";
    case LinkClass::torus_z: return "torus_z";
  }
  return "?";
}

inline Topology topology_from_string(std::string_view s) {
  if (s == "two_level_switch") return Topology::two_level_switch;
  if (s == "torus3d") return Topology::torus3d;
  if (s == "single_switch") return Topology::single_switch;
  throw ConfigError("unknown topology '" + std::string(s) +
                    "' (expected two_level_switch, torus3d or single_switch)");
}

inline CollectiveAlgo collective_algo_from_string(std::string_view s) {
  if (s == "logical_ring") return CollectiveAlgo::logical_ring;
  if (s == "hierarchical") return CollectiveAlgo::hierarchical;
  throw ConfigError("unknown collective_algo '" + std::string(s) +
                    "' (expected logical_ring or hierarchical)");
}

// Bandwidths are bytes/s per direction per node. For a torus, link_bw is
// per link per direction; a dimension ring drives both directions.
struct ClusterSpec {
  std::string name;
  Count n_nodes = 1;
  Count pod_size = 1;
  Topology topology = Topology::two_level_switch;
  double intra_bw = 0;
  double inter_bw = 0;
  std::array<Count, 3> torus_dims{1, 1, 1};
  double torus_link_bw = 0;
  Seconds link_latency = 0;
  CollectiveAlgo algo = CollectiveAlgo::hierarchical;

  bool operator==(const ClusterSpec&) const = default;
};

inline void validate(const ClusterSpec& c) {
  if (c.n_nodes < 1) throw ConfigError("cluster.n_nodes must be >= 1");
  if (c.link_latency < 0) throw ConfigError("cluster.link_latency must be >= 0");
  switch (c.topology) {
    case Topology::two_level_switch:
      if (c.pod_size < 1 || c.n_nodes % c.pod_size != 0) {
        throw ConfigError("cluster.n_nodes (" + std::to_string(c.n_nodes) +
                          ") must be divisible by pod_size (" + std::to_string(c.pod_size) + ")");
      }
      if (!(c.intra_bw > 0) || !(c.inter_bw > 0)) {
        throw ConfigError("cluster intra_bw and inter_bw must be > 0");
      }
      break;
    case Topology::single_switch:
      if (!(c.intra_bw > 0)) throw ConfigError("cluster.intra_bw must be > 0");
      break;
    case Topology::torus3d: {
      const auto& d = c.torus_dims;
      if (d[0] < 1 || d[1] < 1 || d[2] < 1 || d[0] * d[1] * d[2] != c.n_nodes) {
        throw ConfigError("cluster.torus_dims must multiply to n_nodes (" +
                          std::to_string(c.n_nodes) + ")");
      }
      if (!(c.torus_link_bw > 0)) throw ConfigError("cluster.torus_link_bw must be > 0");
      break;
    }
  }
}

struct CollectivePhase {
  LinkClass link_class = LinkClass::intra_pod;
  Seconds duration = 0;

  bool operator==(const CollectivePhase&) const = default;
};

// local: members sharing a pod; span: pods touched (size = local * span).
// extent: members along each torus dimension.
struct CommGroup {
  CommDim kind = CommDim::mp;
  Count size = 1;
  Count span = 1;
  Count local = 1;
  std::array<Count, 3> extent{1, 1, 1};

  bool operator==(const CommGroup&) const = default;
};

struct GroupPlacement {
  CommGroup mp;
  CommGroup dp;
  CommGroup world;
};

namespace detail {

inline CommGroup pod_group(CommDim kind, Count size, Count local) {
  CommGroup g;
  g.kind = kind;
  g.size = size;
  g.local = local;
  g.span = size / local;
  return g;
}

// Extents of a block of `size` consecutive node ids on the torus.
inline std::array<Count, 3> torus_block(Count size, const std::array<Count, 3>& dims) {
  std::array<Count, 3> e{1, 1, 1};
  Count left = size;
  for (std::size_t i = 0; i < 3; ++i) {
    if (left <= 1) break;
    if (left >= dims[i]) {
      if (left % dims[i] != 0) break;
      e[i] = dims[i];
      left /= dims[i];
    } else {
      if (dims[i] % left != 0) break;
      e[i] = left;
      left = 1;
    }
  }
  if (left != 1) {
    throw ConfigError("group of " + std::to_string(size) + " nodes does not tile the torus");
  }
  return e;
}

}  // namespace detail

/// MP groups take consecutive node ids, pods first; a DP group holds the
/// same MP rank from every MP group.
inline GroupPlacement place_groups(const ParallelConfig& cfg, const ClusterSpec& c) {
  if (cfg.nodes() != c.n_nodes) {
    throw ConfigError(cfg.label() + " needs " + std::to_string(cfg.nodes()) +
                      " nodes but the cluster has " + std::to_string(c.n_nodes));
  }
  GroupPlacement g;
  switch (c.topology) {
    case Topology::single_switch:
      g.mp = detail::pod_group(CommDim::mp, cfg.mp, cfg.mp);
      g.dp = detail::pod_group(CommDim::dp, cfg.dp, cfg.dp);
      g.world = detail::pod_group(CommDim::world, c.n_nodes, c.n_nodes);
      break;
    case Topology::two_level_switch: {
      const Count pod = c.pod_size;
      Count mp_local = 0;
      if (cfg.mp <= pod) {
        if (pod % cfg.mp != 0) throw ConfigError("MP degree must divide pod_size or be a multiple of it");
        mp_local = cfg.mp;
      } else {
        if (cfg.mp % pod != 0) throw ConfigError("MP degree must divide pod_size or be a multiple of it");
        mp_local = pod;
      }
      const Count dp_local = cfg.mp >= pod ? 1 : std::min(cfg.dp, pod / cfg.mp);
      g.mp = detail::pod_group(CommDim::mp, cfg.mp, mp_local);
      g.dp = detail::pod_group(CommDim::dp, cfg.dp, dp_local);
      g.world = detail::pod_group(CommDim::world, c.n_nodes, std::min(pod, c.n_nodes));
      break;
    }
    case Topology::torus3d: {
      const auto mp_e = detail::torus_block(cfg.mp, c.torus_dims);
      std::array<Count, 3> dp_e{};
      for (std::size_t i = 0; i < 3; ++i) dp_e[i] = c.torus_dims[i] / mp_e[i];
      g.mp = {CommDim::mp, cfg.mp, 1, cfg.mp, mp_e};
      g.dp = {CommDim::dp, cfg.dp, 1, cfg.dp, dp_e};
      g.world = {CommDim::world, c.n_nodes, 1, c.n_nodes, c.torus_dims};
      break;
    }
  }
  return g;
}

inline Seconds ring_allreduce_time(Bytes volume, Count p, double bw, Seconds latency) {
  if (p <= 1) return 0.0;
  const double steps = 2.0 * static_cast<double>(p - 1);
  return steps * (volume / static_cast<double>(p)) / bw + steps * latency;
}

/// Ring reduce-scatter or all-gather; volume is the full (unscattered) size.
inline Seconds ring_half_time(Bytes volume, Count p, double bw, Seconds latency) {
  if (p <= 1) return 0.0;
  const double steps = static_cast<double>(p - 1);
  return steps * (volume / static_cast<double>(p)) / bw + steps * latency;
}

inline Seconds alltoall_time(Bytes volume, Count p, double bw, Seconds latency) {
  if (p <= 1) return 0.0;
  const double pd = static_cast<double>(p);
  return (pd - 1.0) / pd * volume / bw + (pd - 1.0) * latency;
}

/// Intra-pod reduce-scatter, inter-pod ring all-reduce on the scattered
/// shard, intra-pod all-gather. Degenerates to one ring when the group
/// fits in a pod or has one member per pod.
inline std::vector<CollectivePhase> hierarchical_allreduce_time(Bytes volume, const CommGroup& g,
                                                                const ClusterSpec& c) {
  const Seconds lat = c.link_latency;
  if (g.size <= 1) return {};
  if (g.span <= 1) return {{LinkClass::intra_pod, ring_allreduce_time(volume, g.local, c.intra_bw, lat)}};
  if (g.local <= 1) return {{LinkClass::inter_pod, ring_allreduce_time(volume, g.span, c.inter_bw, lat)}};
  const Seconds rs = ring_half_time(volume, g.local, c.intra_bw, lat);
  const Bytes shard = volume / static_cast<double>(g.local);
  return {{LinkClass::intra_pod, rs},
          {LinkClass::inter_pod, ring_allreduce_time(shard, g.span, c.inter_bw, lat)},
          {LinkClass::intra_pod, rs}};
}

namespace detail {

inline LinkClass torus_class(std::size_t dim) {
  return static_cast<LinkClass>(static_cast<std::size_t>(LinkClass::torus_x) + dim);
}

inline void push_nonzero(std::vector<CollectivePhase>& out, LinkClass cls, Seconds d) {
  if (d > 0) out.push_back({cls, d});
}

inline std::vector<CollectivePhase> torus_phases(Collective kind, Bytes volume, const CommGroup& g,
                                                 const ClusterSpec& c) {
  const double bw = 2.0 * c.torus_link_bw;
  const Seconds lat = c.link_latency;
  std::vector<CollectivePhase> out;
  if (kind == Collective::all_to_all) {
    for (std::size_t i = 0; i < 3; ++i) push_nonzero(out, torus_class(i), alltoall_time(volume, g.extent[i], bw, lat));
    return out;
  }
  // Dimension-ordered reduce-scatter shrinks the volume by each extent.
  std::vector<CollectivePhase> rs;
  Bytes v = volume;
  for (std::size_t i = 0; i < 3; ++i) {
    push_nonzero(rs, torus_class(i), ring_half_time(v, g.extent[i], bw, lat));
    v /= static_cast<double>(g.extent[i]);
  }
  if (kind == Collective::reduce_scatter || kind == Collective::all_reduce) out = rs;
  if (kind == Collective::all_gather || kind == Collective::all_reduce) {
    out.insert(out.end(), rs.rbegin(), rs.rend());
  }
  return out;
}

inline std::vector<CollectivePhase> switch_phases(Collective kind, Bytes volume, const CommGroup& g,
                                                  const ClusterSpec& c) {
  const Seconds lat = c.link_latency;
  const bool flat = c.topology == Topology::single_switch;
  std::vector<CollectivePhase> out;
  if (g.size <= 1) return out;
  if (flat || g.span <= 1) {
    const double bw = c.intra_bw;
    switch (kind) {
      case Collective::all_reduce: push_nonzero(out, LinkClass::intra_pod, ring_allreduce_time(volume, g.size, bw, lat)); break;
      case Collective::all_to_all: push_nonzero(out, LinkClass::intra_pod, alltoall_time(volume, g.size, bw, lat)); break;
      case Collective::reduce_scatter:
      case Collective::all_gather: push_nonzero(out, LinkClass::intra_pod, ring_half_time(volume, g.size, bw, lat)); break;
      case Collective::none: break;
    }
    return out;
  }
  if (kind == Collective::all_to_all) {
    const double p = static_cast<double>(g.size);
    const double local = static_cast<double>(g.local);
    push_nonzero(out, LinkClass::intra_pod, (local - 1.0) / p * volume / c.intra_bw + (local - 1.0) * lat);
    push_nonzero(out, LinkClass::inter_pod, (p - local) / p * volume / c.inter_bw + (p - local) * lat);
    return out;
  }
  if (c.algo == CollectiveAlgo::logical_ring) {
    // One ring over all members; every step crosses a pod boundary somewhere.
    const double bw = std::min(c.intra_bw, c.inter_bw);
    const Seconds d = kind == Collective::all_reduce ? ring_allreduce_time(volume, g.size, bw, lat)
                                                     : ring_half_time(volume, g.size, bw, lat);
    push_nonzero(out, LinkClass::inter_pod, d);
    return out;
  }
  if (kind == Collective::all_reduce) return hierarchical_allreduce_time(volume, g, c);
  const Bytes shard = volume / static_cast<double>(g.local);
  const Seconds intra = ring_half_time(volume, g.local, c.intra_bw, lat);
  const Seconds inter = ring_half_time(shard, g.span, c.inter_bw, lat);
  if (kind == Collective::reduce_scatter) {
    push_nonzero(out, LinkClass::intra_pod, intra);
    push_nonzero(out, LinkClass::inter_pod, inter);
  } else {
    push_nonzero(out, LinkClass::inter_pod, inter);
    push_nonzero(out, LinkClass::intra_pod, intra);
  }
  return out;
}

}  // namespace detail

/// Phases of a single collective of `volume` bytes over group g.
inline std::vector<CollectivePhase> collective_phases(Collective kind, Bytes volume, const CommGroup& g,
                                                      const ClusterSpec& c) {
  if (kind == Collective::none || g.size <= 1 || volume <= 0) return {};
  if (c.topology == Topology::torus3d) return detail::torus_phases(kind, volume, g, c);
  return detail::switch_phases(kind, volume, g, c);
}

inline const CommGroup& group_for(const GroupPlacement& g, CommDim d) {
  switch (d) {
    case CommDim::mp: return g.mp;
    case CommDim::dp: return g.dp;
    case CommDim::world: return g.world;
  }
  return g.mp;
}

/// Phases for every instance folded into task, run back to back: each
/// phase's duration is the single-instance duration times task.count.
inline std::vector<CollectivePhase> collective_time(const PhaseTask& task, const ParallelConfig& cfg,
                                                    const ClusterSpec& c) {
  if (task.collective == Collective::none) return {};
  const GroupPlacement g = place_groups(cfg, c);
  const Count count = std::max<Count>(task.count, 1);
  const CommGroup& group = group_for(g, task.comm_dim);
  const Bytes per_instance = task.comm_volume / static_cast<double>(count);
  std::vector<CollectivePhase> phases;
  if (task.gather_after) {
    phases = collective_phases(task.collective, per_instance / 2.0, group, c);
    const auto gather = collective_phases(Collective::all_gather, per_instance / 2.0, group, c);
    phases.insert(phases.end(), gather.begin(), gather.end());
  } else {
    phases = collective_phases(task.collective, per_instance, group, c);
  }
  for (auto& p : phases) p.duration *= static_cast<double>(count);
  return phases;
}

}  // namespace cdse
