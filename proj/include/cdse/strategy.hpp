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

// Training-strategy layer: (MP, DP) enumeration, per-strategy sharding,
// per-node memory footprint under ZeRO-DP stages, and the per-layer,
// per-phase workload trace consumed by the engine.

#include <algorithm>
#include <array>
#include <bit>
#include <string>
#include <vector>

#include "cdse/error.hpp"
#include "cdse/perfmodel.hpp"
#include "cdse/workload.hpp"

namespace cdse {

struct ParallelConfig {
  Count mp = 1;
  Count dp = 1;

  Count nodes() const { return mp * dp; }
  std::string label() const { return "MP" + std::to_string(mp) + "_DP" + std::to_string(dp); }
  bool operator==(const ParallelConfig&) const = default;
};

inline bool is_power_of_two(Count v) { return v > 0 && std::has_single_bit(static_cast<std::uint64_t>(v)); }

inline void validate(const ParallelConfig& cfg, Count n_nodes) {
  if (!is_power_of_two(cfg.mp) || !is_power_of_two(cfg.dp)) {
    throw ConfigError("MP and DP degrees must be powers of two (got " + cfg.label() + ")");
  }
  if (cfg.nodes() != n_nodes) {
    throw ConfigError(cfg.label() + " does not cover " + std::to_string(n_nodes) + " nodes");
  }
}

/// All power-of-two (mp, dp) pairs with mp * dp = n_nodes, mp descending.
inline std::vector<ParallelConfig> enumerate_strategies(Count n_nodes) {
  if (!is_power_of_two(n_nodes)) {
    throw ConfigError("node count must be a power of two (got " + std::to_string(n_nodes) + ")");
  }
  std::vector<ParallelConfig> out;
  for (Count mp = n_nodes; mp >= 1; mp /= 2) out.push_back({mp, n_nodes / mp});
  return out;
}

// 0 = baseline, 1 = optimizer states, 2 = + gradients, 3 = + parameters.
struct ZeroStage {
  int stage = 2;

  ZeroStage() = default;
  explicit ZeroStage(int s) : stage(s) {
    if (s < 0 || s > 3) throw ConfigError("ZeRO stage must be in 0..3 (got " + std::to_string(s) + ")");
  }
  bool operator==(const ZeroStage&) const = default;
};

// Bytes per parameter for mixed-precision Adam.
inline constexpr double kParamBytes = 2.0;
inline constexpr double kGradBytes = 2.0;
inline constexpr double kOptimizerBytes = 12.0;

// Samples one node processes per pass, and passes per iteration.
struct BatchPlan {
  Count per_node = 1;
  Count steps = 1;
};

inline BatchPlan batch_plan(const LayerRecipe& r, const ParallelConfig& cfg) {
  const Count ranks = r.batch_split == BatchSplit::dp ? cfg.dp : cfg.nodes();
  if (r.global_batch % ranks != 0) {
    throw ConfigError("'global_batch' = " + std::to_string(r.global_batch) +
                      " is not divisible by the " + std::to_string(ranks) + " batch shards of " +
                      cfg.label());
  }
  const Count share = r.global_batch / ranks;
  if (r.mini_batch <= 0) return {share, 1};
  if (share % r.mini_batch != 0) {
    throw ConfigError("per-node batch " + std::to_string(share) + " of " + cfg.label() +
                      " is not a multiple of 'mini_batch' = " + std::to_string(r.mini_batch));
  }
  return {r.mini_batch, share / r.mini_batch};
}

/// Per-node view of a layer under cfg: head / ff / vocab / table dims are
/// divided by MP, token dims use the per-node micro-batch, and replicated
/// layers keep their full width.
inline LayerDescriptor shard_layer(const LayerDescriptor& layer, const ParallelConfig& cfg) {
  LayerDescriptor out = layer;
  const LayerRecipe& r = layer.recipe;
  const Count tokens = batch_plan(r, cfg).per_node * r.seq;
  const Count gather = r.m_group_gather > 0 ? cfg.mp : 1;
  if (r.batch_m) out.m = tokens * gather;
  if (r.batch_k) out.k = tokens;
  if (r.batch_n) out.n = tokens;
  if (r.split != SplitDim::none && cfg.mp > 1) {
    if (r.split_base % cfg.mp != 0) {
      throw ConfigError("'" + r.split_field + "' = " + std::to_string(r.split_base) +
                        " is not divisible by MP degree " + std::to_string(cfg.mp) + " (layer " +
                        layer.name + ")");
    }
    switch (r.split) {
      case SplitDim::k: out.k /= cfg.mp; break;
      case SplitDim::n: out.n /= cfg.mp; break;
      case SplitDim::stacks:
        out.stacks /= cfg.mp;
        out.recipe.live_stacks = std::min(out.recipe.live_stacks, out.stacks);
        break;
      case SplitDim::none: break;
    }
  }
  return out;
}

inline std::vector<LayerDescriptor> shard_graph(const LayerGraph& g, const ParallelConfig& cfg) {
  std::vector<LayerDescriptor> out;
  out.reserve(g.layers.size());
  for (const auto& l : g.layers) out.push_back(shard_layer(l, cfg));
  return out;
}

struct Footprint {
  Bytes model_states = 0;
  Bytes activations = 0;  // activation working memory, fp16

  Bytes total() const { return model_states + activations; }
};

/// Model-state bytes per node with psi_s = total_params / mp parameters.
inline Bytes model_state_bytes(Count total_params, const ParallelConfig& cfg, ZeroStage z) {
  const double psi = static_cast<double>(total_params) / static_cast<double>(cfg.mp);
  const double dp = static_cast<double>(cfg.dp);
  switch (z.stage) {
    case 0: return (kParamBytes + kGradBytes + kOptimizerBytes) * psi;
    case 1: return (kParamBytes + kGradBytes) * psi + kOptimizerBytes * psi / dp;
    case 2: return kParamBytes * psi + (kGradBytes + kOptimizerBytes) * psi / dp;
    default: return (kParamBytes + kGradBytes + kOptimizerBytes) * psi / dp;
  }
}

/// Intermediate activations held between two consecutive checkpoints
/// (one repeated block). Checkpoint activations themselves are excluded.
inline Bytes activation_working_memory(const std::vector<LayerDescriptor>& sharded) {
  double elems = 0;
  for (const auto& l : sharded) {
    elems += static_cast<double>(l.recipe.live_stacks) * static_cast<double>(l.m) *
             static_cast<double>(l.n);
  }
  return elems * 2.0;
}

inline Footprint footprint_breakdown(const LayerGraph& graph, const ParallelConfig& cfg, ZeroStage z) {
  return {model_state_bytes(graph.total_params, cfg, z),
          activation_working_memory(shard_graph(graph, cfg))};
}

inline Bytes footprint_per_node(const LayerGraph& graph, const ParallelConfig& cfg, ZeroStage z) {
  return footprint_breakdown(graph, cfg, z).total();
}

enum class CommDim { mp, dp, world };

inline std::string_view to_string(CommDim d) {
  switch (d) {
    case CommDim::mp: return "mp";
    case CommDim::dp: return "dp";
    case CommDim::world: return "world";
  }
  return "?";
}

struct PhaseTask {
  Flops flops = 0;
  Bytes mem_traffic = 0;
  Collective collective = Collective::none;
  Bytes comm_volume = 0;  // summed over all instances
  CommDim comm_dim = CommDim::mp;
  bool blocking = false;
  Count count = 0;  // collective instances folded into this task
  // Sharded-state sync: half of comm_volume is a reduce-scatter, the other
  // half the all-gather that redistributes the updated shards.
  bool gather_after = false;

  bool operator==(const PhaseTask&) const = default;
};

struct TraceLayer {
  std::string name;
  LayerKind kind = LayerKind::gemm;
  std::array<PhaseTask, 3> phases{};  // fp, ig, wg

  const PhaseTask& at(Phase p) const { return phases[static_cast<std::size_t>(p)]; }
  PhaseTask& at(Phase p) { return phases[static_cast<std::size_t>(p)]; }
  bool operator==(const TraceLayer&) const = default;
};

struct WorkloadTrace {
  std::string model;
  ParallelConfig cfg;
  ZeroStage zero;
  Count steps = 1;  // micro-batches per iteration
  std::vector<TraceLayer> layers;
  PhaseTask weight_update;  // element-wise optimizer step, no communication
  Bytes per_node_footprint = 0;
  Footprint footprint;

  bool operator==(const WorkloadTrace& o) const {
    return model == o.model && cfg == o.cfg && zero == o.zero && steps == o.steps &&
           layers == o.layers && weight_update == o.weight_update &&
           per_node_footprint == o.per_node_footprint;
  }
};

namespace detail {

inline bool syncs_in(MpSync s, Phase p) {
  switch (s) {
    case MpSync::none: return false;
    case MpSync::both: return p == Phase::fp || p == Phase::ig;
    case MpSync::fp: return p == Phase::fp;
    case MpSync::ig: return p == Phase::ig;
  }
  return false;
}

}  // namespace detail

/// Builds the per-node trace for cfg: FLOPs and memory traffic of every
/// layer in every phase (summed over micro-batches), the blocking MP
/// collectives at the model-parallel synchronisation points, and the
/// non-blocking gradient collectives across weight replicas.
inline WorkloadTrace build_trace(const LayerGraph& graph, const ParallelConfig& cfg, ZeroStage z,
                                 const NodeSpec& node) {
  WorkloadTrace t;
  t.model = graph.name;
  t.cfg = cfg;
  t.zero = z;
  const auto sharded = shard_graph(graph, cfg);
  t.steps = sharded.empty() ? 1 : batch_plan(sharded.front().recipe, cfg).steps;
  const double steps = static_cast<double>(t.steps);

  for (const auto& l : sharded) {
    TraceLayer tl;
    tl.name = l.name;
    tl.kind = l.kind;
    const double bpe = static_cast<double>(l.bytes_per_element);
    const double m = static_cast<double>(l.m);
    const double k = static_cast<double>(l.k);
    const double n = static_cast<double>(l.n);
    const double st = static_cast<double>(l.stacks);
    for (Phase p : kPhases) {
      PhaseTask& task = tl.at(p);
      task.flops = layer_flops(l, p) * steps;
      task.mem_traffic = layer_memory_traffic(l, p, node.on_chip_bytes) * steps;
      if (p != Phase::wg) {
        if (cfg.mp > 1 && detail::syncs_in(l.recipe.mp_sync, p)) {
          const bool a2a = l.recipe.mp_collective == Collective::all_to_all;
          const double width = (p == Phase::fp || a2a) ? n : k;
          task.collective = l.recipe.mp_collective;
          task.comm_volume = m * width * bpe * st * steps;
          task.comm_dim = CommDim::mp;
          task.blocking = true;
          task.count = (a2a ? 1 : l.stacks) * t.steps;
        }
      } else if (l.recipe.weights) {
        const bool world = l.recipe.grad_scope == GradScope::world;
        const Count replicas = world ? cfg.nodes() : cfg.dp;
        if (replicas > 1) {
          double volume = k * n * st * kGradBytes;
          if (z.stage >= 2) volume *= 2.0;
          if (z.stage == 3) volume *= 1.5;
          task.gather_after = z.stage >= 2;
          task.collective = z.stage >= 2 ? Collective::reduce_scatter : Collective::all_reduce;
          task.comm_volume = volume;
          task.comm_dim = world ? CommDim::world : CommDim::dp;
          task.blocking = false;
          task.count = l.stacks;
        }
      }
    }
    t.layers.push_back(std::move(tl));
  }

  const double psi = static_cast<double>(graph.total_params) / static_cast<double>(cfg.mp);
  const double updated = z.stage == 0 ? psi : psi / static_cast<double>(cfg.dp);
  t.weight_update.flops = 3.0 * updated;  // master weight, momentum, variance
  t.weight_update.mem_traffic = 2.0 * kOptimizerBytes * updated;

  t.footprint = {model_state_bytes(graph.total_params, cfg, z), activation_working_memory(sharded)};
  t.per_node_footprint = t.footprint.total();
  return t;
}

}  // namespace cdse
