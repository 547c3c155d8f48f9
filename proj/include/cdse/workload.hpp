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

// Workload decomposition: a model becomes an ordered list of GEMM-shaped
// layer descriptors with enough metadata to shard, cost and communicate
// each layer under any (MP, DP) strategy.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdse/error.hpp"

namespace cdse {

using Count = std::int64_t;
using Flops = double;
using Bytes = double;
using Seconds = double;

enum class ModelKind { transformer, dlrm };

struct DlrmParams {
  Count num_tables = 0;
  Count rows_per_table = 0;
  Count embedding_dim = 0;
  // Layer widths including the input width: {in, h1, ..., out}. The last
  // width must equal embedding_dim so the dense vector joins the interaction.
  std::vector<Count> bottom_mlp;
  // Output widths of the top MLP; its input is the interaction width.
  std::vector<Count> top_mlp;

  bool operator==(const DlrmParams&) const = default;
};

struct ModelHyperParams {
  ModelKind kind = ModelKind::transformer;
  std::string name;
  Count d_model = 0;
  Count n_stacks = 0;
  Count n_heads = 0;
  Count d_k = 0;
  Count d_v = 0;
  Count ff_dim = 0;
  Count vocab = 0;
  Count seq = 1;
  // Per-node micro-batch. 0 means "the whole per-node share of the global
  // batch in one pass" (b = global_batch / dp).
  Count mini_batch = 0;
  Count global_batch = 1;
  Count bytes_per_element = 2;
  std::optional<DlrmParams> dlrm;

  bool operator==(const ModelHyperParams&) const = default;
};

enum class LayerKind { gemm, elementwise, table_lookup, table_update };

enum class Phase { fp, ig, wg };
inline constexpr Phase kPhases[] = {Phase::fp, Phase::ig, Phase::wg};

enum class Collective { none, all_reduce, all_to_all, reduce_scatter, all_gather };

// Which GEMM dimension is partitioned across the model-parallel group.
enum class SplitDim { none, k, n, stacks };

// Training phases that end in a blocking model-parallel collective.
enum class MpSync { none, fp, ig, both };

// Nodes that replicate a layer's weights and therefore all-reduce its
// weight gradients.
enum class GradScope { dp, world };

// How samples are divided among nodes.
enum class BatchSplit { dp, world };

struct LayerRecipe {
  SplitDim split = SplitDim::none;
  std::string split_field;  // hyperparameter that must divide by MP
  Count split_base = 1;     // value of that hyperparameter
  bool batch_m = true;      // dims equal to (samples x seq) tokens
  bool batch_k = false;
  bool batch_n = false;
  Count m_group_gather = 0;  // nonzero: M additionally scales with MP degree
  bool weights = false;      // K x N is a parameter matrix
  MpSync mp_sync = MpSync::none;
  Collective mp_collective = Collective::none;
  GradScope grad_scope = GradScope::dp;
  // Stacks whose outputs are live at once inside one checkpoint interval.
  // 0 excludes the layer from the activation working memory.
  Count live_stacks = 0;
  // Batch context, needed to recompute token dims when sharding.
  BatchSplit batch_split = BatchSplit::dp;
  Count seq = 1;
  Count global_batch = 1;
  Count mini_batch = 0;

  bool operator==(const LayerRecipe&) const = default;
};

struct LayerDescriptor {
  std::string name;
  LayerKind kind = LayerKind::gemm;
  Count stacks = 1;
  Count m = 1;
  Count k = 1;
  Count n = 1;
  Count bytes_per_element = 2;
  LayerRecipe recipe;

  Count weight_params() const { return recipe.weights ? k * n * stacks : 0; }
  bool operator==(const LayerDescriptor&) const = default;
};

struct LayerGraph {
  ModelKind kind = ModelKind::transformer;
  std::string name;
  std::vector<LayerDescriptor> layers;
  Count total_params = 0;
};

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::gemm: return "gemm";
    case LayerKind::elementwise: return "elementwise";
    case LayerKind::table_lookup: return "table_lookup";
    case LayerKind::table_update: return "table_update";
  }
  return "?";
}

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::fp: return "fp";
    case Phase::ig: return "ig";
    case Phase::wg: return "wg";
  }
  return "?";
}

inline std::string_view to_string(Collective c) {
  switch (c) {
    case Collective::none: return "none";
    case Collective::all_reduce: return "all_reduce";
    case Collective::all_to_all: return "all_to_all";
    case Collective::reduce_scatter: return "reduce_scatter";
    case Collective::all_gather: return "all_gather";
  }
  return "?";
}

inline Collective collective_from_string(std::string_view s) {
  for (auto c : {Collective::none, Collective::all_reduce, Collective::all_to_all,
                 Collective::reduce_scatter, Collective::all_gather}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown collective '" + std::string(s) + "'");
}

namespace detail {

inline void require_positive(Count v, std::string_view field) {
  if (v < 1) {
    throw ConfigError("model hyperparameter '" + std::string(field) +
                      "' must be >= 1 (got " + std::to_string(v) + ")");
  }
}

inline void require_divides(Count value, Count divisor, std::string_view field,
                            std::string_view by) {
  if (divisor < 1 || value % divisor != 0) {
    throw ConfigError("'" + std::string(field) + "' = " + std::to_string(value) +
                      " is not divisible by " + std::string(by) + " = " +
                      std::to_string(divisor));
  }
}

inline void check_batch(const ModelHyperParams& hp) {
  require_positive(hp.global_batch, "global_batch");
  require_positive(hp.seq, "seq");
  require_positive(hp.bytes_per_element, "bytes_per_element");
  if (hp.mini_batch < 0) throw ConfigError("'mini_batch' must be >= 0");
  if (hp.mini_batch > 0) {
    require_divides(hp.global_batch, hp.mini_batch, "global_batch", "mini_batch");
  }
}

// Samples processed per pass when the graph is unsharded.
inline Count unsharded_batch(const ModelHyperParams& hp) {
  return hp.mini_batch > 0 ? hp.mini_batch : hp.global_batch;
}

inline LayerRecipe base_recipe(const ModelHyperParams& hp, BatchSplit split) {
  LayerRecipe r;
  r.batch_split = split;
  r.seq = hp.seq;
  r.global_batch = hp.global_batch;
  r.mini_batch = hp.mini_batch;
  return r;
}

inline Count sum_params(const std::vector<LayerDescriptor>& layers) {
  Count total = 0;
  for (const auto& l : layers) total += l.weight_params();
  return total;
}

}  // namespace detail

/// Decomposes a Transformer into the fourteen canonical rows: input
/// embedding, the per-stack attention and MLP rows (repeated n_stacks
/// times), and the output embedding. All rows share M = b x seq.
///
/// The MLP down-projection emits d_model columns so that it feeds the
/// residual stream; the attention-score rows keep the (b x seq)-wide
/// score matrix of the canonical table and carry no weights.
inline LayerGraph build_transformer(const ModelHyperParams& hp) {
  if (hp.kind != ModelKind::transformer) {
    throw ConfigError("build_transformer: model_kind is not 'transformer'");
  }
  using detail::require_positive;
  require_positive(hp.d_model, "d_model");
  require_positive(hp.n_stacks, "n_stacks");
  require_positive(hp.n_heads, "n_heads");
  require_positive(hp.d_k, "d_k");
  require_positive(hp.d_v, "d_v");
  require_positive(hp.ff_dim, "ff_dim");
  require_positive(hp.vocab, "vocab");
  detail::check_batch(hp);

  const Count tokens = detail::unsharded_batch(hp) * hp.seq;
  const Count stacks = hp.n_stacks;
  const Count hk = hp.n_heads * hp.d_k;
  const Count hv = hp.n_heads * hp.d_v;
  const Count bpe = hp.bytes_per_element;
  const LayerRecipe base = detail::base_recipe(hp, BatchSplit::dp);

  auto row = [&](std::string name, LayerKind kind, Count st, Count k, Count n) {
    LayerDescriptor l;
    l.name = std::move(name);
    l.kind = kind;
    l.stacks = st;
    l.m = tokens;
    l.k = k;
    l.n = n;
    l.bytes_per_element = bpe;
    l.recipe = base;
    l.recipe.live_stacks = st == stacks && st > 0 ? 1 : 0;
    return l;
  };
  auto split = [](LayerDescriptor l, SplitDim dim, std::string field, Count base_v) {
    l.recipe.split = dim;
    l.recipe.split_field = std::move(field);
    l.recipe.split_base = base_v;
    return l;
  };
  auto weighted = [](LayerDescriptor l) {
    l.recipe.weights = true;
    return l;
  };
  auto synced = [](LayerDescriptor l, MpSync s) {
    l.recipe.mp_sync = s;
    l.recipe.mp_collective = Collective::all_reduce;
    return l;
  };

  std::vector<LayerDescriptor> layers;
  layers.reserve(14);

  auto input_emb = synced(
      weighted(split(row("input_embedding", LayerKind::table_lookup, 1, hp.vocab, hp.d_model),
                     SplitDim::k, "vocab", hp.vocab)),
      MpSync::fp);
  input_emb.recipe.live_stacks = 0;
  layers.push_back(input_emb);

  layers.push_back(row("layer_norm_1", LayerKind::elementwise, stacks, 1, hp.d_model));
  layers.push_back(weighted(split(row("query_projection", LayerKind::gemm, stacks, hp.d_model, hk),
                                  SplitDim::n, "n_heads", hp.n_heads)));
  layers.push_back(weighted(split(row("key_projection", LayerKind::gemm, stacks, hp.d_model, hk),
                                  SplitDim::n, "n_heads", hp.n_heads)));
  layers.push_back(weighted(split(row("value_projection", LayerKind::gemm, stacks, hp.d_model, hv),
                                  SplitDim::n, "n_heads", hp.n_heads)));

  auto score = split(row("attention_score", LayerKind::gemm, stacks, hk, tokens), SplitDim::k,
                     "n_heads", hp.n_heads);
  score.recipe.batch_n = true;
  layers.push_back(score);

  auto context = split(row("attention_context", LayerKind::gemm, stacks, tokens, hv), SplitDim::n,
                       "n_heads", hp.n_heads);
  context.recipe.batch_k = true;
  layers.push_back(context);

  layers.push_back(synced(weighted(split(row("attention_output", LayerKind::gemm, stacks, hv,
                                             hp.d_model),
                                         SplitDim::k, "n_heads", hp.n_heads)),
                          MpSync::both));
  layers.push_back(row("residual_add_1", LayerKind::elementwise, stacks, 1, hp.d_model));
  layers.push_back(row("layer_norm_2", LayerKind::elementwise, stacks, 1, hp.d_model));
  layers.push_back(weighted(split(row("mlp_up", LayerKind::gemm, stacks, hp.d_model, hp.ff_dim),
                                  SplitDim::n, "ff_dim", hp.ff_dim)));
  layers.push_back(synced(weighted(split(row("mlp_down", LayerKind::gemm, stacks, hp.ff_dim,
                                             hp.d_model),
                                         SplitDim::k, "ff_dim", hp.ff_dim)),
                          MpSync::both));
  layers.push_back(row("residual_add_2", LayerKind::elementwise, stacks, 1, hv));

  auto output_emb = synced(
      weighted(split(row("output_embedding", LayerKind::table_update, 1, hp.d_model, hp.vocab),
                     SplitDim::n, "vocab", hp.vocab)),
      MpSync::ig);
  output_emb.recipe.live_stacks = 0;
  layers.push_back(output_emb);

  LayerGraph g;
  g.kind = ModelKind::transformer;
  g.name = hp.name;
  g.total_params = detail::sum_params(layers);
  g.layers = std::move(layers);
  return g;
}

/// Width of the feature-interaction output: pairwise dot products among
/// the embedding vectors and the bottom-MLP output, concatenated with the
/// bottom-MLP output itself.
inline Count dlrm_interaction_width(const DlrmParams& p) {
  const Count vectors = p.num_tables + 1;
  return vectors * (vectors - 1) / 2 + p.embedding_dim;
}

/// Embedding tables (one table_lookup row, stacked per table, sharded
/// table-wise over MP with all-to-all exchange), bottom MLP, interaction,
/// top MLP. MLP weights are replicated on every node and all-reduce their
/// gradients across the whole cluster.
inline LayerGraph build_dlrm(const ModelHyperParams& hp) {
  if (hp.kind != ModelKind::dlrm) throw ConfigError("build_dlrm: model_kind is not 'dlrm'");
  if (!hp.dlrm) throw ConfigError("build_dlrm: missing 'dlrm' parameters");
  const DlrmParams& p = *hp.dlrm;
  using detail::require_positive;
  require_positive(p.num_tables, "dlrm.num_tables");
  require_positive(p.rows_per_table, "dlrm.rows_per_table");
  require_positive(p.embedding_dim, "dlrm.embedding_dim");
  if (p.bottom_mlp.size() < 2) throw ConfigError("'dlrm.bottom_mlp' needs at least two widths");
  if (p.top_mlp.empty()) throw ConfigError("'dlrm.top_mlp' needs at least one width");
  for (Count w : p.bottom_mlp) require_positive(w, "dlrm.bottom_mlp");
  for (Count w : p.top_mlp) require_positive(w, "dlrm.top_mlp");
  if (p.bottom_mlp.back() != p.embedding_dim) {
    throw ConfigError("'dlrm.bottom_mlp' must end with embedding_dim");
  }
  detail::check_batch(hp);

  const Count samples = detail::unsharded_batch(hp);
  const LayerRecipe base = detail::base_recipe(hp, BatchSplit::world);
  std::vector<LayerDescriptor> layers;

  LayerDescriptor emb;
  emb.name = "embedding_lookup";
  emb.kind = LayerKind::table_lookup;
  emb.stacks = p.num_tables;
  emb.m = samples;
  emb.k = p.rows_per_table;
  emb.n = p.embedding_dim;
  emb.bytes_per_element = hp.bytes_per_element;
  emb.recipe = base;
  emb.recipe.split = SplitDim::stacks;
  emb.recipe.split_field = "dlrm.num_tables";
  emb.recipe.split_base = p.num_tables;
  emb.recipe.m_group_gather = 1;
  emb.recipe.weights = true;
  emb.recipe.mp_sync = MpSync::both;
  emb.recipe.mp_collective = Collective::all_to_all;
  emb.recipe.grad_scope = GradScope::dp;
  emb.recipe.live_stacks = p.num_tables;
  layers.push_back(emb);

  auto mlp = [&](std::string name, Count in, Count out) {
    LayerDescriptor l;
    l.name = std::move(name);
    l.kind = LayerKind::gemm;
    l.m = samples;
    l.k = in;
    l.n = out;
    l.bytes_per_element = hp.bytes_per_element;
    l.recipe = base;
    l.recipe.weights = true;
    l.recipe.grad_scope = GradScope::world;
    l.recipe.live_stacks = 1;
    return l;
  };
  for (std::size_t i = 0; i + 1 < p.bottom_mlp.size(); ++i) {
    layers.push_back(mlp("bottom_mlp_" + std::to_string(i), p.bottom_mlp[i], p.bottom_mlp[i + 1]));
  }

  LayerDescriptor inter;
  inter.name = "interaction";
  inter.kind = LayerKind::elementwise;
  inter.m = samples;
  inter.k = 1;
  inter.n = dlrm_interaction_width(p);
  inter.bytes_per_element = hp.bytes_per_element;
  inter.recipe = base;
  inter.recipe.live_stacks = 1;
  layers.push_back(inter);

  Count in = inter.n;
  for (std::size_t i = 0; i < p.top_mlp.size(); ++i) {
    layers.push_back(mlp("top_mlp_" + std::to_string(i), in, p.top_mlp[i]));
    in = p.top_mlp[i];
  }

  LayerGraph g;
  g.kind = ModelKind::dlrm;
  g.name = hp.name;
  g.total_params = detail::sum_params(layers);
  g.layers = std::move(layers);
  return g;
}

inline LayerGraph build_graph(const ModelHyperParams& hp) {
  return hp.kind == ModelKind::transformer ? build_transformer(hp) : build_dlrm(hp);
}

/// Floating-point operations of one layer in one phase, summed over stacks.
/// One multiply-accumulate counts as two FLOPs; both backward GEMMs have the
/// forward GEMM's shape. Element-wise layers cost one FLOP per output element.
inline Flops layer_flops(const LayerDescriptor& l, Phase phase) {
  const double m = static_cast<double>(l.m);
  const double k = static_cast<double>(l.k);
  const double n = static_cast<double>(l.n);
  const double st = static_cast<double>(l.stacks);
  switch (l.kind) {
    case LayerKind::gemm:
    case LayerKind::table_update:
      return 2.0 * m * k * n * st;
    case LayerKind::elementwise:
      return m * n * st;
    case LayerKind::table_lookup:
      return phase == Phase::ig ? 0.0 : m * n * st;
  }
  return 0.0;
}

}  // namespace cdse
