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


#include <gtest/gtest.h>

#include "support.hpp"

namespace cdse {
namespace {

using testing::default_transformer;

Count sharded_weights(const LayerGraph& g, const ParallelConfig& cfg) {
  Count total = 0;
  for (const auto& l : shard_graph(g, cfg)) total += l.weight_params();
  return total;
}

TEST(Strategy, Enumerate) {
  const auto all = enumerate_strategies(1024);
  ASSERT_EQ(all.size(), 11u);
  EXPECT_EQ(all.front(), (ParallelConfig{1024, 1}));
  EXPECT_EQ(all.back(), (ParallelConfig{1, 1024}));
  EXPECT_EQ(enumerate_strategies(1), (std::vector<ParallelConfig>{{1, 1}}));
  EXPECT_EQ(enumerate_strategies(8), (std::vector<ParallelConfig>{{8, 1}, {4, 2}, {2, 4}, {1, 8}}));
  EXPECT_THROW(enumerate_strategies(12), ConfigError);
  EXPECT_THROW(enumerate_strategies(0), ConfigError);
}

TEST(Strategy, ParallelConfigValidation) {
  EXPECT_NO_THROW(validate(ParallelConfig{8, 128}, 1024));
  EXPECT_THROW(validate(ParallelConfig{8, 64}, 1024), ConfigError);
  EXPECT_THROW(validate(ParallelConfig{3, 4}, 12), ConfigError);
  EXPECT_THROW(ZeroStage(4), ConfigError);
}

TEST(Strategy, ShardMlpAndIdentity) {
  auto hp = default_transformer();
  hp.mini_batch = 0;
  hp.global_batch = 1024;
  const auto g = build_graph(hp);
  const auto& up = g.layers[10];
  ASSERT_EQ(up.name, "mlp_up");
  const auto s8 = shard_layer(up, {8, 128});
  EXPECT_EQ(s8.n, hp.ff_dim / 8);
  EXPECT_EQ(s8.m, 1024 / 128 * hp.seq);
  const auto s1 = shard_layer(up, {1, 1024});
  EXPECT_EQ(s1.n, up.n);
  EXPECT_EQ(s1.k, up.k);
  EXPECT_EQ(s1.m, 1 * hp.seq);
  // Replicated layers keep their width.
  EXPECT_EQ(shard_layer(g.layers[1], {8, 128}).n, hp.d_model);
}

TEST(Strategy, ShardIndivisibleIsConfigError) {
  auto hp = default_transformer();
  hp.n_heads = 12;
  hp.d_k = hp.d_v = 4096;
  const auto g = build_graph(hp);
  try {
    shard_layer(g.layers[2], {8, 128});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_heads"), std::string::npos);
  }
}

TEST(Strategy, ShardedWeightsHalveWithMp) {
  const auto g = build_graph(default_transformer());
  // Frozen from an independent recount of the sharded rows.
  EXPECT_EQ(sharded_weights(g, {2, 512}), 518751518720LL);
  EXPECT_EQ(sharded_weights(g, {4, 256}), 259375759360LL);
}

TEST(Strategy, ClusterHoldsDpModelCopies) {
  const auto g = build_graph(default_transformer());
  for (const auto& cfg : enumerate_strategies(1024)) {
    const double per_node_weight_bytes = 2.0 * static_cast<double>(sharded_weights(g, cfg));
    EXPECT_EQ(per_node_weight_bytes * static_cast<double>(cfg.nodes()),
              static_cast<double>(cfg.dp) * 2.0 * static_cast<double>(g.total_params))
        << cfg.label();
  }
}

TEST(Strategy, ModelStateExamples) {
  EXPECT_EQ(model_state_bytes(1, {1, 1}, ZeroStage(2)), 16.0);
  EXPECT_EQ(model_state_bytes(64, {2, 4}, ZeroStage(0)), 16.0 * 32);
  EXPECT_EQ(model_state_bytes(64, {2, 4}, ZeroStage(1)), 4.0 * 32 + 12.0 * 8);
  EXPECT_EQ(model_state_bytes(64, {2, 4}, ZeroStage(2)), 2.0 * 32 + 14.0 * 8);
  EXPECT_EQ(model_state_bytes(64, {2, 4}, ZeroStage(3)), 16.0 * 8);
}

TEST(Strategy, StageZeroDoublesWithDp) {
  const auto g = build_graph(default_transformer());
  const auto all = enumerate_strategies(1024);
  for (std::size_t i = 1; i < all.size(); ++i) {
    EXPECT_EQ(model_state_bytes(g.total_params, all[i], ZeroStage(0)),
              2.0 * model_state_bytes(g.total_params, all[i - 1], ZeroStage(0)));
  }
}

TEST(Strategy, StageThreeConstant) {
  const auto g = build_graph(default_transformer());
  const double ref = model_state_bytes(g.total_params, {1024, 1}, ZeroStage(3));
  for (const auto& cfg : enumerate_strategies(1024)) {
    EXPECT_TRUE(testing::rel_close(model_state_bytes(g.total_params, cfg, ZeroStage(3)), ref, 1e-15));
  }
}

TEST(Strategy, FootprintMonotoneInMpAndStage) {
  const auto g = build_graph(default_transformer());
  for (int z = 0; z <= 2; ++z) {
    const auto all = enumerate_strategies(1024);
    double prev = footprint_per_node(g, all.back(), ZeroStage(z));
    for (auto i = all.size() - 1; i-- > 0;) {
      const double f = footprint_per_node(g, all[i], ZeroStage(z));
      EXPECT_LE(f, prev);
      prev = f;
    }
  }
  for (const auto& cfg : enumerate_strategies(1024)) {
    for (int z = 1; z <= 3; ++z) {
      const double hi = footprint_per_node(g, cfg, ZeroStage(z - 1));
      const double lo = footprint_per_node(g, cfg, ZeroStage(z));
      if (cfg.dp == 1) {
        EXPECT_EQ(lo, hi);
      } else {
        EXPECT_LT(lo, hi);
      }
    }
  }
}

TEST(Strategy, FootprintOrderIndependent) {
  auto g = build_graph(default_transformer());
  const double before = footprint_per_node(g, {8, 128}, ZeroStage(2));
  std::reverse(g.layers.begin(), g.layers.end());
  EXPECT_EQ(footprint_per_node(g, {8, 128}, ZeroStage(2)), before);
}

TEST(Strategy, TraceMpOneHasNoBlockingCollectives) {
  const auto g = build_graph(default_transformer());
  const auto t = build_trace(g, {1, 1024}, ZeroStage(2), testing::baseline().node);
  for (const auto& l : t.layers) {
    EXPECT_EQ(l.at(Phase::fp).collective, Collective::none);
    EXPECT_EQ(l.at(Phase::ig).collective, Collective::none);
  }
}

TEST(Strategy, TraceDpOneHasNoGradientTraffic) {
  const auto g = build_graph(default_transformer());
  const auto t = build_trace(g, {1024, 1}, ZeroStage(2), testing::baseline().node);
  for (const auto& l : t.layers) EXPECT_EQ(l.at(Phase::wg).comm_volume, 0.0);
}

TEST(Strategy, TraceMegatronSyncPoints) {
  const auto hp = default_transformer();
  const auto g = build_graph(hp);
  const auto t = build_trace(g, {8, 128}, ZeroStage(2), testing::baseline().node);
  const double bytes = static_cast<double>(hp.mini_batch * hp.seq * hp.d_model * 2);
  int per_block = 0;
  for (std::size_t i = 0; i < t.layers.size(); ++i) {
    const auto& task = t.layers[i].at(Phase::fp);
    if (task.collective == Collective::none || g.layers[i].stacks != hp.n_stacks) continue;
    ++per_block;
    EXPECT_EQ(task.collective, Collective::all_reduce);
    EXPECT_TRUE(task.blocking);
    EXPECT_EQ(task.count, hp.n_stacks * t.steps);
    EXPECT_EQ(task.comm_volume / static_cast<double>(task.count), bytes);
  }
  EXPECT_EQ(per_block, 2);
}

TEST(Strategy, TraceInvariants) {
  const auto node = testing::baseline().node;
  for (const auto& hp : {default_transformer(), testing::default_dlrm()}) {
    const auto g = build_graph(hp);
    for (const ParallelConfig cfg : {ParallelConfig{64, 16}, ParallelConfig{8, 128}, ParallelConfig{1, 1024}}) {
      for (int z = 0; z <= 3; ++z) {
        const auto t = build_trace(g, cfg, ZeroStage(z), node);
        ASSERT_EQ(t.layers.size(), g.layers.size());
        EXPECT_GT(t.per_node_footprint, 0);
        for (std::size_t i = 0; i < t.layers.size(); ++i) {
          EXPECT_EQ(t.layers[i].name, g.layers[i].name);
          for (Phase p : kPhases) {
            const auto& task = t.layers[i].at(p);
            EXPECT_EQ(task.collective == Collective::none, task.comm_volume == 0.0);
            if (task.collective != Collective::none) {
              EXPECT_EQ(task.blocking, task.comm_dim == CommDim::mp);
            }
          }
        }
      }
    }
  }
}

TEST(Strategy, ZeroThreeScalesGradientVolume) {
  const auto g = build_graph(default_transformer());
  const auto node = testing::baseline().node;
  const auto t2 = build_trace(g, {8, 128}, ZeroStage(2), node);
  const auto t3 = build_trace(g, {8, 128}, ZeroStage(3), node);
  const auto t0 = build_trace(g, {8, 128}, ZeroStage(0), node);
  for (std::size_t i = 0; i < t2.layers.size(); ++i) {
    const double v0 = t0.layers[i].at(Phase::wg).comm_volume;
    EXPECT_EQ(t2.layers[i].at(Phase::wg).comm_volume, 2.0 * v0);  // reduce-scatter + all-gather
    EXPECT_EQ(t3.layers[i].at(Phase::wg).comm_volume, 1.5 * 2.0 * v0);
  }
}

TEST(Strategy, DlrmAllToAllVolume) {
  const auto hp = testing::default_dlrm();
  const auto g = build_graph(hp);
  const auto t = build_trace(g, {64, 16}, ZeroStage(2), testing::baseline().node);
  const auto& emb = t.layers[0].at(Phase::fp);
  EXPECT_EQ(emb.collective, Collective::all_to_all);
  // Every node ends up with all tables for its share of the batch.
  const double per_node = static_cast<double>(hp.global_batch / 1024);
  EXPECT_EQ(emb.comm_volume, per_node * hp.dlrm->num_tables * hp.dlrm->embedding_dim * 2.0);
  EXPECT_EQ(t.layers[1].at(Phase::wg).comm_dim, CommDim::world);
}

}  // namespace
}  // namespace cdse
