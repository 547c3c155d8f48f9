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

using testing::default_dlrm;
using testing::default_transformer;

ModelHyperParams tiny_transformer() {
  ModelHyperParams hp;
  hp.kind = ModelKind::transformer;
  hp.name = "tiny";
  hp.d_model = 16;
  hp.n_stacks = 3;
  hp.n_heads = 4;
  hp.d_k = 4;
  hp.d_v = 4;
  hp.ff_dim = 64;
  hp.vocab = 32;
  hp.seq = 8;
  hp.mini_batch = 2;
  hp.global_batch = 8;
  return hp;
}

TEST(Workload, TransformerHasFourteenRowsWithStackMultiplicities) {
  const auto g = build_transformer(tiny_transformer());
  ASSERT_EQ(g.layers.size(), 14u);
  const std::vector<Count> stacks = {1, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 1};
  for (std::size_t i = 0; i < stacks.size(); ++i) EXPECT_EQ(g.layers[i].stacks, stacks[i]) << g.layers[i].name;
  EXPECT_EQ(g.layers.front().kind, LayerKind::table_lookup);
  EXPECT_EQ(g.layers.back().kind, LayerKind::table_update);
}

TEST(Workload, AttentionScoreDims) {
  const auto hp = tiny_transformer();
  const auto g = build_transformer(hp);
  const auto& score = g.layers[5];
  EXPECT_EQ(score.name, "attention_score");
  EXPECT_EQ(score.m, hp.mini_batch * hp.seq);
  EXPECT_EQ(score.k, hp.n_heads * hp.d_k);
  EXPECT_EQ(score.n, hp.mini_batch * hp.seq);
  const auto& q = g.layers[2];
  EXPECT_EQ(q.k, hp.d_model);
  EXPECT_EQ(q.n, hp.n_heads * hp.d_k);
}

TEST(Workload, UnitBatchGivesUnitM) {
  auto hp = tiny_transformer();
  hp.seq = 1;
  hp.mini_batch = 1;
  hp.global_batch = 1;
  for (const auto& l : build_transformer(hp).layers) EXPECT_EQ(l.m, 1) << l.name;
}

TEST(Workload, TotalParamsIsSumOfWeightMatrices) {
  const auto hp = tiny_transformer();
  const auto g = build_transformer(hp);
  const Count d = hp.d_model, h = hp.n_heads, ff = hp.ff_dim, v = hp.vocab;
  const Count expected = hp.n_stacks * (3 * d * h * hp.d_k + h * hp.d_v * d + 2 * d * ff) + 2 * v * d;
  EXPECT_EQ(g.total_params, expected);
}

// Frozen from an independent row-by-row recount of the default config.
TEST(Workload, DefaultTransformerParameterCount) {
  const auto g = build_graph(default_transformer());
  EXPECT_EQ(g.total_params, 1037503037440LL);
  EXPECT_NEAR(static_cast<double>(g.total_params) / 1e12, 1.0, 0.05);
}

TEST(Workload, DefaultTransformerForwardFlops) {
  const auto g = build_graph(default_transformer());
  double fp = 0;
  for (const auto& l : g.layers) fp += layer_flops(l, Phase::fp);
  EXPECT_EQ(fp, 4249069262209024.0);
}

TEST(Workload, DefaultDlrmParameterCount) {
  const auto hp = default_dlrm();
  const auto g = build_graph(hp);
  EXPECT_EQ(g.total_params, 1196080369664LL);
  EXPECT_NEAR(static_cast<double>(g.total_params) / 1.2e12, 1.0, 0.05);
  EXPECT_EQ(dlrm_interaction_width(*hp.dlrm), 2336);
}

TEST(Workload, DlrmTagsCollectives) {
  const auto g = build_graph(default_dlrm());
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::table_lookup) {
      EXPECT_EQ(l.recipe.mp_collective, Collective::all_to_all);
    } else if (l.kind == LayerKind::gemm) {
      EXPECT_TRUE(l.recipe.weights);
      EXPECT_EQ(l.recipe.mp_collective, Collective::none);
    }
  }
}

TEST(Workload, DlrmSingleTableSingleRow) {
  ModelHyperParams hp;
  hp.kind = ModelKind::dlrm;
  hp.global_batch = 4;
  hp.dlrm = DlrmParams{1, 1, 2, {3, 2}, {1}};
  const auto g = build_dlrm(hp);
  EXPECT_EQ(g.layers[0].kind, LayerKind::table_lookup);
  EXPECT_EQ(g.layers[0].k, 1);
  EXPECT_EQ(g.layers[0].stacks, 1);
}

TEST(Workload, DlrmWithoutParamsIsConfigError) {
  ModelHyperParams hp;
  hp.kind = ModelKind::dlrm;
  EXPECT_THROW(build_dlrm(hp), ConfigError);
  EXPECT_THROW(build_transformer(hp), ConfigError);
}

TEST(Workload, InvalidFieldNamedInError) {
  auto hp = tiny_transformer();
  hp.n_heads = 0;
  try {
    build_transformer(hp);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_heads"), std::string::npos);
  }
}

TEST(Workload, GemmFlops) {
  LayerDescriptor l;
  l.kind = LayerKind::gemm;
  l.m = l.k = l.n = 2;
  EXPECT_EQ(layer_flops(l, Phase::fp), 16.0);
  l.m = l.k = l.n = 1;
  for (Phase p : kPhases) EXPECT_EQ(layer_flops(l, p), 2.0);
}

TEST(Workload, LookupFlopsPerPhase) {
  LayerDescriptor l;
  l.kind = LayerKind::table_lookup;
  l.m = 3;
  l.n = 5;
  EXPECT_EQ(layer_flops(l, Phase::fp), 15.0);
  EXPECT_EQ(layer_flops(l, Phase::ig), 0.0);
  EXPECT_EQ(layer_flops(l, Phase::wg), 15.0);
}

TEST(Workload, FlopsLinearInMAndStacks) {
  for (auto kind : {LayerKind::gemm, LayerKind::elementwise, LayerKind::table_update}) {
    LayerDescriptor l;
    l.kind = kind;
    l.m = 7;
    l.k = 3;
    l.n = 5;
    l.stacks = 2;
    const double base = layer_flops(l, Phase::fp);
    l.m *= 3;
    EXPECT_EQ(layer_flops(l, Phase::fp), 3 * base);
    l.stacks *= 5;
    EXPECT_EQ(layer_flops(l, Phase::fp), 15 * base);
  }
}

}  // namespace
}  // namespace cdse
