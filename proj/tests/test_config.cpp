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

#include <filesystem>

#include "support.hpp"

namespace cdse {
namespace {

namespace fs = std::filesystem;

std::vector<fs::path> config_files(const std::string& sub) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(testing::source_path("configs/" + sub))) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

bool close_cluster(const ClusterConfig& a, const ClusterConfig& b) {
  auto eq = [](double x, double y) { return testing::rel_close(x, y, 1e-15); };
  const auto &ca = a.cluster, &cb = b.cluster;
  const auto &na = a.node, &nb = b.node;
  return ca.name == cb.name && ca.n_nodes == cb.n_nodes && ca.pod_size == cb.pod_size &&
         ca.topology == cb.topology && ca.algo == cb.algo && ca.torus_dims == cb.torus_dims &&
         eq(ca.intra_bw, cb.intra_bw) && eq(ca.inter_bw, cb.inter_bw) && eq(ca.torus_link_bw, cb.torus_link_bw) &&
         eq(ca.link_latency, cb.link_latency) && eq(na.perf_peak, nb.perf_peak) &&
         eq(na.on_chip_bytes, nb.on_chip_bytes) && eq(na.lm_capacity, nb.lm_capacity) && eq(na.lm_bw, nb.lm_bw) &&
         eq(na.em_capacity, nb.em_capacity) && eq(na.em_bw, nb.em_bw);
}

TEST(Config, ModelFilesRoundTrip) {
  for (const auto& p : config_files("models")) {
    const auto hp = load_model(p);
    EXPECT_NO_THROW(build_graph(hp)) << p;
    for (ConfigFormat f : {ConfigFormat::yaml, ConfigFormat::json}) {
      const auto text = dump_document(model_to_json(hp), f);
      EXPECT_EQ(model_from_json(parse_document(text, f)), hp) << p;
    }
  }
}

TEST(Config, JsonMirrorMatchesYaml) {
  const auto yaml = load_model(testing::source_path("configs/models/transformer_1t.yaml"));
  const auto json = load_model(testing::source_path("configs/models/transformer_1t.json"));
  EXPECT_EQ(yaml, json);
}

TEST(Config, ClusterFilesRoundTrip) {
  const auto files = config_files("clusters");
  EXPECT_EQ(files.size(), 12u);
  for (const auto& p : files) {
    const auto cc = load_cluster(p);
    for (ConfigFormat f : {ConfigFormat::yaml, ConfigFormat::json}) {
      const auto text = dump_document(cluster_to_json(cc), f);
      EXPECT_TRUE(close_cluster(cluster_from_json(parse_document(text, f)), cc)) << p;
    }
  }
}

TEST(Config, SweepFilesRoundTrip) {
  for (const auto& p : config_files("sweeps")) {
    const auto spec = load_sweep(p);
    for (ConfigFormat f : {ConfigFormat::yaml, ConfigFormat::json}) {
      const auto text = dump_document(sweep_to_json(spec), f);
      EXPECT_EQ(sweep_from_json(parse_document(text, f)), spec) << p;
    }
  }
}

TEST(Config, BaselineValues) {
  const auto b = testing::baseline();
  EXPECT_EQ(b.node.perf_peak, 624e12);
  EXPECT_EQ(b.node.lm_bw, 2039e9);
  EXPECT_EQ(b.node.lm_capacity, 80e9);
  EXPECT_EQ(b.node.on_chip_bytes, 40e6);
  EXPECT_EQ(b.cluster.n_nodes, 1024);
  EXPECT_EQ(b.cluster.pod_size, 8);
  EXPECT_EQ(b.cluster.intra_bw, 300e9);
  EXPECT_EQ(b.cluster.inter_bw, 31.25e9);
}

TEST(Config, PresetValues) {
  const auto tpu = load_cluster(testing::source_path("configs/clusters/tpu_v4.yaml"));
  EXPECT_EQ(tpu.cluster.topology, Topology::torus3d);
  EXPECT_EQ(tpu.cluster.n_nodes, 4096);
  EXPECT_EQ(tpu.node.em_capacity, 39e9);
  const auto dojo = load_cluster(testing::source_path("configs/clusters/dojo.yaml"));
  EXPECT_EQ(dojo.cluster.topology, Topology::single_switch);
  EXPECT_EQ(dojo.cluster.intra_bw, 1000e9);
  EXPECT_EQ(dojo.node.perf_peak, 54300e12);
  const auto c1 = load_cluster(testing::source_path("configs/clusters/c1.yaml"));
  EXPECT_EQ(c1.node.em_capacity, 480e9);
  EXPECT_EQ(c1.node.em_bw, 500e9);
  EXPECT_EQ(c1.cluster.pod_size, 16);
}

TEST(Config, Errors) {
  EXPECT_THROW(load_model(testing::source_path("configs/models/missing.yaml")), IoError);
  EXPECT_THROW(parse_document("model: [unclosed", ConfigFormat::yaml), ConfigError);
  EXPECT_THROW(parse_document("{\"model\": ", ConfigFormat::json), ConfigError);
  try {
    model_from_json(parse_document("model: {kind: transformer, d_model: 8, colour: red}", ConfigFormat::yaml));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  EXPECT_THROW(model_from_json(parse_document("model: {kind: gpt}", ConfigFormat::yaml)), ConfigError);
  try {
    sweep_from_json(parse_document("sweep: {axes: [{path: node.colour, values: [1]}]}", ConfigFormat::yaml));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("node.em_bw_gbps"), std::string::npos);
  }
  EXPECT_THROW(sweep_from_json(parse_document("sweep: {axes: [{path: cluster.bw_ratio, values: [2]}]}",
                                              ConfigFormat::yaml)),
               ConfigError);
  EXPECT_THROW(sweep_from_json(parse_document("sweep: {axes: [{path: mp_dp, values: []}]}", ConfigFormat::yaml)),
               ConfigError);
}

TEST(Config, QuotedStringsStayStrings) {
  const auto j = parse_document("a: \"123\"\nb: 123\nc: 1.5\nd: MP8_DP128\n", ConfigFormat::yaml);
  EXPECT_TRUE(j["a"].is_string());
  EXPECT_TRUE(j["b"].is_number_integer());
  EXPECT_TRUE(j["c"].is_number_float());
  EXPECT_TRUE(j["d"].is_string());
  EXPECT_EQ(parse_document(dump_document(j, ConfigFormat::yaml), ConfigFormat::yaml), j);
}

TEST(Trace, JsonRoundTripAndCsvShape) {
  const auto g = build_graph(testing::default_transformer());
  const auto t = build_trace(g, {8, 128}, ZeroStage(2), testing::baseline().node);
  const auto back = trace_from_json(Json::parse(trace_to_json(t).dump()));
  EXPECT_EQ(back, t);
  const auto csv = trace_to_csv(t);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(1 + 3 * t.layers.size() + 1));
  EXPECT_EQ(csv.rfind(kTraceCsvHeader, 0), 0u);
}

}  // namespace
}  // namespace cdse
