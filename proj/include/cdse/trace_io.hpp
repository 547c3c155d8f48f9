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

// Workload trace files. CSV has one row per layer per phase; JSON carries
// the same rows plus the trace header and reads back losslessly.

#include <filesystem>
#include <fstream>
#include <string>

#include "cdse/config.hpp"
#include "cdse/strategy.hpp"

namespace cdse {

inline const char* kTraceCsvHeader =
    "layer,kind,phase,flops,mem_traffic,collective,comm_volume,comm_dim,blocking,count\n";

namespace trace_detail {

inline std::string fmt(double v) { return config_detail::format_double(v); }

inline LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::gemm, LayerKind::elementwise, LayerKind::table_lookup, LayerKind::table_update}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown layer kind '" + s + "'");
}

inline CommDim comm_dim_from_string(const std::string& s) {
  for (CommDim d : {CommDim::mp, CommDim::dp, CommDim::world}) {
    if (to_string(d) == s) return d;
  }
  throw ConfigError("unknown comm_dim '" + s + "'");
}

inline Json task_to_json(const PhaseTask& t) {
  return {{"flops", t.flops},
          {"mem_traffic", t.mem_traffic},
          {"collective", std::string(to_string(t.collective))},
          {"comm_volume", t.comm_volume},
          {"comm_dim", std::string(to_string(t.comm_dim))},
          {"blocking", t.blocking},
          {"count", t.count},
          {"gather_after", t.gather_after}};
}

inline PhaseTask task_from_json(const Json& j, const std::string& where) {
  config_detail::Section s(j, where);
  PhaseTask t;
  t.flops = s.number("flops");
  t.mem_traffic = s.number("mem_traffic");
  t.collective = collective_from_string(s.string("collective", "none"));
  t.comm_volume = s.number("comm_volume", 0);
  t.comm_dim = comm_dim_from_string(s.string("comm_dim", "mp"));
  s.allow("blocking");
  t.blocking = s.has("blocking") && s.raw("blocking").get<bool>();
  t.count = s.integer("count", 0);
  s.allow("gather_after");
  t.gather_after = s.has("gather_after") && s.raw("gather_after").get<bool>();
  s.finish();
  if ((t.collective == Collective::none) != (t.comm_volume == 0)) {
    throw ConfigError("'" + where + "': comm_volume must be zero exactly when collective is none");
  }
  return t;
}

}  // namespace trace_detail

inline std::string trace_to_csv(const WorkloadTrace& t) {
  using trace_detail::fmt;
  std::string out = kTraceCsvHeader;
  for (const auto& l : t.layers) {
    for (Phase p : kPhases) {
      const PhaseTask& k = l.at(p);
      out += l.name + "," + std::string(to_string(l.kind)) + "," + std::string(to_string(p)) + "," +
             fmt(k.flops) + "," + fmt(k.mem_traffic) + "," + std::string(to_string(k.collective)) + "," +
             fmt(k.comm_volume) + "," + std::string(to_string(k.comm_dim)) + "," +
             (k.blocking ? "true" : "false") + "," + std::to_string(k.count) + "\n";
    }
  }
  out += "weight_update,elementwise,wg," + fmt(t.weight_update.flops) + "," + fmt(t.weight_update.mem_traffic) +
         ",none,0,dp,false,0\n";
  return out;
}

inline Json trace_to_json(const WorkloadTrace& t) {
  Json layers = Json::array();
  for (const auto& l : t.layers) {
    Json row;
    row["name"] = l.name;
    row["kind"] = std::string(to_string(l.kind));
    for (Phase p : kPhases) row[std::string(to_string(p))] = trace_detail::task_to_json(l.at(p));
    layers.push_back(row);
  }
  Json doc;
  doc["trace"] = {{"model", t.model},
                  {"mp_dp", t.cfg.label()},
                  {"mp", t.cfg.mp},
                  {"dp", t.cfg.dp},
                  {"zero_stage", t.zero.stage},
                  {"steps", t.steps},
                  {"per_node_footprint", t.per_node_footprint},
                  {"model_state_bytes", t.footprint.model_states},
                  {"activation_bytes", t.footprint.activations},
                  {"weight_update", trace_detail::task_to_json(t.weight_update)},
                  {"layers", layers}};
  return doc;
}

inline WorkloadTrace trace_from_json(const Json& doc) {
  config_detail::Section root(doc, "");
  config_detail::Section s = root.section("trace");
  root.finish();
  WorkloadTrace t;
  t.model = s.string("model", "");
  s.allow("mp_dp");
  t.cfg = {s.integer("mp"), s.integer("dp")};
  t.zero = ZeroStage(static_cast<int>(s.integer("zero_stage", 2)));
  t.steps = s.integer("steps", 1);
  t.per_node_footprint = s.number("per_node_footprint");
  t.footprint.model_states = s.number("model_state_bytes", 0);
  t.footprint.activations = s.number("activation_bytes", 0);
  t.weight_update = trace_detail::task_from_json(s.raw("weight_update"), "trace.weight_update");
  const Json& layers = s.raw("layers");
  if (!layers.is_array()) throw ConfigError("'trace.layers' must be a list");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "trace.layers[" + std::to_string(i) + "]";
    config_detail::Section ls(layers[i], where);
    TraceLayer l;
    l.name = ls.string("name");
    l.kind = trace_detail::layer_kind_from_string(ls.string("kind"));
    for (Phase p : kPhases) {
      const std::string key(to_string(p));
      l.at(p) = trace_detail::task_from_json(ls.raw(key), where + "." + key);
    }
    ls.finish();
    t.layers.push_back(std::move(l));
  }
  s.finish();
  return t;
}

inline void save_trace(const WorkloadTrace& t, const std::filesystem::path& path) {
  const std::string text =
      path.extension() == ".json" ? trace_to_json(t).dump(2) + "\n" : trace_to_csv(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace cdse
