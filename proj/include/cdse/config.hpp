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

// Configuration files. Models, clusters and sweeps share one schema that
// is read from YAML or JSON; YAML documents are converted to JSON values
// first, so both syntaxes accept exactly the same keys.
//
// Units are part of the key names: *_gbps is 1e9 bytes/s, *_gb is 1e9
// bytes, on_chip_mb is 1e6 bytes, peak_tflops is 1e12 FLOP/s and
// link_latency_us is microseconds.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdse/error.hpp"
#include "cdse/network.hpp"
#include "cdse/perfmodel.hpp"
#include "cdse/workload.hpp"

namespace cdse {

using Json = nlohmann::ordered_json;

enum class ConfigFormat { yaml, json };

namespace config_detail {

inline constexpr double kGiga = 1e9;
inline constexpr double kMega = 1e6;
inline constexpr double kTera = 1e12;
inline constexpr double kMicro = 1e-6;

inline Json scalar_to_json(const std::string& s, bool quoted) {
  if (quoted) return s;
  if (s == "true") return true;
  if (s == "false") return false;
  if (s == "null" || s == "~") return nullptr;
  if (!s.empty()) {
    std::size_t pos = 0;
    try {
      const long long v = std::stoll(s, &pos);
      if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    try {
      const double v = std::stod(s, &pos);
      if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return s;
}

inline Json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_to_json(n.Scalar(), n.Tag() == "!");
    case YAML::NodeType::Sequence: {
      Json a = Json::array();
      for (const auto& e : n) a.push_back(yaml_to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      Json o = Json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that reads back identically.
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[32];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

inline void emit_yaml(YAML::Emitter& out, const Json& j) {
  if (j.is_object()) {
    out << YAML::BeginMap;
    for (const auto& [k, v] : j.items()) {
      out << YAML::Key << k << YAML::Value;
      emit_yaml(out, v);
    }
    out << YAML::EndMap;
  } else if (j.is_array()) {
    const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
    out << (flat ? YAML::Flow : YAML::Block) << YAML::BeginSeq;
    for (const auto& e : j) emit_yaml(out, e);
    out << YAML::EndSeq;
  } else if (j.is_boolean()) {
    out << (j.get<bool>() ? "true" : "false");
  } else if (j.is_number_integer()) {
    out << j.get<long long>();
  } else if (j.is_number()) {
    out << format_double(j.get<double>());
  } else if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (!scalar_to_json(s, false).is_string()) {
      out << YAML::DoubleQuoted << s;
    } else {
      out << s;
    }
  } else {
    out << YAML::Null;
  }
}

// Strict object reader: every key must be consumed or listed as known.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be a mapping");
  }

  // Marks an optional key as known without reading it.
  void allow(const std::string& key) { seen_.insert(key); }

  // Declares the complete key set up front so a typo is reported before
  // any missing-key error it may cause.
  void only(std::initializer_list<const char*> keys) const {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!known.count(k)) {
        std::string list;
        for (const auto& s : known) list += (list.empty() ? "" : ", ") + s;
        throw ConfigError("unknown key '" + where(k) + "' (valid keys: " + list + ")");
      }
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError("missing required key '" + where(key) + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError("'" + where(key) + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("'" + where(key) + "' must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    return has(key) ? number(key) : fallback;
  }

  Count integer(const std::string& key) {
    const Json& v = raw(key);
    if (v.is_number_integer()) return v.get<Count>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<Count>(d);
    }
    throw ConfigError("'" + where(key) + "' must be an integer");
  }
  Count integer(const std::string& key, Count fallback) {
    seen_.insert(key);
    return has(key) ? integer(key) : fallback;
  }

  std::string string(const std::string& key) {
    const Json& v = raw(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();
    throw ConfigError("'" + where(key) + "' must be a string");
  }
  std::string string(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    return has(key) ? string(key) : fallback;
  }

  std::vector<Count> integers(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) throw ConfigError("'" + where(key) + "' must be a list of integers");
    std::vector<Count> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError("'" + where(key) + "' must be a list of integers");
      out.push_back(e.get<Count>());
    }
    return out;
  }

  Section section(const std::string& key) {
    raw(key);
    return Section(j_.at(key), where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) {
        std::string known;
        for (const auto& s : seen_) known += (known.empty() ? "" : ", ") + s;
        throw ConfigError("unknown key '" + where(k) + "' (valid keys: " + known + ")");
      }
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return ss.str();
}

}  // namespace config_detail

inline ConfigFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".json" ? ConfigFormat::json : ConfigFormat::yaml;
}

inline Json parse_document(const std::string& text, ConfigFormat fmt) {
  try {
    if (fmt == ConfigFormat::json) return Json::parse(text);
    return config_detail::yaml_to_json(YAML::Load(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
}

inline Json load_document(const std::filesystem::path& path) {
  try {
    return parse_document(config_detail::read_text(path), format_for(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::string dump_document(const Json& j, ConfigFormat fmt) {
  if (fmt == ConfigFormat::json) return j.dump(2) + "\n";
  YAML::Emitter out;
  config_detail::emit_yaml(out, j);
  return std::string(out.c_str()) + "\n";
}

inline void save_document(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << dump_document(j, format_for(path));
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

// ---- model ----------------------------------------------------------------

inline ModelHyperParams model_from_json(const Json& doc) {
  config_detail::Section root(doc, "");
  config_detail::Section m = root.section("model");
  root.finish();
  m.only({"kind", "name", "d_model", "n_stacks", "n_heads", "d_k", "d_v", "ff_dim", "vocab", "seq", "mini_batch",
          "global_batch", "bytes_per_element", "dlrm"});
  ModelHyperParams hp;
  const std::string kind = m.string("kind");
  if (kind == "transformer") {
    hp.kind = ModelKind::transformer;
  } else if (kind == "dlrm") {
    hp.kind = ModelKind::dlrm;
  } else {
    throw ConfigError("'model.kind' must be 'transformer' or 'dlrm' (got '" + kind + "')");
  }
  hp.name = m.string("name", kind);
  const bool tf = hp.kind == ModelKind::transformer;
  hp.d_model = tf ? m.integer("d_model") : m.integer("d_model", 0);
  hp.n_stacks = tf ? m.integer("n_stacks") : m.integer("n_stacks", 0);
  hp.n_heads = tf ? m.integer("n_heads") : m.integer("n_heads", 0);
  hp.d_k = tf ? m.integer("d_k") : m.integer("d_k", 0);
  hp.d_v = tf ? m.integer("d_v") : m.integer("d_v", 0);
  hp.ff_dim = tf ? m.integer("ff_dim") : m.integer("ff_dim", 0);
  hp.vocab = tf ? m.integer("vocab") : m.integer("vocab", 0);
  hp.seq = m.integer("seq", 1);
  hp.mini_batch = m.integer("mini_batch", 0);
  hp.global_batch = m.integer("global_batch");
  hp.bytes_per_element = m.integer("bytes_per_element", 2);
  if (m.has("dlrm") || !tf) {
    config_detail::Section d = m.section("dlrm");
    d.only({"num_tables", "rows_per_table", "embedding_dim", "bottom_mlp", "top_mlp"});
    DlrmParams p;
    p.num_tables = d.integer("num_tables");
    p.rows_per_table = d.integer("rows_per_table");
    p.embedding_dim = d.integer("embedding_dim");
    p.bottom_mlp = d.integers("bottom_mlp");
    p.top_mlp = d.integers("top_mlp");
    d.finish();
    hp.dlrm = p;
  }
  m.finish();
  return hp;
}

inline Json model_to_json(const ModelHyperParams& hp) {
  Json m;
  m["kind"] = hp.kind == ModelKind::transformer ? "transformer" : "dlrm";
  m["name"] = hp.name;
  if (hp.kind == ModelKind::transformer) {
    m["d_model"] = hp.d_model;
    m["n_stacks"] = hp.n_stacks;
    m["n_heads"] = hp.n_heads;
    m["d_k"] = hp.d_k;
    m["d_v"] = hp.d_v;
    m["ff_dim"] = hp.ff_dim;
    m["vocab"] = hp.vocab;
  }
  m["seq"] = hp.seq;
  m["mini_batch"] = hp.mini_batch;
  m["global_batch"] = hp.global_batch;
  m["bytes_per_element"] = hp.bytes_per_element;
  if (hp.dlrm) {
    Json d;
    d["num_tables"] = hp.dlrm->num_tables;
    d["rows_per_table"] = hp.dlrm->rows_per_table;
    d["embedding_dim"] = hp.dlrm->embedding_dim;
    d["bottom_mlp"] = hp.dlrm->bottom_mlp;
    d["top_mlp"] = hp.dlrm->top_mlp;
    m["dlrm"] = d;
  }
  Json doc;
  doc["model"] = m;
  return doc;
}

inline ModelHyperParams load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(load_document(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + msg);
  }
}

// ---- cluster + node ---------------------------------------------------------

// A cluster file describes the network and the per-node hardware.
struct ClusterConfig {
  ClusterSpec cluster;
  NodeSpec node;

  bool operator==(const ClusterConfig&) const = default;
};

inline ClusterConfig cluster_from_json(const Json& doc) {
  using config_detail::kGiga;
  using config_detail::kMega;
  using config_detail::kMicro;
  using config_detail::kTera;
  config_detail::Section root(doc, "");
  config_detail::Section c = root.section("cluster");
  config_detail::Section n = root.section("node");
  root.finish();
  c.only({"name", "n_nodes", "topology", "collective_algo", "link_latency_us", "pod_size", "intra_bw_gbps",
          "inter_bw_gbps", "torus"});
  n.only({"peak_tflops", "on_chip_mb", "lm_capacity_gb", "lm_bw_gbps", "em_capacity_gb", "em_bw_gbps"});

  ClusterConfig out;
  ClusterSpec& s = out.cluster;
  s.name = c.string("name", "cluster");
  s.n_nodes = c.integer("n_nodes");
  s.topology = topology_from_string(c.string("topology", "two_level_switch"));
  s.algo = collective_algo_from_string(c.string("collective_algo", "hierarchical"));
  s.link_latency = c.number("link_latency_us", 0) * kMicro;
  switch (s.topology) {
    case Topology::two_level_switch:
      s.pod_size = c.integer("pod_size");
      s.intra_bw = c.number("intra_bw_gbps") * kGiga;
      s.inter_bw = c.number("inter_bw_gbps") * kGiga;
      break;
    case Topology::single_switch:
      s.pod_size = c.integer("pod_size", s.n_nodes);
      s.intra_bw = c.number("intra_bw_gbps") * kGiga;
      s.inter_bw = s.intra_bw;
      break;
    case Topology::torus3d: {
      config_detail::Section t = c.section("torus");
      const auto dims = t.integers("dims");
      if (dims.size() != 3) throw ConfigError("'cluster.torus.dims' must list three extents");
      s.torus_dims = {dims[0], dims[1], dims[2]};
      s.torus_link_bw = t.number("link_bw_gbps") * kGiga;
      t.finish();
      s.pod_size = c.integer("pod_size", s.n_nodes);
      break;
    }
  }
  c.finish();

  NodeSpec& nd = out.node;
  nd.perf_peak = n.number("peak_tflops") * kTera;
  nd.on_chip_bytes = n.number("on_chip_mb") * kMega;
  nd.lm_capacity = n.number("lm_capacity_gb") * kGiga;
  nd.lm_bw = n.number("lm_bw_gbps") * kGiga;
  nd.em_capacity = n.number("em_capacity_gb", 0) * kGiga;
  nd.em_bw = n.number("em_bw_gbps", 0) * kGiga;
  n.finish();

  validate(out.cluster);
  validate(out.node);
  return out;
}

inline Json cluster_to_json(const ClusterConfig& cc) {
  using config_detail::kGiga;
  const ClusterSpec& s = cc.cluster;
  Json c;
  c["name"] = s.name;
  c["n_nodes"] = s.n_nodes;
  c["topology"] = std::string(to_string(s.topology));
  c["collective_algo"] = std::string(to_string(s.algo));
  c["link_latency_us"] = s.link_latency / config_detail::kMicro;
  switch (s.topology) {
    case Topology::two_level_switch:
      c["pod_size"] = s.pod_size;
      c["intra_bw_gbps"] = s.intra_bw / kGiga;
      c["inter_bw_gbps"] = s.inter_bw / kGiga;
      break;
    case Topology::single_switch:
      c["pod_size"] = s.pod_size;
      c["intra_bw_gbps"] = s.intra_bw / kGiga;
      break;
    case Topology::torus3d:
      c["pod_size"] = s.pod_size;
      c["torus"] = {{"dims", s.torus_dims}, {"link_bw_gbps", s.torus_link_bw / kGiga}};
      break;
  }
  const NodeSpec& nd = cc.node;
  Json n;
  n["peak_tflops"] = nd.perf_peak / config_detail::kTera;
  n["on_chip_mb"] = nd.on_chip_bytes / config_detail::kMega;
  n["lm_capacity_gb"] = nd.lm_capacity / kGiga;
  n["lm_bw_gbps"] = nd.lm_bw / kGiga;
  n["em_capacity_gb"] = nd.em_capacity / kGiga;
  n["em_bw_gbps"] = nd.em_bw / kGiga;
  Json doc;
  doc["cluster"] = c;
  doc["node"] = n;
  return doc;
}

inline ClusterConfig load_cluster(const std::filesystem::path& path) {
  try {
    return cluster_from_json(load_document(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + msg);
  }
}

}  // namespace cdse
