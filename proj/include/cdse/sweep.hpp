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

// Parameter sweeps: the Cartesian product of axis values, evaluated by a
// worker pool and emitted as one CSV row per point in axis order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cdse/config.hpp"
#include "cdse/engine.hpp"

namespace cdse {

inline const std::vector<std::string>& sweep_axis_paths() {
  static const std::vector<std::string> paths = {
      "cluster.bw_ratio",        "cluster.inter_bw_gbps",   "cluster.intra_bw_gbps",
      "cluster.link_latency_us", "cluster.preset",          "cluster.torus_link_bw_gbps",
      "mp_dp",                   "node.em_bw_gbps",         "node.em_capacity_gb",
      "node.lm_bw_gbps",         "node.lm_capacity_gb",     "node.on_chip_mb",
      "node.peak_multiplier",    "node.peak_tflops",        "zero_stage",
  };
  return paths;
}

struct SweepAxis {
  std::string path;
  std::vector<std::string> values;

  bool operator==(const SweepAxis&) const = default;
};

struct Normalization {
  enum class Mode { runtime, speedup };
  Mode mode = Mode::runtime;
  std::map<std::string, std::string> reference;

  std::string column() const { return mode == Mode::runtime ? "normalized" : "speedup"; }
  bool operator==(const Normalization&) const = default;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;
  std::optional<Normalization> normalize;
  std::optional<double> total_bw;  // bytes/s, required by cluster.bw_ratio
  std::optional<ParallelConfig> base_cfg;
  int zero_stage = 2;
  std::filesystem::path base_dir;  // cluster.preset paths are relative to this

  bool operator==(const SweepSpec& o) const {
    return axes == o.axes && normalize == o.normalize && total_bw == o.total_bw &&
           base_cfg == o.base_cfg && zero_stage == o.zero_stage;
  }
};

inline ParallelConfig parse_mp_dp(const std::string& label) {
  long long mp = 0;
  long long dp = 0;
  char tail = 0;
  if (std::sscanf(label.c_str(), "MP%lld_DP%lld%c", &mp, &dp, &tail) != 2 || mp < 1 || dp < 1) {
    throw ConfigError("malformed mp_dp value '" + label + "' (expected e.g. MP8_DP128)");
  }
  return {mp, dp};
}

namespace sweep_detail {

inline std::string value_string(const Json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return config_detail::format_double(v.get<double>());
  throw ConfigError("'" + where + "' values must be scalars");
}

inline Json value_json(const std::string& s) { return config_detail::scalar_to_json(s, false); }

inline double as_number(const std::string& path, const std::string& v) {
  const Json j = value_json(v);
  if (!j.is_number()) throw ConfigError("'" + path + "' value '" + v + "' is not a number");
  return j.get<double>();
}

}  // namespace sweep_detail

inline SweepSpec sweep_from_json(const Json& doc, const std::filesystem::path& base_dir = {}) {
  config_detail::Section root(doc, "");
  config_detail::Section s = root.section("sweep");
  root.finish();
  SweepSpec spec;
  spec.base_dir = base_dir;
  if (s.has("base")) {
    config_detail::Section b = s.section("base");
    if (b.has("mp_dp")) spec.base_cfg = parse_mp_dp(b.string("mp_dp"));
    spec.zero_stage = static_cast<int>(b.integer("zero_stage", 2));
    b.finish();
  }
  s.allow("base");
  (void)ZeroStage(spec.zero_stage);
  if (s.has("total_bw_gbps")) spec.total_bw = s.number("total_bw_gbps") * config_detail::kGiga;
  s.allow("total_bw_gbps");

  const auto& valid = sweep_axis_paths();
  s.allow("axes");
  s.allow("normalize");
  if (s.has("axes")) {
    const Json& axes = s.raw("axes");
    if (!axes.is_array()) throw ConfigError("'sweep.axes' must be a list");
    for (std::size_t i = 0; i < axes.size(); ++i) {
      config_detail::Section a(axes[i], "sweep.axes[" + std::to_string(i) + "]");
      SweepAxis axis;
      axis.path = a.string("path");
      if (std::find(valid.begin(), valid.end(), axis.path) == valid.end()) {
        std::string list;
        for (const auto& p : valid) list += (list.empty() ? "" : ", ") + p;
        throw ConfigError("unknown sweep parameter path '" + axis.path + "' (valid paths: " + list + ")");
      }
      const Json& vals = a.raw("values");
      const std::string where = a.where("values");
      if (vals.is_array()) {
        for (const auto& v : vals) axis.values.push_back(sweep_detail::value_string(v, where));
      } else {
        axis.values.push_back(sweep_detail::value_string(vals, where));
      }
      if (axis.values.empty()) throw ConfigError("'" + where + "' must not be empty");
      if (axis.path == "mp_dp") {
        for (const auto& v : axis.values) {
          if (v != "all") parse_mp_dp(v);
        }
      }
      a.finish();
      for (const auto& prev : spec.axes) {
        if (prev.path == axis.path) throw ConfigError("sweep axis '" + axis.path + "' listed twice");
      }
      if (axis.path == "cluster.bw_ratio" && !spec.total_bw) {
        throw ConfigError("sweep axis 'cluster.bw_ratio' requires 'sweep.total_bw_gbps'");
      }
      spec.axes.push_back(std::move(axis));
    }
  }
  if (s.has("normalize")) {
    config_detail::Section n = s.section("normalize");
    Normalization norm;
    const std::string mode = n.string("mode", "runtime");
    if (mode == "runtime") {
      norm.mode = Normalization::Mode::runtime;
    } else if (mode == "speedup") {
      norm.mode = Normalization::Mode::speedup;
    } else {
      throw ConfigError("'sweep.normalize.mode' must be 'runtime' or 'speedup'");
    }
    const Json& ref = n.raw("reference");
    if (!ref.is_object() || ref.empty()) {
      throw ConfigError("'sweep.normalize.reference' must map swept paths to values");
    }
    for (const auto& [k, v] : ref.items()) {
      const bool swept = std::any_of(spec.axes.begin(), spec.axes.end(), [&](const SweepAxis& a) { return a.path == k; });
      if (!swept) throw ConfigError("normalization reference key '" + k + "' is not a swept axis");
      norm.reference[k] = sweep_detail::value_string(v, "sweep.normalize.reference");
    }
    n.finish();
    spec.normalize = norm;
  }
  s.finish();
  return spec;
}

inline Json sweep_to_json(const SweepSpec& spec) {
  Json s;
  Json base;
  if (spec.base_cfg) base["mp_dp"] = spec.base_cfg->label();
  base["zero_stage"] = spec.zero_stage;
  s["base"] = base;
  if (spec.total_bw) s["total_bw_gbps"] = *spec.total_bw / config_detail::kGiga;
  Json axes = Json::array();
  for (const auto& a : spec.axes) {
    Json vals = Json::array();
    for (const auto& v : a.values) vals.push_back(sweep_detail::value_json(v));
    axes.push_back({{"path", a.path}, {"values", vals}});
  }
  s["axes"] = axes;
  if (spec.normalize) {
    Json ref = Json::object();
    for (const auto& [k, v] : spec.normalize->reference) ref[k] = sweep_detail::value_json(v);
    s["normalize"] = {{"mode", spec.normalize->mode == Normalization::Mode::runtime ? "runtime" : "speedup"},
                      {"reference", ref}};
  }
  Json doc;
  doc["sweep"] = s;
  return doc;
}

inline SweepSpec load_sweep(const std::filesystem::path& path) {
  try {
    return sweep_from_json(load_document(path), path.parent_path());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + msg);
  }
}

struct SweepRow {
  std::vector<std::string> values;  // one per axis, in axis order
  ParallelConfig cfg;
  IterationResult result;
};

struct SweepTable {
  std::vector<std::string> axis_paths;  // axis order
  std::vector<SweepRow> rows;
  std::optional<Normalization> normalize;
  std::vector<double> normalized;  // parallel to rows when normalize is set
};

/// A fully resolved point: everything the engine needs.
struct SweepPoint {
  ClusterConfig hw;
  ParallelConfig cfg;
  ZeroStage zero;
};

namespace sweep_detail {

inline std::vector<std::string> all_strategies(Count n_nodes) {
  std::vector<std::string> out;
  for (const auto& c : enumerate_strategies(n_nodes)) out.push_back(c.label());
  return out;
}

inline void apply_axis(SweepPoint& pt, const std::string& path, const std::string& v, const SweepSpec& spec,
                       const std::map<std::string, ClusterConfig>& presets) {
  constexpr double G = config_detail::kGiga;
  auto num = [&] { return as_number(path, v); };
  if (path == "cluster.preset") {
    pt.hw = presets.at(v);
  } else if (path == "mp_dp") {
    pt.cfg = parse_mp_dp(v);
  } else if (path == "zero_stage") {
    pt.zero = ZeroStage(static_cast<int>(num()));
  } else if (path == "node.peak_multiplier") {
    pt.hw.node.perf_peak *= num();
  } else if (path == "node.peak_tflops") {
    pt.hw.node.perf_peak = num() * config_detail::kTera;
  } else if (path == "node.lm_bw_gbps") {
    pt.hw.node.lm_bw = num() * G;
  } else if (path == "node.lm_capacity_gb") {
    pt.hw.node.lm_capacity = num() * G;
  } else if (path == "node.em_bw_gbps") {
    pt.hw.node.em_bw = num() * G;
  } else if (path == "node.em_capacity_gb") {
    pt.hw.node.em_capacity = num() * G;
  } else if (path == "node.on_chip_mb") {
    pt.hw.node.on_chip_bytes = num() * config_detail::kMega;
  } else if (path == "cluster.intra_bw_gbps") {
    pt.hw.cluster.intra_bw = num() * G;
  } else if (path == "cluster.inter_bw_gbps") {
    pt.hw.cluster.inter_bw = num() * G;
  } else if (path == "cluster.link_latency_us") {
    pt.hw.cluster.link_latency = num() * config_detail::kMicro;
  } else if (path == "cluster.torus_link_bw_gbps") {
    pt.hw.cluster.torus_link_bw = num() * G;
  } else if (path == "cluster.bw_ratio") {
    const double r = num();
    if (!(r > 0)) throw ConfigError("'cluster.bw_ratio' values must be > 0");
    pt.hw.cluster.intra_bw = *spec.total_bw * r / (1.0 + r);
    pt.hw.cluster.inter_bw = *spec.total_bw / (1.0 + r);
  } else {
    throw ConfigError("unknown sweep parameter path '" + path + "'");
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace sweep_detail

/// Evaluates every point of the sweep. Rows follow axis order with the
/// first axis outermost regardless of which worker finishes first.
inline SweepTable run_sweep(const ModelHyperParams& model, const ClusterConfig& base, const SweepSpec& spec,
                            unsigned jobs = 0) {
  const LayerGraph graph = build_graph(model);
  validate(base.cluster);
  validate(base.node);

  std::map<std::string, ClusterConfig> presets;
  std::vector<SweepAxis> axes = spec.axes;
  for (auto& a : axes) {
    if (a.path == "cluster.preset") {
      for (const auto& v : a.values) {
        if (!presets.count(v)) presets[v] = load_cluster(spec.base_dir / v);
      }
    }
    if (a.path == "mp_dp" && a.values.size() == 1 && a.values[0] == "all") {
      a.values = sweep_detail::all_strategies(base.cluster.n_nodes);
    }
  }
  if (std::any_of(axes.begin(), axes.end(), [](const SweepAxis& a) { return a.path == "cluster.bw_ratio"; }) &&
      !spec.total_bw) {
    throw ConfigError("sweep axis 'cluster.bw_ratio' requires 'sweep.total_bw_gbps'");
  }

  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();

  SweepTable table;
  for (const auto& a : axes) table.axis_paths.push_back(a.path);
  table.normalize = spec.normalize;
  table.rows.resize(total);

  const auto evaluate_point = [&](std::size_t idx) {
    std::vector<std::size_t> pick(axes.size());
    std::size_t rest = idx;
    for (std::size_t i = axes.size(); i-- > 0;) {
      pick[i] = rest % axes[i].values.size();
      rest /= axes[i].values.size();
    }
    SweepPoint pt{base, spec.base_cfg.value_or(ParallelConfig{1, base.cluster.n_nodes}), ZeroStage(spec.zero_stage)};
    SweepRow& row = table.rows[idx];
    for (std::size_t i = 0; i < axes.size(); ++i) row.values.push_back(axes[i].values[pick[i]]);
    // A preset replaces the whole cluster, so it is applied before the other axes.
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i].path == "cluster.preset") {
        sweep_detail::apply_axis(pt, axes[i].path, row.values[i], spec, presets);
        if (!spec.base_cfg) pt.cfg = {1, pt.hw.cluster.n_nodes};
      }
    }
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i].path != "cluster.preset") sweep_detail::apply_axis(pt, axes[i].path, row.values[i], spec, presets);
    }
    validate(pt.hw.cluster);
    validate(pt.hw.node);
    validate(pt.cfg, pt.hw.cluster.n_nodes);
    row.cfg = pt.cfg;
    row.result = evaluate(graph, pt.cfg, pt.zero, pt.hw.cluster, pt.hw.node);
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(jobs == 0 ? hw : jobs, total));
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        evaluate_point(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (spec.normalize) {
    const SweepRow* ref = nullptr;
    for (const auto& row : table.rows) {
      bool match = true;
      for (std::size_t i = 0; i < axes.size() && match; ++i) {
        auto it = spec.normalize->reference.find(axes[i].path);
        if (it != spec.normalize->reference.end() &&
            sweep_detail::value_json(it->second) != sweep_detail::value_json(row.values[i])) {
          match = false;
        }
      }
      if (match) {
        ref = &row;
        break;
      }
    }
    if (!ref) throw ConfigError("normalization reference matches no sweep point");
    if (!ref->result.feasible) throw ConfigError("normalization reference point is infeasible");
    const double r = ref->result.iteration_s;
    for (const auto& row : table.rows) {
      double v = std::nan("");
      if (row.result.feasible) {
        v = spec.normalize->mode == Normalization::Mode::runtime ? row.result.iteration_s / r
                                                                 : r / row.result.iteration_s;
      }
      table.normalized.push_back(v);
    }
  }
  return table;
}

inline std::string to_csv(const SweepTable& t) {
  using sweep_detail::csv_field;
  using sweep_detail::fmt;
  if (t.rows.empty()) throw ConfigError("cannot emit an empty result table");
  std::vector<std::size_t> order(t.axis_paths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t.axis_paths[a] < t.axis_paths[b]; });

  std::string out;
  for (std::size_t i : order) out += csv_field(t.axis_paths[i]) + ",";
  out += "fp_compute_s,fp_exposed_s,ig_compute_s,ig_exposed_s,wg_compute_s,wg_exposed_s,iteration_s,"
         "footprint_bytes,feasible";
  if (t.normalize) out += "," + t.normalize->column();
  out += "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const SweepRow& row = t.rows[r];
    const IterationResult& res = row.result;
    for (std::size_t i : order) out += csv_field(row.values[i]) + ",";
    const double nan = std::nan("");
    for (Phase p : kPhases) {
      out += fmt(res.feasible ? res.total(p).compute_s : nan) + ",";
      out += fmt(res.feasible ? res.total(p).exposed_s : nan) + ",";
    }
    out += fmt(res.feasible ? res.iteration_s : nan) + ",";
    out += fmt(res.footprint_bytes) + ",";
    out += res.feasible ? "true" : "false";
    if (t.normalize) out += "," + fmt(t.normalized[r]);
    out += "\n";
  }
  return out;
}

inline void emit_csv(const SweepTable& t, const std::filesystem::path& path) {
  const std::string text = to_csv(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace cdse
