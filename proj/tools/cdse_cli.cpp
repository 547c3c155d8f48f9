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


// Command-line front end: simulate, sweep, footprint, trace, convert.
// Exit codes: 0 success, 2 configuration error, 3 I/O error.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cdse/cdse.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

void print_results(const cdse::SweepTable& t) {
  std::printf("%-14s %12s %12s %12s %10s %12s\n", "config", "compute_s", "exposed_s", "iteration_s", "ratio",
              "footprint_gb");
  for (const auto& row : t.rows) {
    const auto& r = row.result;
    if (!r.feasible) {
      std::printf("%-14s %12s %12s %12s %10s %12.1f  (exceeds memory)\n", row.cfg.label().c_str(), "-", "-", "-",
                  "-", r.footprint_bytes / 1e9);
      continue;
    }
    std::printf("%-14s %12.4f %12.4f %12.4f %10.4f %12.1f\n", row.cfg.label().c_str(), r.compute_s,
                r.exposed_comm_s, r.iteration_s, cdse::exposed_comm_ratio(r), r.footprint_bytes / 1e9);
  }
}

int run_simulate(const std::string& model_path, const std::string& cluster_path, long long mp, long long dp,
                 int zero, const std::string& out, unsigned jobs) {
  const auto model = cdse::load_model(model_path);
  const auto hw = cdse::load_cluster(cluster_path);
  cdse::SweepSpec spec;
  spec.zero_stage = zero;
  (void)cdse::ZeroStage(zero);
  cdse::SweepAxis axis{"mp_dp", {"all"}};
  if (mp > 0 || dp > 0) {
    if (mp <= 0) mp = hw.cluster.n_nodes / dp;
    if (dp <= 0) dp = hw.cluster.n_nodes / mp;
    axis.values = {cdse::ParallelConfig{mp, dp}.label()};
  }
  spec.axes.push_back(axis);
  const auto table = cdse::run_sweep(model, hw, spec, jobs);
  cdse::emit_csv(table, out);
  print_results(table);
  return 0;
}

int run_sweep(const std::string& model_path, const std::string& cluster_path, const std::string& sweep_path,
              const std::string& out, unsigned jobs) {
  const auto model = cdse::load_model(model_path);
  const auto hw = cdse::load_cluster(cluster_path);
  const auto spec = cdse::load_sweep(sweep_path);
  const auto table = cdse::run_sweep(model, hw, spec, jobs);
  cdse::emit_csv(table, out);
  std::printf("%zu points written to %s\n", table.rows.size(), out.c_str());
  return 0;
}

int run_footprint(const std::string& model_path, long long nodes, int zero) {
  const auto model = cdse::load_model(model_path);
  const auto graph = cdse::build_graph(model);
  const cdse::ZeroStage z(zero);
  std::printf("%s: %.4g parameters, ZeRO stage %d, %lld nodes\n", graph.name.c_str(),
              static_cast<double>(graph.total_params), zero, nodes);
  std::printf("%-14s %16s %16s %14s\n", "config", "model_states_gb", "activations_gb", "total_gb");
  for (const auto& cfg : cdse::enumerate_strategies(nodes)) {
    const auto f = cdse::footprint_breakdown(graph, cfg, z);
    std::printf("%-14s %16.2f %16.2f %14.2f\n", cfg.label().c_str(), f.model_states / 1e9, f.activations / 1e9,
                f.total() / 1e9);
  }
  return 0;
}

int run_trace(const std::string& model_path, const std::string& cluster_path, long long mp, long long dp, int zero,
              const std::string& out) {
  const auto model = cdse::load_model(model_path);
  const auto hw = cdse::load_cluster(cluster_path);
  const cdse::ParallelConfig cfg{mp, dp};
  cdse::validate(cfg, hw.cluster.n_nodes);
  const auto trace = cdse::build_trace(cdse::build_graph(model), cfg, cdse::ZeroStage(zero), hw.node);
  cdse::save_trace(trace, out);
  return 0;
}

int run_convert(const std::string& in, const std::string& out) {
  const cdse::Json doc = cdse::load_document(in);
  cdse::Json canonical;
  if (doc.contains("model")) {
    canonical = cdse::model_to_json(cdse::model_from_json(doc));
  } else if (doc.contains("cluster")) {
    canonical = cdse::cluster_to_json(cdse::cluster_from_json(doc));
  } else if (doc.contains("sweep")) {
    canonical = cdse::sweep_to_json(cdse::sweep_from_json(doc));
  } else {
    throw cdse::ConfigError(in + ": expected a 'model', 'cluster' or 'sweep' document");
  }
  cdse::save_document(canonical, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytical design-space exploration for distributed training clusters"};
  app.require_subcommand(1);

  std::string model, cluster, sweep, out, in;
  long long mp = 0, dp = 0, nodes = 0;
  int zero = 2;
  unsigned jobs = 0;

  auto* sim = app.add_subcommand("simulate", "Simulate one iteration for one or all (MP, DP) splits");
  sim->add_option("--model", model, "Model config file")->required();
  sim->add_option("--cluster", cluster, "Cluster config file")->required();
  sim->add_option("--mp", mp, "Model-parallel degree (default: every split)");
  sim->add_option("--dp", dp, "Data-parallel degree");
  sim->add_option("--zero", zero, "ZeRO stage 0..3")->check(CLI::Range(0, 3));
  sim->add_option("--out", out, "Output CSV")->required();
  sim->add_option("--jobs", jobs, "Worker threads (0: all cores)");

  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep");
  sw->add_option("--model", model, "Model config file")->required();
  sw->add_option("--cluster", cluster, "Base cluster config file")->required();
  sw->add_option("--sweep", sweep, "Sweep config file")->required();
  sw->add_option("--out", out, "Output CSV")->required();
  sw->add_option("--jobs", jobs, "Worker threads (0: all cores)");

  auto* fp = app.add_subcommand("footprint", "Per-node memory footprint for every (MP, DP) split");
  fp->add_option("--model", model, "Model config file")->required();
  fp->add_option("--nodes", nodes, "Cluster node count")->required();
  fp->add_option("--zero", zero, "ZeRO stage 0..3")->check(CLI::Range(0, 3));

  auto* tr = app.add_subcommand("trace", "Write the per-node workload trace (CSV or JSON)");
  tr->add_option("--model", model, "Model config file")->required();
  tr->add_option("--cluster", cluster, "Cluster config file")->required();
  tr->add_option("--mp", mp, "Model-parallel degree")->required();
  tr->add_option("--dp", dp, "Data-parallel degree")->required();
  tr->add_option("--zero", zero, "ZeRO stage 0..3")->check(CLI::Range(0, 3));
  tr->add_option("--out", out, "Output file (.csv or .json)")->required();

  auto* cv = app.add_subcommand("convert", "Validate a config and rewrite it as YAML or JSON");
  cv->add_option("--in", in, "Input config")->required();
  cv->add_option("--out", out, "Output config (.yaml or .json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return run_simulate(model, cluster, mp, dp, zero, out, jobs);
    if (*sw) return run_sweep(model, cluster, sweep, out, jobs);
    if (*fp) return run_footprint(model, nodes, zero);
    if (*tr) return run_trace(model, cluster, mp, dp, zero, out);
    if (*cv) return run_convert(in, out);
  } catch (const cdse::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cdse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
