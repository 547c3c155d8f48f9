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

// Shared fixtures and brute-force oracles for the test suites. The
// oracles simulate the mechanism step by step instead of using the
// closed forms under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdse/cdse.hpp"

namespace cdse::testing {

inline std::string source_path(const std::string& rel) { return std::string(CDSE_SOURCE_DIR) + "/" + rel; }

inline ModelHyperParams default_transformer() { return load_model(source_path("configs/models/transformer_1t.yaml")); }
inline ModelHyperParams default_dlrm() { return load_model(source_path("configs/models/dlrm_1_2t.yaml")); }
inline ClusterConfig baseline() { return load_cluster(source_path("configs/clusters/baseline_a100.yaml")); }

inline ClusterConfig unconstrained_baseline() {
  ClusterConfig c = baseline();
  c.node.lm_capacity = 1e18;
  return c;
}

inline bool rel_close(double a, double b, double tol) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? true : std::abs(a - b) <= tol * scale;
}

// Bytes moved when one operand is cut into s-byte tiles and the other
// operand is re-read in full for every tile; the output is written once.
inline std::uint64_t tile_streaming_traffic(std::uint64_t u, std::uint64_t v, std::uint64_t w, std::uint64_t s) {
  auto stream = [s](std::uint64_t tiled, std::uint64_t streamed) {
    std::uint64_t bytes = 0;
    for (std::uint64_t left = tiled; left > 0;) {
      const std::uint64_t tile = std::min(s, left);
      bytes += tile + streamed;
      left -= tile;
    }
    return bytes;
  };
  return std::min(stream(u, v), stream(v, u)) + w;
}

// One ring of `members` nodes, each with its own outgoing link. Runs the
// classic reduce-scatter then all-gather schedule on `volume` bytes split
// into `members` chunks, tracking which contributions every node holds,
// and returns the load of the busiest link in each step.
inline std::vector<double> ring_step_loads(double volume, int members, bool reduce_scatter, bool all_gather) {
  std::vector<double> loads;
  if (members <= 1) return loads;
  const double chunk = volume / members;
  // have[i][c]: contributions to chunk c accumulated at node i.
  std::vector<std::vector<int>> have(members, std::vector<int>(members, 1));
  auto mod = [members](int x) { return ((x % members) + members) % members; };
  if (reduce_scatter) {
    for (int s = 0; s < members - 1; ++s) {
      std::vector<double> link(members, 0.0);
      auto next = have;
      for (int i = 0; i < members; ++i) {
        const int c = mod(i - s);
        next[mod(i + 1)][c] += have[i][c];
        link[i] += chunk;
      }
      have = next;
      loads.push_back(*std::max_element(link.begin(), link.end()));
    }
    for (int i = 0; i < members; ++i) {
      if (have[i][mod(i + 1)] != members) throw std::logic_error("ring oracle: incomplete reduction");
    }
  }
  if (all_gather) {
    for (int s = 0; s < members - 1; ++s) {
      std::vector<double> link(members, 0.0);
      for (int i = 0; i < members; ++i) link[i] += chunk;  // forwards chunk (i + 1 - s) mod p
      loads.push_back(*std::max_element(link.begin(), link.end()));
    }
  }
  return loads;
}

inline double ring_oracle(double volume, int p, double bw, double latency) {
  double t = 0;
  for (double bytes : ring_step_loads(volume, p, true, true)) t += bytes / bw + latency;
  return t;
}

// Two-level switch: `local` members in each of `span` pods. Every pod runs
// its intra ring concurrently; then every local rank runs an inter-pod
// ring on its shard; then pods all-gather. Concurrent rings use disjoint
// per-node links, so each step costs the slowest ring's step.
inline double hierarchical_oracle(double volume, int local, int span, double intra_bw, double inter_bw,
                                  double latency) {
  auto concurrent = [&](int rings, double vol, int members, double bw, bool rs, bool ag) {
    std::vector<double> step_time;
    for (int r = 0; r < rings; ++r) {
      const auto loads = ring_step_loads(vol, members, rs, ag);
      if (step_time.size() < loads.size()) step_time.resize(loads.size(), 0.0);
      for (std::size_t s = 0; s < loads.size(); ++s) step_time[s] = std::max(step_time[s], loads[s] / bw + latency);
    }
    double t = 0;
    for (double x : step_time) t += x;
    return t;
  };
  if (span == 1) return concurrent(1, volume, local, intra_bw, true, true);
  if (local == 1) return concurrent(1, volume, span, inter_bw, true, true);
  return concurrent(span, volume, local, intra_bw, true, false) +
         concurrent(local, volume / local, span, inter_bw, true, true) +
         concurrent(span, volume, local, intra_bw, false, true);
}

// Pairwise exchange: p-1 rounds, in round r node i sends its block for
// node (i + r) mod p over its own link.
inline double alltoall_oracle(double volume, int p, double bw, double latency) {
  double t = 0;
  for (int r = 1; r < p; ++r) {
    std::vector<double> link(p, 0.0);
    for (int i = 0; i < p; ++i) link[i] += volume / p;
    t += *std::max_element(link.begin(), link.end()) / bw + latency;
  }
  return t;
}

}  // namespace cdse::testing
