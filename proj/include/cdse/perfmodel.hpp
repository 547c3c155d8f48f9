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

// Per-layer compute-delay model: roofline attainable performance, tiled
// GEMM memory traffic against a single on-chip buffer, and the effective
// bandwidth of a local + expanded memory pair.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>

#include "cdse/error.hpp"
#include "cdse/workload.hpp"

namespace cdse {

using FlopsPerSecond = double;
using BytesPerSecond = double;

struct NodeSpec {
  FlopsPerSecond perf_peak = 0;
  Bytes on_chip_bytes = 1;  // S
  Bytes lm_capacity = 0;
  BytesPerSecond lm_bw = 0;
  Bytes em_capacity = 0;  // 0: no expanded memory
  BytesPerSecond em_bw = 0;

  bool operator==(const NodeSpec&) const = default;
};

inline void validate(const NodeSpec& node) {
  if (!(node.perf_peak > 0)) throw ConfigError("node.perf_peak must be > 0");
  if (!(node.lm_bw > 0)) throw ConfigError("node.lm_bw must be > 0");
  if (!(node.on_chip_bytes >= 1)) throw ConfigError("node.on_chip_bytes must be >= 1");
  if (node.lm_capacity < 0 || node.em_capacity < 0) {
    throw ConfigError("node memory capacities must be >= 0");
  }
  if (node.em_capacity > 0 && !(node.em_bw > 0)) {
    throw ConfigError("node.em_bw must be > 0 when em_capacity > 0");
  }
}

inline double operational_intensity(Flops flops, Bytes traffic) {
  if (!(traffic > 0)) throw DomainError("operational intensity undefined for zero memory traffic");
  return flops / traffic;
}

inline FlopsPerSecond attainable_perf(double oi, BytesPerSecond bw_eff, const NodeSpec& node) {
  return std::min(node.perf_peak, oi * bw_eff);
}

inline Seconds compute_delay(Flops flops, FlopsPerSecond perf_max) {
  if (!(perf_max > 0)) throw DomainError("compute delay undefined for zero attainable performance");
  return flops / perf_max;
}

namespace detail {

template <typename T>
T ceil_div(T a, T b) {
  if constexpr (std::integral<T>) {
    return a / b + (a % b != 0 ? 1 : 0);
  } else {
    return std::ceil(a / b);
  }
}

}  // namespace detail

/// Bytes moved between memory and the compute unit for a GEMM with input
/// operands of u and v bytes and an output of w bytes, when one input is
/// tiled into an s-byte buffer and the other is streamed once per tile.
/// The cheaper of the two tilings is chosen; the output is written once.
template <typename T>
  requires std::is_arithmetic_v<T>
T gemm_memory_traffic(T u, T v, T w, T s) {
  if (!(s > 0)) throw ConfigError("on-chip buffer size must be positive");
  const T tile_u = detail::ceil_div(u, s) * v + u;
  const T tile_v = detail::ceil_div(v, s) * u + v;
  return std::min(tile_u, tile_v) + w;
}

/// Effective bandwidth when total_bytes are served by local memory first
/// and the remainder by expanded memory (harmonic blend by bytes).
inline BytesPerSecond hybrid_bandwidth(Bytes total_bytes, const NodeSpec& node) {
  if (!(total_bytes > 0)) throw DomainError("hybrid bandwidth needs a positive working set");
  if (total_bytes > node.lm_capacity + node.em_capacity) {
    throw InfeasibleError("working set of " + std::to_string(total_bytes) +
                          " bytes exceeds local + expanded capacity");
  }
  const Bytes data_lm = std::min(total_bytes, node.lm_capacity);
  const Bytes data_em = total_bytes - data_lm;
  if (data_em <= 0) return node.lm_bw;
  return total_bytes / (data_lm / node.lm_bw + data_em / node.em_bw);
}

/// Memory traffic of one layer in one phase, summed over stacks. GEMM
/// operands per phase: fp reads X (M x K) and W (K x N) and writes Y;
/// ig reads dY and W and writes dX; wg reads X and dY and writes dW.
/// Element-wise and lookup layers stream input and output once.
inline Bytes layer_memory_traffic(const LayerDescriptor& l, Phase phase, Bytes on_chip_bytes) {
  const double bpe = static_cast<double>(l.bytes_per_element);
  const double m = static_cast<double>(l.m);
  const double k = static_cast<double>(l.k);
  const double n = static_cast<double>(l.n);
  const double st = static_cast<double>(l.stacks);
  switch (l.kind) {
    case LayerKind::elementwise:
      return 2.0 * m * n * bpe * st;
    case LayerKind::table_lookup:
      return phase == Phase::ig ? 0.0 : 2.0 * m * n * bpe * st;
    case LayerKind::gemm:
    case LayerKind::table_update: {
      const double x = m * k * bpe;
      const double w = k * n * bpe;
      const double y = m * n * bpe;
      switch (phase) {
        case Phase::fp: return gemm_memory_traffic(x, w, y, on_chip_bytes) * st;
        case Phase::ig: return gemm_memory_traffic(y, w, x, on_chip_bytes) * st;
        case Phase::wg: return gemm_memory_traffic(x, y, w, on_chip_bytes) * st;
      }
    }
  }
  return 0.0;
}

/// Roofline delay for a (flops, traffic) pair at effective bandwidth bw_eff.
inline Seconds roofline_delay(Flops flops, Bytes traffic, BytesPerSecond bw_eff,
                              const NodeSpec& node) {
  if (flops <= 0) return 0.0;
  const double oi = operational_intensity(flops, traffic);
  return compute_delay(flops, attainable_perf(oi, bw_eff, node));
}

}  // namespace cdse
