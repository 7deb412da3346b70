// Copyright 2026 The PruneKit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunekit/errors.hpp"
#include "prunekit/network.hpp"
#include "prunekit/sparsity.hpp"

namespace prunekit {

/// Per-layer fraction of kernels to remove, each in [0, 1).
struct ReducingFactor {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  bool operator==(const ReducingFactor&) const = default;
};

/// Kernel-stack dimensions per layer; the network's shape without weights.
struct NetworkSpec {
  struct LayerDims {
    int n = 0;
    int c = 0;
    int h = 3;
    int w = 3;

    std::int64_t weight_count() const {
      return static_cast<std::int64_t>(n) * c * h * w;
    }
    bool operator==(const LayerDims&) const = default;
  };

  std::vector<LayerDims> layers;

  std::size_t size() const { return layers.size(); }
  bool operator==(const NetworkSpec&) const = default;

  static NetworkSpec of(const Network& net) {
    NetworkSpec spec;
    spec.layers.reserve(net.layers.size());
    for (const ConvLayer& layer : net.layers) {
      const Shape4& kd = layer.kernels.dims();
      spec.layers.push_back({kd.n, kd.c, kd.h, kd.w});
    }
    return spec;
  }

  /// The 20-layer single-channel residual shape: 1 -> width, width -> width
  /// repeated, width -> 1, all 3x3.
  static NetworkSpec vdsr(int depth = 20, int width = 64) {
    if (depth < 2 || width < 1) {
      throw ConfigError("vdsr spec needs depth >= 2 and width >= 1");
    }
    NetworkSpec spec;
    spec.layers.push_back({width, 1, 3, 3});
    for (int i = 1; i + 1 < depth; ++i) spec.layers.push_back({width, width, 3, 3});
    spec.layers.push_back({1, width, 3, 3});
    return spec;
  }
};

inline void validate_spec(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("network spec has no layers");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& d = spec.layers[i];
    if (d.n < 1 || d.c < 1 || d.h < 1 || d.w < 1) {
      throw ConfigError("spec layer " + std::to_string(i) + " has non-positive dims");
    }
    if (i > 0 && d.c != spec.layers[i - 1].n) {
      throw ConfigError("spec layer " + std::to_string(i) + " expects " + std::to_string(d.c) +
                        " channels but layer " + std::to_string(i - 1) + " produces " +
                        std::to_string(spec.layers[i - 1].n));
    }
  }
}

inline void validate_factors(const ReducingFactor& r, std::size_t layer_count) {
  if (r.size() != layer_count) {
    throw ConfigError("reducing factor length " + std::to_string(r.size()) +
                      " does not match layer count " + std::to_string(layer_count));
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] >= 0.0 && r[i] < 1.0)) {
      throw ConfigError("reducing factor " + std::to_string(r[i]) + " at layer " +
                        std::to_string(i) + " is outside [0,1)");
    }
  }
}

/// Same value at every layer, except a single-kernel final layer which is
/// never pruned and stays at 0.
inline ReducingFactor uniform_factors(const NetworkSpec& spec, double value) {
  ReducingFactor r;
  r.values.assign(spec.size(), value);
  if (spec.layers.back().n == 1) r.values.back() = 0.0;
  validate_factors(r, spec.size());
  return r;
}

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

/// Kernels surviving at a layer of width `total` under factor `r`:
/// the removal count rounds half-up.
inline int kept_count(double r, int total) { return total - round_half_up(r * total); }

inline std::vector<int> kept_counts(const NetworkSpec& spec, const ReducingFactor& r) {
  validate_factors(r, spec.size());
  std::vector<int> counts(spec.size());
  for (std::size_t l = 0; l < spec.size(); ++l) {
    counts[l] = std::max(1, kept_count(r[l], spec.layers[l].n));
  }
  return counts;
}

/// Fraction of kernel weights surviving under `r`, relative to the unpruned
/// total. Layer l's cost scales with both its own retention and the previous
/// layer's (removed kernels take their downstream input channels with them);
/// the first layer's input channels are always fully retained. Retentions
/// come from integer kernel counts.
inline double weights_remained(const NetworkSpec& spec, const ReducingFactor& r) {
  validate_spec(spec);
  const std::vector<int> counts = kept_counts(spec, r);
  const std::size_t depth = spec.size();

  std::vector<double> retained(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    retained[l] = static_cast<double>(counts[l]) / static_cast<double>(spec.layers[l].n);
  }

  double kept = 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < depth; ++l) {
    const double diag = static_cast<double>(spec.layers[l].weight_count());
    const double input_retained = l == 0 ? 1.0 : retained[l - 1];
    kept += input_retained * diag * retained[l];
    total += diag;
  }
  return kept / total;
}

/// Rounds per-layer kept counts to the nearest multiple of `multiple`
/// (clamped to at least one surviving kernel and at most the layer width)
/// and returns the effective factors 1 - n_l/N_l.
inline ReducingFactor snap_to_architecture(const ReducingFactor& r, const NetworkSpec& spec,
                                           int multiple) {
  validate_factors(r, spec.size());
  if (multiple < 1) throw ConfigError("snap multiple must be >= 1");
  ReducingFactor out;
  out.values.resize(r.size());
  for (std::size_t l = 0; l < r.size(); ++l) {
    const int total = spec.layers[l].n;
    const double target = (1.0 - r[l]) * total;
    int snapped = round_half_up(target / multiple) * multiple;
    const int lower = std::min(std::max(1, multiple), total);
    snapped = std::clamp(snapped, lower, total);
    out.values[l] = 1.0 - static_cast<double>(snapped) / static_cast<double>(total);
  }
  return out;
}

/// Which kernels each layer keeps; the executable form of a factor vector.
struct PruningPlan {
  std::vector<std::vector<int>> kept;

  bool operator==(const PruningPlan&) const = default;
};

inline void validate_plan(const PruningPlan& plan, const NetworkSpec& spec) {
  if (plan.kept.size() != spec.size()) {
    throw ConfigError("plan covers " + std::to_string(plan.kept.size()) + " layers, network has " +
                      std::to_string(spec.size()));
  }
  for (std::size_t l = 0; l < plan.kept.size(); ++l) {
    const auto& kept = plan.kept[l];
    if (kept.empty()) {
      throw ConfigError("plan keeps no kernels at layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i] < 0 || kept[i] >= spec.layers[l].n) {
        throw ConfigError("plan index " + std::to_string(kept[i]) + " out of range at layer " +
                          std::to_string(l));
      }
      if (i > 0 && kept[i] <= kept[i - 1]) {
        throw ConfigError("plan indices not strictly ascending at layer " + std::to_string(l));
      }
    }
  }
}

/// Removes the round_half_up(r_l * N_l) highest-sparsity kernels per layer.
/// Ties were already resolved by the report's ordering.
inline PruningPlan plan_from_factors(const Network& net, const ReducingFactor& r,
                                     const std::vector<SparsityReport>& reports) {
  validate_network(net);
  validate_factors(r, net.layers.size());
  if (reports.size() != net.layers.size()) {
    throw ConfigError("have " + std::to_string(reports.size()) + " sparsity reports for " +
                      std::to_string(net.layers.size()) + " layers");
  }

  PruningPlan plan;
  plan.kept.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const int total = net.layers[l].out_channels();
    if (static_cast<int>(reports[l].entries.size()) != total) {
      throw ConfigError("sparsity report at layer " + std::to_string(l) + " lists " +
                        std::to_string(reports[l].entries.size()) + " kernels, layer has " +
                        std::to_string(total));
    }
    const int remove = round_half_up(r[l] * total);
    if (remove >= total) {
      throw InfeasibleError("factor " + std::to_string(r[l]) + " would remove all " +
                            std::to_string(total) + " kernels of layer " + std::to_string(l));
    }
    auto& kept = plan.kept[l];
    kept.reserve(static_cast<std::size_t>(total - remove));
    for (std::size_t i = static_cast<std::size_t>(remove); i < reports[l].entries.size(); ++i) {
      kept.push_back(reports[l].entries[i].kernel_index);
    }
    std::sort(kept.begin(), kept.end());
  }
  validate_plan(plan, NetworkSpec::of(net));
  return plan;
}

/// Builds the pruned network: each layer keeps only its planned kernels and
/// biases, and the next layer drops the input-channel slices that fed from
/// removed kernels. The input network is left untouched.
inline Network apply_plan(const Network& net, const PruningPlan& plan) {
  validate_network(net);
  validate_plan(plan, NetworkSpec::of(net));

  Network pruned;
  pruned.residual = net.residual;
  pruned.layers.reserve(net.layers.size());

  std::vector<int> prev_kept(static_cast<std::size_t>(net.layers.front().in_channels()));
  std::iota(prev_kept.begin(), prev_kept.end(), 0);

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const ConvLayer& src = net.layers[l];
    const std::vector<int>& rows = plan.kept[l];
    const Shape4& kd = src.kernels.dims();

    ConvLayer dst;
    dst.activation = src.activation;
    dst.kernels = Tensor4({static_cast<int>(rows.size()), static_cast<int>(prev_kept.size()),
                           kd.h, kd.w});
    dst.bias.reserve(rows.size());
    for (std::size_t ni = 0; ni < rows.size(); ++ni) {
      for (std::size_t ci = 0; ci < prev_kept.size(); ++ci) {
        for (int y = 0; y < kd.h; ++y) {
          for (int x = 0; x < kd.w; ++x) {
            dst.kernels.at(static_cast<int>(ni), static_cast<int>(ci), y, x) =
                src.kernels.at(rows[ni], prev_kept[ci], y, x);
          }
        }
      }
      dst.bias.push_back(src.bias[static_cast<std::size_t>(rows[ni])]);
    }
    pruned.layers.push_back(std::move(dst));
    prev_kept = rows;
  }
  validate_network(pruned);
  return pruned;
}

/// Exact surviving/total kernel-weight counts for integer kept counts.
struct WeightCounts {
  std::int64_t kept = 0;
  std::int64_t total = 0;
};

inline WeightCounts count_weights(const NetworkSpec& spec, const std::vector<int>& counts) {
  validate_spec(spec);
  if (counts.size() != spec.size()) {
    throw ConfigError("kept-count vector length does not match spec");
  }
  WeightCounts out;
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const auto& d = spec.layers[l];
    const std::int64_t in_ch = l == 0 ? d.c : counts[l - 1];
    out.kept += static_cast<std::int64_t>(d.h) * d.w * in_ch * counts[l];
    out.total += d.weight_count();
  }
  return out;
}

inline nlohmann::json plan_to_json(const PruningPlan& plan, const NetworkSpec& spec) {
  validate_plan(plan, spec);
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < plan.kept.size(); ++l) {
    layers.push_back({{"layer", l}, {"total", spec.layers[l].n}, {"kept", plan.kept[l]}});
  }
  return {{"version", 1}, {"layers", layers}};
}

inline PruningPlan plan_from_json(const nlohmann::json& j) {
  PruningPlan plan;
  try {
    if (j.at("version").get<int>() != 1) {
      throw FormatError("unsupported plan version");
    }
    const auto& layers = j.at("layers");
    plan.kept.resize(layers.size());
    for (const auto& entry : layers) {
      const std::size_t l = entry.at("layer").get<std::size_t>();
      if (l >= plan.kept.size()) throw FormatError("plan layer index out of range");
      plan.kept[l] = entry.at("kept").get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed pruning plan: ") + e.what());
  }
  return plan;
}

}  // namespace prunekit
