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
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

/// Per-kernel sparsity of one layer, sorted by sparsity descending with ties
/// broken by ascending kernel index. A kernel's sparsity is the fraction of
/// its weights whose magnitude falls strictly below the layer's mean
/// absolute weight, so every value is an exact multiple of 1/(C*H*W).
struct SparsityReport {
  struct Entry {
    int kernel_index = 0;
    double sparsity = 0.0;
  };

  int layer_index = 0;
  double mean_abs = 0.0;
  std::vector<Entry> entries;

  /// All-zero layers make the strict comparison vacuous: every sparsity is 0.
  bool degenerate() const { return mean_abs == 0.0; }
};

/// Mean of |weight| over the whole kernel stack, accumulated in double.
inline double layer_mean_abs(const Tensor4& kernels) {
  if (kernels.empty()) throw ShapeError("mean of empty kernel stack");
  double sum = 0.0;
  for (float v : kernels.data()) sum += std::fabs(static_cast<double>(v));
  return sum / static_cast<double>(kernels.size());
}

/// Fraction of one kernel's weights with |weight| strictly below `mean_abs`.
inline double kernel_sparsity(const Tensor4& kernels, int kernel_index, double mean_abs) {
  const Shape4& kd = kernels.dims();
  if (kernel_index < 0 || kernel_index >= kd.n) {
    throw ConfigError("kernel index " + std::to_string(kernel_index) + " out of range [0," +
                      std::to_string(kd.n) + ")");
  }
  const std::size_t per_kernel =
      static_cast<std::size_t>(kd.c) * static_cast<std::size_t>(kd.h) *
      static_cast<std::size_t>(kd.w);
  const float* base = kernels.data().data() + static_cast<std::size_t>(kernel_index) * per_kernel;
  std::size_t below = 0;
  for (std::size_t i = 0; i < per_kernel; ++i) {
    if (std::fabs(static_cast<double>(base[i])) < mean_abs) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(per_kernel);
}

inline SparsityReport build_report(const Tensor4& kernels, int layer_index) {
  SparsityReport report;
  report.layer_index = layer_index;
  report.mean_abs = layer_mean_abs(kernels);
  report.entries.reserve(static_cast<std::size_t>(kernels.dims().n));
  for (int n = 0; n < kernels.dims().n; ++n) {
    report.entries.push_back({n, kernel_sparsity(kernels, n, report.mean_abs)});
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const SparsityReport::Entry& a, const SparsityReport::Entry& b) {
              if (a.sparsity != b.sparsity) return a.sparsity > b.sparsity;
              return a.kernel_index < b.kernel_index;
            });
  return report;
}

}  // namespace prunekit
