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

#include <cassert>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"

namespace prunekit {

/// Extents of a rank-4 array, n outermost to w innermost.
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t volume() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

/// Dense rank-4 float array in row-major order (n outermost, w innermost).
/// Kernel stacks are stored as (N, C, H, W); a single feature map is the
/// degenerate case (1, C, H, W).
class Tensor4 {
 public:
  Tensor4() = default;

  explicit Tensor4(Shape4 dims, float fill = 0.0f)
      : dims_(dims), data_(checked_volume(dims), fill) {}

  Tensor4(Shape4 dims, std::vector<float> values) : dims_(dims), data_(std::move(values)) {
    if (data_.size() != checked_volume(dims)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + dims.str());
    }
  }

  static Tensor4 zeros(Shape4 dims) { return Tensor4(dims); }

  static Tensor4 full(Shape4 dims, float value) { return Tensor4(dims, value); }

  /// Uniform values in [lo, hi), drawn in row-major order from `rng`.
  static Tensor4 random_uniform(Shape4 dims, float lo, float hi, std::mt19937& rng) {
    Tensor4 t(dims);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (auto& v : t.data_) v = dist(rng);
    return t;
  }

  const Shape4& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  float& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const float& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  std::size_t index(int n, int c, int y, int x) const {
    assert(n >= 0 && n < dims_.n && c >= 0 && c < dims_.c);
    assert(y >= 0 && y < dims_.h && x >= 0 && x < dims_.w);
    return ((static_cast<std::size_t>(n) * dims_.c + c) * dims_.h + y) * dims_.w + x;
  }

  bool all_finite() const {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Tensor4&) const = default;

 private:
  static std::size_t checked_volume(const Shape4& dims) {
    if (dims.n < 0 || dims.c < 0 || dims.h < 0 || dims.w < 0) {
      throw ShapeError("negative tensor extent " + dims.str());
    }
    return dims.volume();
  }

  Shape4 dims_{};
  std::vector<float> data_;
};

}  // namespace prunekit
