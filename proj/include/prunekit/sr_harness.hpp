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
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/checkpoint.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/network.hpp"
#include "prunekit/pruning.hpp"
#include "prunekit/sparsity.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

enum class Degradation : unsigned char { downsample2x_then_bilinear = 0 };

/// Recipe for a synthetic single-channel super-resolution dataset.
struct DatasetSpec {
  int n_images = 32;
  int patch = 16;
  std::uint32_t seed = 7;
  Degradation degradation = Degradation::downsample2x_then_bilinear;

  bool operator==(const DatasetSpec&) const = default;
};

inline void validate_dataset_spec(const DatasetSpec& spec) {
  if (spec.n_images < 2) {
    throw ConfigError("dataset needs at least 2 images (train + test), got " +
                      std::to_string(spec.n_images));
  }
  if (spec.patch < 8) {
    throw ConfigError("patch edge must be at least 8, got " + std::to_string(spec.patch));
  }
  if (spec.patch % 2 != 0) {
    throw ConfigError("patch edge must be even for the 2x degradation, got " +
                      std::to_string(spec.patch));
  }
}

/// Paired low/high resolution images, first `train_count` for training and
/// the remainder for testing.
struct Dataset {
  std::vector<Tensor4> lowres;
  std::vector<Tensor4> highres;
  std::size_t train_count = 0;

  std::size_t size() const { return highres.size(); }

  TrainBatch train_pairs() const {
    TrainBatch batch;
    for (std::size_t i = 0; i < train_count; ++i) batch.emplace_back(lowres[i], highres[i]);
    return batch;
  }

  TrainBatch test_pairs() const {
    TrainBatch batch;
    for (std::size_t i = train_count; i < size(); ++i) batch.emplace_back(lowres[i], highres[i]);
    return batch;
  }
};

namespace detail {

inline std::size_t train_split_count(std::size_t n_images) {
  return n_images - std::max<std::size_t>(1, n_images / 4);
}

// Smooth random image: a few seeded 2-D sinusoids summed, then min-max
// normalized into [0,1]. Degenerate (flat) images become 0.5 everywhere.
inline Tensor4 sinusoid_image(int patch, std::mt19937& rng) {
  std::uniform_int_distribution<int> wave_count(3, 5);
  std::uniform_real_distribution<float> amp(0.3f, 1.0f);
  std::uniform_real_distribution<float> freq(0.5f, 3.0f);
  std::uniform_real_distribution<float> phase(0.0f, 6.2831853f);

  const int waves = wave_count(rng);
  std::vector<float> ay(waves), fy(waves), fx(waves), ph(waves);
  for (int k = 0; k < waves; ++k) {
    ay[k] = amp(rng);
    fy[k] = freq(rng);
    fx[k] = freq(rng);
    ph[k] = phase(rng);
  }

  Tensor4 img({1, 1, patch, patch});
  const float tau = 6.2831853f;
  for (int y = 0; y < patch; ++y) {
    for (int x = 0; x < patch; ++x) {
      float v = 0.0f;
      for (int k = 0; k < waves; ++k) {
        v += ay[k] * std::sin(tau * (fy[k] * y + fx[k] * x) / static_cast<float>(patch) + ph[k]);
      }
      img.at(0, 0, y, x) = v;
    }
  }

  const auto [lo_it, hi_it] = std::minmax_element(img.data().begin(), img.data().end());
  const float lo = *lo_it;
  const float range = *hi_it - lo;
  if (range < 1e-12f) {
    for (auto& v : img.data()) v = 0.5f;
  } else {
    for (auto& v : img.data()) v = (v - lo) / range;
  }
  return img;
}

inline float lerp_exact(float a, float b, float t) { return a + t * (b - a); }

}  // namespace detail

/// 2x box downsample followed by bilinear upsample back to the original size.
/// Constant images pass through exactly.
inline Tensor4 degrade(const Tensor4& high, Degradation kind) {
  if (kind != Degradation::downsample2x_then_bilinear) {
    throw ConfigError("unknown degradation kind");
  }
  const Shape4& d = high.dims();
  if (d.n != 1 || d.c != 1 || d.h < 2 || d.w < 2 || d.h % 2 != 0 || d.w % 2 != 0) {
    throw ShapeError("degrade expects a (1,1,even,even) image, got " + d.str());
  }
  const int hh = d.h / 2;
  const int hw = d.w / 2;

  Tensor4 small({1, 1, hh, hw});
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const float sum = (high.at(0, 0, 2 * y, 2 * x) + high.at(0, 0, 2 * y, 2 * x + 1)) +
                        (high.at(0, 0, 2 * y + 1, 2 * x) + high.at(0, 0, 2 * y + 1, 2 * x + 1));
      small.at(0, 0, y, x) = 0.25f * sum;
    }
  }

  Tensor4 low({1, 1, d.h, d.w});
  for (int y = 0; y < d.h; ++y) {
    const float sy = 0.5f * static_cast<float>(y) - 0.25f;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, hh - 1);
    const int y1 = std::min(y0 + 1, hh - 1);
    const float ty = std::clamp(sy - static_cast<float>(y0), 0.0f, 1.0f);
    for (int x = 0; x < d.w; ++x) {
      const float sx = 0.5f * static_cast<float>(x) - 0.25f;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, hw - 1);
      const int x1 = std::min(x0 + 1, hw - 1);
      const float tx = std::clamp(sx - static_cast<float>(x0), 0.0f, 1.0f);
      const float top = detail::lerp_exact(small.at(0, 0, y0, x0), small.at(0, 0, y0, x1), tx);
      const float bottom = detail::lerp_exact(small.at(0, 0, y1, x0), small.at(0, 0, y1, x1), tx);
      low.at(0, 0, y, x) = detail::lerp_exact(top, bottom, ty);
    }
  }
  return low;
}

inline Dataset generate_dataset(const DatasetSpec& spec) {
  validate_dataset_spec(spec);
  std::mt19937 rng(spec.seed);
  Dataset ds;
  ds.highres.reserve(static_cast<std::size_t>(spec.n_images));
  ds.lowres.reserve(static_cast<std::size_t>(spec.n_images));
  for (int i = 0; i < spec.n_images; ++i) {
    Tensor4 high = detail::sinusoid_image(spec.patch, rng);
    ds.lowres.push_back(degrade(high, spec.degradation));
    ds.highres.push_back(std::move(high));
  }
  ds.train_count = detail::train_split_count(static_cast<std::size_t>(spec.n_images));
  return ds;
}

/// Builds a dataset from user-supplied high-resolution images (each
/// (1,1,even,even), values in [0,1]) using the same degradation and split.
inline Dataset make_dataset_from_images(std::vector<Tensor4> images,
                                        Degradation kind = Degradation::downsample2x_then_bilinear) {
  if (images.size() < 2) {
    throw ConfigError("dataset needs at least 2 images (train + test), got " +
                      std::to_string(images.size()));
  }
  Dataset ds;
  ds.highres = std::move(images);
  ds.lowres.reserve(ds.highres.size());
  for (const Tensor4& high : ds.highres) ds.lowres.push_back(degrade(high, kind));
  ds.train_count = detail::train_split_count(ds.highres.size());
  return ds;
}

/// Reads a binary (P5) PGM grayscale image into a (1,1,H,W) tensor scaled to
/// [0,1]. Only 8-bit files (maxval <= 255) are accepted.
inline Tensor4 read_pgm(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::size_t pos = 0;

  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto next_int = [&]() -> long {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError(path + ": malformed PGM header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1000000000L) throw FormatError(path + ": absurd value in PGM header");
      ++pos;
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError(path + ": not a binary PGM (P5) file");
  }
  pos = 2;
  const long width = next_int();
  const long height = next_int();
  const long maxval = next_int();
  if (width < 1 || height < 1) throw FormatError(path + ": bad PGM dimensions");
  if (maxval < 1 || maxval > 255) {
    throw FormatError(path + ": only 8-bit PGM supported, maxval " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(path + ": malformed PGM header");
  }
  ++pos;  // single whitespace separates header from raster

  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos != expected) {
    throw FormatError(path + ": PGM raster has " + std::to_string(bytes.size() - pos) +
                      " bytes, expected " + std::to_string(expected));
  }

  Tensor4 img({1, 1, static_cast<int>(height), static_cast<int>(width)});
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < expected; ++i) {
    img.data()[i] = scale * static_cast<float>(static_cast<std::uint8_t>(bytes[pos + i]));
  }
  return img;
}

// Dataset cache format "PKDS":
//   magic "PKDS", u32 version (1), u32 n_images, u32 patch, u32 seed,
//   u8 degradation, then per image: patch*patch f32 highres followed by
//   patch*patch f32 lowres. Little-endian throughout.

inline std::uint64_t dataset_spec_hash(const DatasetSpec& spec) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(spec.n_images), 4);
  mix(static_cast<std::uint64_t>(spec.patch), 4);
  mix(spec.seed, 4);
  mix(static_cast<std::uint64_t>(spec.degradation), 1);
  return h;
}

inline std::string dataset_cache_name(const DatasetSpec& spec) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(dataset_spec_hash(spec)));
  return std::string("pkds_") + buf + ".bin";
}

inline void save_dataset(const Dataset& ds, const DatasetSpec& spec, const std::string& path) {
  validate_dataset_spec(spec);
  if (ds.size() != static_cast<std::size_t>(spec.n_images)) {
    throw ConfigError("dataset image count does not match its spec");
  }
  std::string out;
  out += "PKDS";
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(spec.n_images));
  detail::put_u32(out, static_cast<std::uint32_t>(spec.patch));
  detail::put_u32(out, spec.seed);
  out.push_back(static_cast<char>(spec.degradation));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (float v : ds.highres[i].data()) detail::put_f32(out, v);
    for (float v : ds.lowres[i].data()) detail::put_f32(out, v);
  }
  detail::write_file_bytes(path, out);
}

inline Dataset load_dataset(const std::string& path, const DatasetSpec& expected) {
  const std::string bytes = detail::read_file_bytes(path);
  detail::ByteReader reader(bytes, path);
  reader.expect_magic("PKDS");
  const std::uint32_t version = reader.u32();
  if (version != 1) {
    throw FormatError(path + ": unsupported dataset version " + std::to_string(version));
  }
  DatasetSpec stored;
  stored.n_images = static_cast<int>(reader.u32());
  stored.patch = static_cast<int>(reader.u32());
  stored.seed = reader.u32();
  const std::uint8_t kind = reader.u8();
  if (kind > 0) throw FormatError(path + ": unknown degradation code " + std::to_string(kind));
  stored.degradation = static_cast<Degradation>(kind);
  if (stored != expected) {
    throw FormatError(path + ": cached dataset was built from a different spec");
  }
  validate_dataset_spec(stored);

  Dataset ds;
  const Shape4 dims{1, 1, stored.patch, stored.patch};
  for (int i = 0; i < stored.n_images; ++i) {
    Tensor4 high(dims);
    for (auto& v : high.data()) v = reader.f32();
    Tensor4 low(dims);
    for (auto& v : low.data()) v = reader.f32();
    ds.highres.push_back(std::move(high));
    ds.lowres.push_back(std::move(low));
  }
  if (!reader.at_end()) throw FormatError(path + ": trailing bytes after payload");
  ds.train_count = detail::train_split_count(static_cast<std::size_t>(stored.n_images));
  return ds;
}

/// Returns the cached dataset at cache_dir if one matches `spec`, otherwise
/// generates and caches it. An empty cache_dir disables caching.
inline Dataset load_or_generate(const DatasetSpec& spec, const std::string& cache_dir) {
  validate_dataset_spec(spec);
  if (cache_dir.empty()) return generate_dataset(spec);
  const std::string path = cache_dir + "/" + dataset_cache_name(spec);
  try {
    return load_dataset(path, spec);
  } catch (const IoError&) {
    // no cache yet
  } catch (const FormatError&) {
    // stale or corrupt cache; regenerate below
  }
  Dataset ds = generate_dataset(spec);
  save_dataset(ds, spec, path);
  return ds;
}

/// The residual network shape used throughout: 1 -> width 3x3 conv layers
/// with relu, a final width -> 1 identity layer, and an input skip
/// connection. Defaults are desk scale; depth=20, width=64 is full scale.
inline Network build_toy_vdsr(int depth = 6, int width = 16, std::uint32_t seed = 7601) {
  if (depth < 2 || width < 2) {
    throw ConfigError("toy vdsr needs depth >= 2 and width >= 2, got depth " +
                      std::to_string(depth) + " width " + std::to_string(width));
  }
  std::mt19937 rng(seed);
  Network net;
  net.residual = true;
  int in_ch = 1;
  for (int l = 0; l < depth; ++l) {
    const int out_ch = l + 1 == depth ? 1 : width;
    const float scale = std::sqrt(1.0f / (9.0f * static_cast<float>(in_ch)));
    ConvLayer layer;
    layer.kernels = Tensor4::random_uniform({out_ch, in_ch, 3, 3}, -scale, scale, rng);
    layer.bias.assign(static_cast<std::size_t>(out_ch), 0.0f);
    layer.activation = l + 1 == depth ? Activation::identity : Activation::relu;
    net.layers.push_back(std::move(layer));
    in_ch = out_ch;
  }
  validate_network(net);
  return net;
}

/// Mean test-split PSNR of each network against the high-resolution targets,
/// and their difference.
struct HarnessResult {
  double baseline_psnr = 0.0;
  double pruned_psnr = 0.0;
  double drop = 0.0;
};

inline HarnessResult evaluate(const Network& baseline, const Network& pruned,
                              const Dataset& dataset) {
  if (dataset.train_count >= dataset.size()) {
    throw ConfigError("dataset has no test images");
  }
  double base_sum = 0.0;
  double pruned_sum = 0.0;
  int count = 0;
  for (std::size_t i = dataset.train_count; i < dataset.size(); ++i) {
    base_sum += psnr(network_forward(baseline, dataset.lowres[i]), dataset.highres[i]);
    pruned_sum += psnr(network_forward(pruned, dataset.lowres[i]), dataset.highres[i]);
    ++count;
  }
  HarnessResult out;
  out.baseline_psnr = base_sum / count;
  out.pruned_psnr = pruned_sum / count;
  out.drop = out.baseline_psnr - out.pruned_psnr;
  return out;
}

/// Fine-tuned copy of the network plus the per-epoch training loss curve
/// (loss measured before each step). epochs = 0 returns the input unchanged.
struct FineTuneResult {
  Network net;
  std::vector<double> losses;
};

inline FineTuneResult fine_tune(const Network& net, const Dataset& dataset, int epochs,
                                float learning_rate = 1e-3f) {
  if (epochs < 0) throw ConfigError("epochs must be >= 0, got " + std::to_string(epochs));
  if (learning_rate <= 0.0f) {
    throw ConfigError("learning rate must be positive, got " + std::to_string(learning_rate));
  }
  FineTuneResult out{net, {}};
  if (epochs == 0) return out;
  const TrainBatch batch = dataset.train_pairs();
  if (batch.empty()) throw ConfigError("dataset has no training images");
  out.losses.reserve(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) {
    out.losses.push_back(backward_and_step(out.net, batch, learning_rate));
  }
  return out;
}

/// The real evaluation callback: prune the baseline by the given factors
/// (ranked by its own sparsity reports), fine-tune on the train split, and
/// measure the PSNR drop on the test split.
inline Harness make_harness(Network baseline, Dataset dataset, int epochs = 3,
                            float learning_rate = 1e-3f) {
  validate_network(baseline);
  std::vector<SparsityReport> reports;
  reports.reserve(baseline.layers.size());
  for (std::size_t l = 0; l < baseline.layers.size(); ++l) {
    reports.push_back(build_report(baseline.layers[l].kernels, static_cast<int>(l)));
  }
  return [baseline = std::move(baseline), dataset = std::move(dataset),
          reports = std::move(reports), epochs, learning_rate](const ReducingFactor& r) {
    const PruningPlan plan = plan_from_factors(baseline, r, reports);
    const Network pruned = apply_plan(baseline, plan);
    FineTuneResult tuned = fine_tune(pruned, dataset, epochs, learning_rate);
    const HarnessResult result = evaluate(baseline, tuned.net, dataset);
    return HarnessOutcome{std::move(tuned.net), result.drop};
  };
}

}  // namespace prunekit
