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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/network.hpp"

// Checkpoint format "PKT1":
//   magic "PKT1", u32 version (1), u32 layer count,
//   per layer: u32 N, C, H, W; N*C*H*W f32 kernels; N f32 biases;
//              u8 activation (0 identity, 1 relu),
//   u8 residual flag.
// All integers and floats little-endian. Round-trips are bit-exact.

namespace prunekit {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void expect_magic(const char* magic) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
      throw FormatError(name_ + ": bad magic, expected " + std::string(magic, 4));
    }
    pos_ += 4;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError(name_ + ": truncated file");
  }

  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path);
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path);
}

}  // namespace detail

inline std::string serialize_network(const Network& net) {
  validate_network(net);
  std::string out;
  out += "PKT1";
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const ConvLayer& layer : net.layers) {
    const Shape4& kd = layer.kernels.dims();
    detail::put_u32(out, static_cast<std::uint32_t>(kd.n));
    detail::put_u32(out, static_cast<std::uint32_t>(kd.c));
    detail::put_u32(out, static_cast<std::uint32_t>(kd.h));
    detail::put_u32(out, static_cast<std::uint32_t>(kd.w));
    for (float v : layer.kernels.data()) detail::put_f32(out, v);
    for (float v : layer.bias) detail::put_f32(out, v);
    out.push_back(static_cast<char>(layer.activation));
  }
  out.push_back(net.residual ? 1 : 0);
  return out;
}

inline Network deserialize_network(const std::string& bytes, const std::string& name = "checkpoint") {
  detail::ByteReader reader(bytes, name);
  reader.expect_magic("PKT1");
  const std::uint32_t version = reader.u32();
  if (version != 1) {
    throw FormatError(name + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t layer_count = reader.u32();
  Network net;
  net.layers.reserve(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    Shape4 kd{static_cast<int>(reader.u32()), static_cast<int>(reader.u32()),
              static_cast<int>(reader.u32()), static_cast<int>(reader.u32())};
    if (kd.volume() > (1u << 30)) {
      throw FormatError(name + ": implausible kernel dims " + kd.str());
    }
    ConvLayer layer;
    layer.kernels = Tensor4(kd);
    for (auto& v : layer.kernels.data()) v = reader.f32();
    layer.bias.resize(static_cast<std::size_t>(kd.n));
    for (auto& v : layer.bias) v = reader.f32();
    const std::uint8_t act = reader.u8();
    if (act > 1) throw FormatError(name + ": unknown activation code " + std::to_string(act));
    layer.activation = static_cast<Activation>(act);
    net.layers.push_back(std::move(layer));
  }
  net.residual = reader.u8() != 0;
  if (!reader.at_end()) throw FormatError(name + ": trailing bytes after payload");
  validate_network(net);
  return net;
}

inline void save_checkpoint(const Network& net, const std::string& path) {
  detail::write_file_bytes(path, serialize_network(net));
}

inline Network load_checkpoint(const std::string& path) {
  return deserialize_network(detail::read_file_bytes(path), path);
}

}  // namespace prunekit
