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

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "prunekit/checkpoint.hpp"

using namespace prunekit;

TEST_CASE("checkpoint round-trip is bit-exact", "[checkpoint]") {
  for (unsigned seed = 0; seed < 8; ++seed) {
    std::mt19937 widths_rng(seed);
    std::uniform_int_distribution<int> width_dist(1, 6);
    std::uniform_int_distribution<int> depth_dist(1, 4);
    std::vector<int> widths(static_cast<std::size_t>(depth_dist(widths_rng)));
    for (auto& w : widths) w = width_dist(widths_rng);
    Network net = oracle::random_network(widths, width_dist(widths_rng), false, seed + 100);

    const std::string bytes = serialize_network(net);
    Network loaded = deserialize_network(bytes);
    REQUIRE(serialize_network(loaded) == bytes);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      REQUIRE(loaded.layers[l].kernels == net.layers[l].kernels);
      REQUIRE(loaded.layers[l].bias == net.layers[l].bias);
      REQUIRE(loaded.layers[l].activation == net.layers[l].activation);
    }
    REQUIRE(loaded.residual == net.residual);
  }
}

TEST_CASE("checkpoint survives non-finite-free odd float bit patterns", "[checkpoint]") {
  Network net = oracle::random_network({2}, 1, false, 7);
  net.layers[0].kernels.at(0, 0, 0, 0) = -0.0f;
  net.layers[0].kernels.at(0, 0, 0, 1) = std::numeric_limits<float>::denorm_min();
  const std::string bytes = serialize_network(net);
  Network loaded = deserialize_network(bytes);
  REQUIRE(serialize_network(loaded) == bytes);
  REQUIRE(std::signbit(loaded.layers[0].kernels.at(0, 0, 0, 0)));
}

TEST_CASE("checkpoint file io", "[checkpoint]") {
  Network net = oracle::random_network({3, 1}, 1, true, 11);
  const std::string path =
      (std::filesystem::temp_directory_path() / "prunekit_ckpt_test.pkt").string();
  save_checkpoint(net, path);
  Network loaded = load_checkpoint(path);
  REQUIRE(serialize_network(loaded) == serialize_network(net));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects malformed input", "[checkpoint]") {
  Network net = oracle::random_network({2, 1}, 1, false, 13);
  std::string bytes = serialize_network(net);

  SECTION("bad magic") {
    bytes[0] = 'X';
    REQUIRE_THROWS_AS(deserialize_network(bytes), FormatError);
  }
  SECTION("bad version") {
    bytes[4] = 9;
    REQUIRE_THROWS_AS(deserialize_network(bytes), FormatError);
  }
  SECTION("truncated") {
    bytes.resize(bytes.size() / 2);
    REQUIRE_THROWS_AS(deserialize_network(bytes), FormatError);
  }
  SECTION("trailing garbage") {
    bytes.push_back('\0');
    REQUIRE_THROWS_AS(deserialize_network(bytes), FormatError);
  }
  SECTION("missing file") { REQUIRE_THROWS_AS(load_checkpoint("/nonexistent/nope.pkt"), IoError); }
}
