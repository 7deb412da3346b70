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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "prunekit/lwp.hpp"
#include "prunekit/sr_harness.hpp"

using namespace prunekit;

namespace {

// Drop equal to the removed-weight fraction: monotone in pruning amount.
Harness removed_fraction_harness(const NetworkSpec& spec) {
  return [spec](const ReducingFactor& r) {
    return HarnessOutcome{Network{}, 1.0 - weights_remained(spec, r)};
  };
}

Harness sum_harness() {
  return [](const ReducingFactor& r) {
    return HarnessOutcome{Network{}, std::accumulate(r.values.begin(), r.values.end(), 0.0)};
  };
}

}  // namespace

TEST_CASE("segment split defaults", "[lwp]") {
  REQUIRE(SegmentSplit::for_depth(20) == SegmentSplit{6, 7, 7});
  REQUIRE(SegmentSplit::for_depth(3) == SegmentSplit{1, 1, 1});
  REQUIRE(SegmentSplit::for_depth(4) == SegmentSplit{1, 1, 2});
  REQUIRE(SegmentSplit::for_depth(10) == SegmentSplit{3, 3, 4});
  REQUIRE_THROWS_AS(SegmentSplit::for_depth(2), ConfigError);
  REQUIRE_THROWS_AS(validate_split({0, 10, 10}, 20), ConfigError);
  REQUIRE_THROWS_AS(validate_split({6, 7, 7}, 21), ConfigError);
}

TEST_CASE("adjustment raises the front and lowers the rest", "[lwp]") {
  ReducingFactor r_fix{{0.25, 0.25, 0.25, 0.25, 0.25, 0.0}};
  const SegmentSplit split{2, 2, 2};
  const ReducingFactor adjusted = apply_adjustment(r_fix, split, {0.1, 0.05, 0.02});
  REQUIRE(adjusted.values[0] == Catch::Approx(0.35).margin(1e-12));
  REQUIRE(adjusted.values[1] == Catch::Approx(0.35).margin(1e-12));
  REQUIRE(adjusted.values[2] == Catch::Approx(0.20).margin(1e-12));
  REQUIRE(adjusted.values[3] == Catch::Approx(0.20).margin(1e-12));
  REQUIRE(adjusted.values[4] == Catch::Approx(0.23).margin(1e-12));
  // The network's last layer never participates in rebalancing.
  REQUIRE(adjusted.values[5] == 0.0);

  REQUIRE_THROWS_AS(apply_adjustment(r_fix, split, {0.8, 0.0, 0.0}), ConfigError);
  REQUIRE_THROWS_AS(apply_adjustment(r_fix, split, {0.0, 0.3, 0.0}), ConfigError);
}

TEST_CASE("uniform sweep picks the reference budget row", "[lwp]") {
  const Network net = build_toy_vdsr(20, 64, 401);
  const NetworkSpec spec = NetworkSpec::of(net);
  const std::vector<double> candidates{0.12, 0.18, 0.25, 0.32, 0.38, 0.44, 0.50};

  const SweepResult sweep =
      uniform_sweep(net, candidates, 0.60, removed_fraction_harness(spec), 4);
  REQUIRE(sweep.rows.size() == 7);
  REQUIRE(sweep.rows[sweep.best_index].candidate == 0.25);
  REQUIRE(sweep.rows[sweep.best_index].kept[0] == 48);
  REQUIRE(sweep.rows[sweep.best_index].weights_remained == Catch::Approx(0.563).margin(0.001));
  REQUIRE_FALSE(sweep.rows[0].feasible);  // 0.12 keeps 76.6% > 60%
  REQUIRE_FALSE(sweep.rows[1].feasible);  // 0.18 keeps 66.1% > 60%
  for (std::size_t i = 2; i < 7; ++i) REQUIRE(sweep.rows[i].feasible);
}

TEST_CASE("uniform sweep trivial and error paths", "[lwp]") {
  const Network net = oracle::random_network({8, 8, 8, 8, 4}, 1, false, 403);
  const NetworkSpec spec = NetworkSpec::of(net);

  SECTION("single zero candidate under full budget") {
    const SweepResult sweep = uniform_sweep(net, {0.0}, 1.0, removed_fraction_harness(spec), 1);
    REQUIRE(sweep.rows.size() == 1);
    REQUIRE(sweep.rows[0].drop_db == 0.0);
    REQUIRE(sweep.rows[0].weights_remained == 1.0);
    REQUIRE(sweep.r_fix == uniform_factors(spec, 0.0));
  }

  SECTION("selects the feasible candidate with the smallest removal") {
    // Surviving fractions are roughly 0.78, 0.57, 0.26; only the last two
    // fit a 0.7 budget and the mock prefers the lighter pruning.
    const SweepResult sweep =
        uniform_sweep(net, {0.125, 0.25, 0.5}, 0.7, removed_fraction_harness(spec), 1);
    REQUIRE(sweep.rows[sweep.best_index].candidate == 0.25);
    REQUIRE_FALSE(sweep.rows[0].feasible);
  }

  SECTION("ties break toward the smaller surviving fraction") {
    const Harness constant = [](const ReducingFactor&) { return HarnessOutcome{Network{}, 0.0}; };
    const SweepResult sweep = uniform_sweep(net, {0.125, 0.375}, 1.0, constant, 1);
    REQUIRE(sweep.rows[sweep.best_index].candidate == 0.375);
  }

  SECTION("no feasible candidate lists the table") {
    REQUIRE_THROWS_WITH(uniform_sweep(net, {0.125, 0.25}, 0.1, removed_fraction_harness(spec), 1),
                        Catch::Matchers::ContainsSubstring("remained=") &&
                            Catch::Matchers::ContainsSubstring("no candidate meets budget"));
  }

  SECTION("bad config") {
    REQUIRE_THROWS_AS(uniform_sweep(net, {}, 0.5, removed_fraction_harness(spec), 1), ConfigError);
    REQUIRE_THROWS_AS(uniform_sweep(net, {0.1}, 0.0, removed_fraction_harness(spec), 1),
                      ConfigError);
    REQUIRE_THROWS_AS(uniform_sweep(net, {0.1}, 1.5, removed_fraction_harness(spec), 1),
                      ConfigError);
  }
}

TEST_CASE("rebalancing candidates include the reference segment row", "[lwp]") {
  const NetworkSpec spec = NetworkSpec::vdsr();
  const ReducingFactor r_fix = snap_to_architecture(uniform_factors(spec, 0.25), spec, 4);
  const std::vector<double> grid{0.0, 0.0625, 0.125, 0.1875};

  const std::vector<ReducingFactor> result =
      enumerate_balanced_adjustments(r_fix, {6, 7, 7}, spec, grid, 0.01, 4);

  // delta = 0 keeps r_fix itself in the result.
  REQUIRE(std::find(result.begin(), result.end(), r_fix) != result.end());

  // The front+0.1875 / middle-0.125 / end unchanged combination lands on the
  // reference (0.44, 0.12, 0.25) kernel counts: 36 / 56 / 48.
  bool found_reference = false;
  for (const ReducingFactor& cand : result) {
    const std::vector<int> counts = kept_counts(spec, cand);
    bool match = counts.back() == 1;
    for (int l = 0; l < 6; ++l) match = match && counts[static_cast<std::size_t>(l)] == 36;
    for (int l = 6; l < 13; ++l) match = match && counts[static_cast<std::size_t>(l)] == 56;
    for (int l = 13; l < 19; ++l) match = match && counts[static_cast<std::size_t>(l)] == 48;
    found_reference = found_reference || match;
  }
  REQUIRE(found_reference);

  // Every emitted candidate respects the budget tolerance.
  const double reference = weights_remained(spec, r_fix);
  for (const ReducingFactor& cand : result) {
    REQUIRE(std::fabs(weights_remained(spec, cand) - reference) <= 0.01);
    REQUIRE(cand.values.back() == 0.0);
  }
}

TEST_CASE("rebalancing equals a brute-force enumeration", "[lwp]") {
  NetworkSpec spec;
  spec.layers.push_back({8, 1, 3, 3});
  spec.layers.push_back({8, 8, 3, 3});
  spec.layers.push_back({8, 8, 3, 3});
  spec.layers.push_back({8, 8, 3, 3});
  spec.layers.push_back({8, 8, 3, 3});
  const ReducingFactor r_fix{{0.25, 0.25, 0.25, 0.25, 0.25}};
  const SegmentSplit split{1, 2, 2};
  const std::vector<double> grid{0.0, 0.125, 0.25};
  const double tolerance = 0.05;

  const std::vector<ReducingFactor> result =
      enumerate_balanced_adjustments(r_fix, split, spec, grid, tolerance, 1);

  std::vector<ReducingFactor> expected;
  const double reference = weights_remained(spec, r_fix);
  for (double df : grid) {
    for (double dm : grid) {
      for (double de : grid) {
        ReducingFactor cand = r_fix;
        cand.values[0] += df;
        cand.values[1] -= dm;
        cand.values[2] -= dm;
        cand.values[3] -= de;  // layer 4 is the exempt last layer
        bool in_range = true;
        for (double v : cand.values) in_range = in_range && v >= 0.0 && v < 1.0;
        if (!in_range) continue;
        ReducingFactor snapped = snap_to_architecture(cand, spec, 1);
        if (std::fabs(weights_remained(spec, snapped) - reference) <= tolerance) {
          expected.push_back(snapped);
        }
      }
    }
  }
  REQUIRE(result == expected);
}

TEST_CASE("rebalancing with an impossible tolerance reports guidance", "[lwp]") {
  const NetworkSpec spec = NetworkSpec::vdsr(6, 16);
  const ReducingFactor r_fix = uniform_factors(spec, 0.25);
  REQUIRE_THROWS_WITH(
      enumerate_balanced_adjustments(r_fix, {2, 2, 2}, spec, {0.33}, 1e-6, 4),
      Catch::Matchers::ContainsSubstring("widen the delta grid"));
}

TEST_CASE("run_lwp selects the minimal-drop rebalance row", "[lwp]") {
  const Network net = build_toy_vdsr(20, 64, 405);
  const NetworkSpec spec = NetworkSpec::of(net);
  LwpConfig cfg;
  cfg.candidates = {0.12, 0.25, 0.38};
  cfg.budget = 0.60;

  const LwpResult result = run_lwp(net, cfg, sum_harness());
  REQUIRE(result.sweep.rows[result.sweep.best_index].candidate == 0.25);
  REQUIRE(result.rebalance_rows.size() > 1);
  // The sweep winner opens the table, every row stays in the budget band,
  // and the reported best is the table minimum under the tie-break rule.
  REQUIRE(result.rebalance_rows[0].factors == result.sweep.r_fix);
  const double reference = weights_remained(spec, result.sweep.r_fix);
  std::size_t expected_best = 0;
  for (std::size_t i = 0; i < result.rebalance_rows.size(); ++i) {
    const SweepRow& row = result.rebalance_rows[i];
    REQUIRE(row.feasible);
    REQUIRE(std::fabs(row.weights_remained - reference) <= cfg.tolerance);
    const double drop =
        std::accumulate(row.factors.values.begin(), row.factors.values.end(), 0.0);
    REQUIRE(row.drop_db == drop);
    const SweepRow& champ = result.rebalance_rows[expected_best];
    if (drop < champ.drop_db ||
        (drop == champ.drop_db && row.weights_remained < champ.weights_remained)) {
      expected_best = i;
    }
  }
  REQUIRE(result.best_index == expected_best);
  REQUIRE(result.best_factors == result.rebalance_rows[expected_best].factors);
  REQUIRE(result.best_drop == result.rebalance_rows[expected_best].drop_db);
}

TEST_CASE("run_lwp with a zero-only grid returns the sweep winner unchanged", "[lwp]") {
  const Network net = oracle::random_network({8, 8, 8, 4}, 1, false, 407);
  LwpConfig cfg;
  cfg.candidates = {0.25, 0.5};
  cfg.budget = 1.0;
  cfg.delta_grid = {0.0};
  cfg.multiple = 1;
  cfg.split = {1, 1, 2};

  const NetworkSpec spec = NetworkSpec::of(net);
  const LwpResult result = run_lwp(net, cfg, removed_fraction_harness(spec));
  REQUIRE(result.rebalance_rows.size() == 1);
  REQUIRE(result.best_factors == result.sweep.r_fix);
  REQUIRE(result.best_drop == result.sweep.rows[result.sweep.best_index].drop_db);
}

TEST_CASE("run_lwp evaluates each snapped candidate once", "[lwp]") {
  const Network net = build_toy_vdsr(6, 16, 409);
  const NetworkSpec spec = NetworkSpec::of(net);

  int calls = 0;
  const Harness counting = [&](const ReducingFactor& r) {
    ++calls;
    return HarnessOutcome{Network{}, 1.0 - weights_remained(spec, r)};
  };

  LwpConfig cfg;
  cfg.candidates = {0.25};
  cfg.budget = 1.0;
  // Both grid deltas snap onto the same kernel counts at width 16.
  cfg.delta_grid = {0.0, 0.03125};
  cfg.tolerance = 0.05;

  const LwpResult result = run_lwp(net, cfg, counting);
  REQUIRE(result.rebalance_rows.size() == static_cast<std::size_t>(calls));
}

TEST_CASE("run_lwp is deterministic", "[lwp]") {
  const Network net = build_toy_vdsr(8, 16, 411);
  const NetworkSpec spec = NetworkSpec::of(net);
  LwpConfig cfg;
  cfg.candidates = {0.125, 0.25, 0.375};
  cfg.budget = 0.8;

  const LwpResult a = run_lwp(net, cfg, sum_harness());
  const LwpResult b = run_lwp(net, cfg, sum_harness());
  REQUIRE(a.best_factors == b.best_factors);
  REQUIRE(a.best_drop == b.best_drop);
  REQUIRE(a.rebalance_rows.size() == b.rebalance_rows.size());
  for (std::size_t i = 0; i < a.rebalance_rows.size(); ++i) {
    REQUIRE(a.rebalance_rows[i].factors == b.rebalance_rows[i].factors);
    REQUIRE(a.rebalance_rows[i].drop_db == b.rebalance_rows[i].drop_db);
  }
}

TEST_CASE("run_lwp against the real toy harness", "[lwp][slow]") {
  DatasetSpec dspec;
  dspec.n_images = 12;
  dspec.patch = 12;
  dspec.seed = 61;
  const Dataset ds = generate_dataset(dspec);
  const Network baseline = fine_tune(build_toy_vdsr(4, 8, 63), ds, 150, 0.1f).net;

  LwpConfig cfg;
  cfg.candidates = {0.125, 0.25};
  cfg.budget = 1.0;
  cfg.delta_grid = {0.0, 0.125};
  cfg.tolerance = 0.08;
  cfg.multiple = 1;
  cfg.split = {1, 1, 2};

  const LwpResult result = run_lwp(baseline, cfg, make_harness(baseline, ds, 3, 0.05f));
  REQUIRE(result.rebalance_rows.size() >= 1);
  REQUIRE(std::isfinite(result.best_drop));
  REQUIRE(result.best_net.layers.size() == baseline.layers.size());
  // The selected row carries the minimal drop of the table.
  for (const SweepRow& row : result.rebalance_rows) {
    REQUIRE(result.best_drop <= row.drop_db);
  }
}
