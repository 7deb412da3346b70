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

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/network.hpp"
#include "prunekit/pruning.hpp"

namespace prunekit {

/// Front/middle/end segmentation of a depth-L network.
struct SegmentSplit {
  int front = 0;
  int middle = 0;
  int end = 0;

  int total() const { return front + middle + end; }
  bool operator==(const SegmentSplit&) const = default;

  /// Front takes ~30% of the layers, the rest splits evenly with the end
  /// segment taking any odd layer. Depth 20 gives (6, 7, 7).
  static SegmentSplit for_depth(int depth) {
    if (depth < 3) throw ConfigError("segment split needs depth >= 3, got " + std::to_string(depth));
    SegmentSplit s;
    s.front = std::max(1, static_cast<int>(std::floor(0.3 * depth)));
    const int rest = depth - s.front;
    s.middle = rest / 2;
    s.end = rest - s.middle;
    return s;
  }
};

inline void validate_split(const SegmentSplit& split, std::size_t depth) {
  if (split.front < 1 || split.middle < 1 || split.end < 1) {
    throw ConfigError("each segment needs at least one layer, got (" +
                      std::to_string(split.front) + "," + std::to_string(split.middle) + "," +
                      std::to_string(split.end) + ")");
  }
  if (static_cast<std::size_t>(split.total()) != depth) {
    throw ConfigError("segment lengths sum to " + std::to_string(split.total()) +
                      " but the network has " + std::to_string(depth) + " layers");
  }
}

/// Per-segment changes to a uniform factor vector: the front segment prunes
/// harder, middle and end prune softer.
struct SegmentAdjustment {
  double front = 0.0;
  double middle = 0.0;
  double end = 0.0;
};

/// r_fix with the front segment's factors raised by `adj.front` and the
/// middle/end segments lowered by `adj.middle`/`adj.end`. The network's last
/// layer is exempt and keeps its r_fix value. Throws if any adjusted factor
/// leaves [0, 1).
inline ReducingFactor apply_adjustment(const ReducingFactor& r_fix, const SegmentSplit& split,
                                       const SegmentAdjustment& adj) {
  validate_split(split, r_fix.size());
  ReducingFactor out = r_fix;
  const std::size_t depth = r_fix.size();
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    if (l < static_cast<std::size_t>(split.front)) {
      out.values[l] += adj.front;
    } else if (l < static_cast<std::size_t>(split.front + split.middle)) {
      out.values[l] -= adj.middle;
    } else {
      out.values[l] -= adj.end;
    }
  }
  validate_factors(out, depth);
  return out;
}

/// One evaluated candidate in a sweep or rebalancing table.
struct SweepRow {
  double candidate = 0.0;  // requested uniform value, if any
  ReducingFactor factors;  // snapped
  std::vector<int> kept;
  double weights_remained = 0.0;
  double drop_db = 0.0;
  bool feasible = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best_index = 0;
  ReducingFactor r_fix;  // snapped factors of the winning row
};

namespace detail {

inline std::string sweep_table_message(const std::vector<SweepRow>& rows, double budget) {
  std::string msg = "no candidate meets budget " + std::to_string(budget) + ":";
  for (const SweepRow& row : rows) {
    char line[96];
    std::snprintf(line, sizeof(line), " [r=%.4f remained=%.4f drop=%.4f]", row.candidate,
                  row.weights_remained, row.drop_db);
    msg += line;
  }
  return msg;
}

// Minimal drop wins; ties prefer the smaller surviving-weight fraction, then
// the earlier row.
inline bool sweep_row_better(const SweepRow& a, const SweepRow& b) {
  if (a.drop_db != b.drop_db) return a.drop_db < b.drop_db;
  return a.weights_remained < b.weights_remained;
}

}  // namespace detail

/// Evaluates each uniform candidate (snapped) through the harness and picks
/// the best-performing one whose surviving-weight fraction fits the budget.
inline SweepResult uniform_sweep(const Network& net, const std::vector<double>& candidates,
                                 double budget, const Harness& harness, int multiple = 4) {
  validate_network(net);
  if (candidates.empty()) throw ConfigError("uniform sweep needs at least one candidate");
  if (!(budget > 0.0 && budget <= 1.0)) {
    throw ConfigError("budget must be in (0,1], got " + std::to_string(budget));
  }
  const NetworkSpec spec = NetworkSpec::of(net);

  SweepResult result;
  for (double c : candidates) {
    SweepRow row;
    row.candidate = c;
    row.factors = snap_to_architecture(uniform_factors(spec, c), spec, multiple);
    row.kept = kept_counts(spec, row.factors);
    row.weights_remained = weights_remained(spec, row.factors);
    row.drop_db = harness(row.factors).drop_db;
    row.feasible = row.weights_remained <= budget;
    result.rows.push_back(std::move(row));
  }

  bool found = false;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (!result.rows[i].feasible) continue;
    if (!found || detail::sweep_row_better(result.rows[i], result.rows[result.best_index])) {
      result.best_index = i;
      found = true;
    }
  }
  if (!found) {
    throw InfeasibleError(detail::sweep_table_message(result.rows, budget));
  }
  result.r_fix = result.rows[result.best_index].factors;
  return result;
}

/// All grid combinations (front +delta, middle -delta, end -delta), snapped,
/// whose surviving-weight fraction stays within `tolerance` of r_fix's.
/// Combinations that push any factor out of [0,1) are skipped. Order follows
/// the grid (front outermost, end innermost); duplicates after snapping are
/// kept.
inline std::vector<ReducingFactor> enumerate_balanced_adjustments(
    const ReducingFactor& r_fix, const SegmentSplit& split, const NetworkSpec& spec,
    const std::vector<double>& delta_grid, double tolerance, int multiple = 4) {
  validate_spec(spec);
  validate_factors(r_fix, spec.size());
  validate_split(split, spec.size());
  if (delta_grid.empty()) throw ConfigError("delta grid is empty");
  if (!(tolerance > 0.0)) {
    throw ConfigError("tolerance must be positive, got " + std::to_string(tolerance));
  }

  const double reference = weights_remained(spec, r_fix);
  std::vector<ReducingFactor> result;
  for (double df : delta_grid) {
    for (double dm : delta_grid) {
      for (double de : delta_grid) {
        ReducingFactor adjusted;
        try {
          adjusted = apply_adjustment(r_fix, split, {df, dm, de});
        } catch (const ConfigError&) {
          continue;  // combination leaves [0,1)
        }
        ReducingFactor snapped = snap_to_architecture(adjusted, spec, multiple);
        if (std::fabs(weights_remained(spec, snapped) - reference) <= tolerance) {
          result.push_back(std::move(snapped));
        }
      }
    }
  }
  if (result.empty()) {
    throw InfeasibleError("no segment adjustment keeps the budget within " +
                          std::to_string(tolerance) +
                          "; widen the delta grid or relax the tolerance");
  }
  return result;
}

struct LwpConfig {
  std::vector<double> candidates;  // uniform sweep values
  double budget = 0.6;
  SegmentSplit split;  // all-zero: derive from depth via SegmentSplit::for_depth
  std::vector<double> delta_grid = {0.0, 0.0625, 0.125, 0.1875};
  double tolerance = 0.01;
  int multiple = 4;
};

struct LwpResult {
  SweepResult sweep;
  std::vector<SweepRow> rebalance_rows;  // unique snapped candidates, in discovery order
  std::size_t best_index = 0;            // into rebalance_rows
  ReducingFactor best_factors;
  double best_drop = 0.0;
  Network best_net;
};

/// Algorithm: sweep uniform candidates to fix the budget, enumerate
/// near-budget segment rebalancings around the winner, evaluate each through
/// the harness, and return the overall minimal-drop model. Candidates that
/// snap to identical kept-kernel counts are evaluated once.
inline LwpResult run_lwp(const Network& net, const LwpConfig& cfg, const Harness& harness) {
  validate_network(net);
  const NetworkSpec spec = NetworkSpec::of(net);
  const SegmentSplit split =
      cfg.split == SegmentSplit{} ? SegmentSplit::for_depth(static_cast<int>(spec.size()))
                                  : cfg.split;
  validate_split(split, spec.size());

  // Kept-count keyed cache so rebalancing never re-runs the harness on a
  // candidate the sweep (or an earlier combination) already evaluated.
  std::map<std::vector<int>, HarnessOutcome> cache;
  const Harness cached_harness = [&](const ReducingFactor& r) {
    const std::vector<int> key = kept_counts(spec, r);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, harness(r)).first;
    return it->second;
  };

  LwpResult result;
  result.sweep = uniform_sweep(net, cfg.candidates, cfg.budget, cached_harness, cfg.multiple);

  std::vector<ReducingFactor> candidates{result.sweep.r_fix};
  std::vector<ReducingFactor> adjusted = enumerate_balanced_adjustments(
      result.sweep.r_fix, split, spec, cfg.delta_grid, cfg.tolerance, cfg.multiple);
  candidates.insert(candidates.end(), adjusted.begin(), adjusted.end());

  std::map<std::vector<int>, bool> seen;
  for (const ReducingFactor& r : candidates) {
    const std::vector<int> key = kept_counts(spec, r);
    if (seen.count(key) != 0) continue;
    seen.emplace(key, true);
    SweepRow row;
    row.factors = r;
    row.kept = key;
    row.weights_remained = weights_remained(spec, r);
    row.drop_db = cached_harness(r).drop_db;
    row.feasible = true;
    result.rebalance_rows.push_back(std::move(row));
  }

  for (std::size_t i = 1; i < result.rebalance_rows.size(); ++i) {
    if (detail::sweep_row_better(result.rebalance_rows[i],
                                 result.rebalance_rows[result.best_index])) {
      result.best_index = i;
    }
  }
  const SweepRow& best = result.rebalance_rows[result.best_index];
  result.best_factors = best.factors;
  result.best_drop = best.drop_db;
  result.best_net = cache.at(best.kept).net;
  return result;
}

}  // namespace prunekit
