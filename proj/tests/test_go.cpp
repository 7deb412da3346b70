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

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "prunekit/go.hpp"

using namespace prunekit;

namespace {

double mean_of(const ReducingFactor& r) {
  return std::accumulate(r.values.begin(), r.values.end(), 0.0) /
         static_cast<double>(r.size());
}

Harness mean_harness() {
  return [](const ReducingFactor& r) { return HarnessOutcome{Network{}, mean_of(r)}; };
}

// Noiseless samples of p = w.r + b over random factor vectors.
std::vector<TrainingPair> planted_linear_pairs(const std::vector<double>& w, double b,
                                               int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 0.95);
  std::vector<TrainingPair> pairs;
  for (int s = 0; s < n; ++s) {
    TrainingPair pair;
    pair.r.values.resize(w.size());
    pair.p = b;
    for (std::size_t i = 0; i < w.size(); ++i) {
      pair.r.values[i] = dist(rng);
      pair.p += w[i] * pair.r.values[i];
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace

TEST_CASE("linear surrogate recovers a planted map", "[go]") {
  const std::vector<double> w{0.3, 0.5, -0.2};
  const double b = 0.07;
  const RegressionFit fit =
      train_regression(planted_linear_pairs(w, b, 24, 501), SurrogateKind::linear);

  REQUIRE(fit.model.kind == SurrogateKind::linear);
  REQUIRE(fit.model.input_dim == 3);
  REQUIRE(fit.final_loss < 1e-6);
  for (std::size_t i = 0; i < w.size(); ++i) {
    REQUIRE(fit.model.w[i] == Catch::Approx(w[i]).margin(1e-3));
  }
  REQUIRE(fit.model.b == Catch::Approx(b).margin(1e-3));
}

TEST_CASE("constant targets regress to the constant", "[go]") {
  std::vector<TrainingPair> pairs = planted_linear_pairs({0.0, 0.0}, 0.7, 8, 503);
  const RegressionFit fit = train_regression(pairs, SurrogateKind::linear);
  for (const TrainingPair& pair : pairs) {
    REQUIRE(fit.model.predict(pair.r) == Catch::Approx(0.7).margin(1e-4));
  }
}

TEST_CASE("hidden-layer surrogate beats linear on curved data", "[go]") {
  // p depends quadratically on the single factor, so a line cannot fit it.
  std::vector<TrainingPair> pairs;
  for (int s = 0; s < 25; ++s) {
    const double x = 0.04 * s;
    pairs.push_back({ReducingFactor{{x}}, (x - 0.4) * (x - 0.4)});
  }
  const RegressionFit linear = train_regression(pairs, SurrogateKind::linear);
  const RegressionFit hidden = train_regression(pairs, SurrogateKind::one_hidden);
  REQUIRE(hidden.final_loss < linear.final_loss / 10.0);
  REQUIRE(hidden.final_loss < 1e-3);
}

TEST_CASE("surrogate training input validation", "[go]") {
  REQUIRE_THROWS_AS(train_regression({}, SurrogateKind::linear), ConfigError);
  REQUIRE_THROWS_AS(train_regression({{ReducingFactor{{0.1}}, 0.5}}, SurrogateKind::linear),
                    ConfigError);
  // Mismatched factor lengths.
  REQUIRE_THROWS_AS(train_regression({{ReducingFactor{{0.1}}, 0.5},
                                      {ReducingFactor{{0.1, 0.2}}, 0.6}},
                                     SurrogateKind::linear),
                    ConfigError);
  // Non-finite target.
  REQUIRE_THROWS_AS(
      train_regression({{ReducingFactor{{0.1}}, 0.5},
                        {ReducingFactor{{0.2}}, std::numeric_limits<double>::infinity()}},
                       SurrogateKind::linear),
      ConfigError);
  REQUIRE_THROWS_AS(train_regression(planted_linear_pairs({0.3}, 0.0, 4, 505),
                                     SurrogateKind::linear, 0),
                    ConfigError);
  REQUIRE_THROWS_AS(train_regression(planted_linear_pairs({0.3}, 0.0, 4, 505),
                                     SurrogateKind::linear, 100, 17, 0.0),
                    ConfigError);
}

TEST_CASE("huge targets overflow the squared loss", "[go]") {
  const std::vector<TrainingPair> pairs{{ReducingFactor{{0.1}}, 1e308},
                                        {ReducingFactor{{0.9}}, -1e308}};
  REQUIRE_THROWS_AS(train_regression(pairs, SurrogateKind::linear), DivergenceError);
}

TEST_CASE("descent direction follows the sign of the miss", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::linear;
  model.input_dim = 2;
  model.w = {0.5, -0.25};
  model.b = 0.25;
  const ReducingFactor r{{0.5, 0.0}};  // predicts exactly 0.5

  SECTION("prediction above the target") {
    REQUIRE(surrogate_input_gradient(model, r, 0.25) == model.w);
  }
  SECTION("prediction below the target") {
    const std::vector<double> grad = surrogate_input_gradient(model, r, 0.75);
    REQUIRE(grad == std::vector<double>{-0.5, 0.25});
  }
  SECTION("prediction on the target") {
    REQUIRE(surrogate_input_gradient(model, r, 0.5) == std::vector<double>{0.0, 0.0});
  }
  SECTION("dimension mismatch") {
    REQUIRE_THROWS_AS(surrogate_input_gradient(model, ReducingFactor{{0.1}}, 0.5), ConfigError);
  }
}

TEST_CASE("hidden-layer jacobian matches finite differences", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::one_hidden;
  model.input_dim = 3;
  const int hidden = RegressionModel::kHiddenWidth;
  std::mt19937 rng(91);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  model.w1.resize(static_cast<std::size_t>(hidden * 3));
  model.b1.resize(static_cast<std::size_t>(hidden));
  model.w2.resize(static_cast<std::size_t>(hidden));
  for (auto& v : model.w1) v = dist(rng);
  for (auto& v : model.b1) v = 0.5 * dist(rng);
  for (auto& v : model.w2) v = dist(rng);
  model.b2 = dist(rng);

  ReducingFactor r{{0.3, 0.2, 0.4}};
  // Push any unit that is close to its activation threshold away from it so
  // the difference quotient below never straddles a kink.
  for (int j = 0; j < hidden; ++j) {
    double pre = model.b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < 3; ++i) {
      pre += model.w1[static_cast<std::size_t>(j * 3 + i)] * r.values[static_cast<std::size_t>(i)];
    }
    if (std::fabs(pre) < 0.05) model.b1[static_cast<std::size_t>(j)] += 0.1;
  }

  const std::vector<double> analytic = model.input_jacobian(r);
  const double h = 1e-5;
  for (std::size_t i = 0; i < 3; ++i) {
    ReducingFactor up = r;
    ReducingFactor down = r;
    up.values[i] += h;
    down.values[i] -= h;
    const double fd = (model.predict(up) - model.predict(down)) / (2.0 * h);
    REQUIRE(oracle::rel_error(analytic[i], fd, 1e-9) < 1e-8);
  }
}

TEST_CASE("sample collection mirrors the harness", "[go]") {
  const NetworkSpec spec = NetworkSpec::vdsr(6, 16);

  SECTION("measured drops satisfy the planted relation exactly") {
    const CollectResult data = collect_training_data(spec, 16, 901, mean_harness());
    REQUIRE(data.pairs.size() == 16);
    REQUIRE(data.skipped == 0);
    for (const TrainingPair& pair : data.pairs) {
      REQUIRE(pair.p == mean_of(pair.r));
      REQUIRE(pair.r.values.back() == 0.0);
      for (double v : pair.r.values) {
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
      }
    }
  }

  SECTION("zero sampling range pins every factor to zero") {
    const CollectResult data = collect_training_data(spec, 4, 903, mean_harness(), 0.0);
    for (const TrainingPair& pair : data.pairs) {
      for (double v : pair.r.values) REQUIRE(v == 0.0);
      REQUIRE(pair.p == 0.0);
    }
  }

  SECTION("same seed, same samples") {
    const CollectResult a = collect_training_data(spec, 12, 905, mean_harness());
    const CollectResult b = collect_training_data(spec, 12, 905, mean_harness());
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      REQUIRE(a.pairs[i].r == b.pairs[i].r);
      REQUIRE(a.pairs[i].p == b.pairs[i].p);
    }
    const CollectResult c = collect_training_data(spec, 12, 906, mean_harness());
    bool same = true;
    for (std::size_t i = 0; i < c.pairs.size(); ++i) same = same && c.pairs[i].r == a.pairs[i].r;
    REQUIRE_FALSE(same);
  }

  SECTION("harness failures are skipped and counted") {
    const Harness picky = [](const ReducingFactor& r) {
      if (r.values[0] > 0.3) throw InfeasibleError("too aggressive");
      return HarnessOutcome{Network{}, mean_of(r)};
    };
    const CollectResult data = collect_training_data(spec, 40, 907, picky);
    REQUIRE(data.skipped > 0);
    REQUIRE(data.pairs.size() + static_cast<std::size_t>(data.skipped) == 40);
    for (const TrainingPair& pair : data.pairs) REQUIRE(pair.r.values[0] <= 0.3);
  }

  SECTION("bad config") {
    REQUIRE_THROWS_AS(collect_training_data(spec, 0, 1, mean_harness()), ConfigError);
    REQUIRE_THROWS_AS(collect_training_data(spec, 4, 1, mean_harness(), 1.0), ConfigError);
    REQUIRE_THROWS_AS(collect_training_data(spec, 4, 1, mean_harness(), -0.1), ConfigError);
  }
}

TEST_CASE("optimization stops immediately on an already-met target", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::linear;
  model.input_dim = 3;
  model.w = {0.5, 0.25, 1.0};
  model.b = 0.05;

  GoConfig cfg;
  cfg.r0 = ReducingFactor{{0.25, 0.5, 0.0}};  // predicts exactly 0.3
  cfg.target_p = 0.3;
  const OptimizeResult out = optimize_r(model, cfg);
  REQUIRE(out.converged);
  REQUIRE(out.iterations == 0);
  REQUIRE(out.trajectory.size() == 1);
  REQUIRE(out.trajectory[0] == 0.0);
  REQUIRE(out.r == cfg.r0);
}

TEST_CASE("optimization reaches the target from both sides", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::linear;
  model.input_dim = 4;
  model.w = {0.5, 0.25, 0.25, 1.0};
  model.b = 0.05;
  // The pinned last layer leaves an effective squared gradient norm of
  // 0.375, so each step moves the prediction by at most 0.00375, well under
  // the 0.01 margin: no overshoot, monotone approach.

  GoConfig cfg;
  cfg.r0 = ReducingFactor{{0.1, 0.1, 0.1, 0.0}};  // predicts 0.15

  SECTION("target above the starting prediction") { cfg.target_p = 0.4; }
  SECTION("target below the starting prediction") { cfg.target_p = 0.05; }

  const OptimizeResult out = optimize_r(model, cfg);
  REQUIRE(out.converged);
  REQUIRE(out.iterations > 0);
  REQUIRE(std::fabs(model.predict(out.r) - cfg.target_p) < cfg.margin);
  for (std::size_t k = 1; k < out.trajectory.size(); ++k) {
    REQUIRE(out.trajectory[k] <= out.trajectory[k - 1]);
  }
  REQUIRE(out.r.values.back() == 0.0);
}

TEST_CASE("optimization respects the clamp box", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::linear;
  model.input_dim = 3;
  model.w = {5.0, -5.0, 1.0};
  model.b = 0.0;

  GoConfig cfg;
  cfg.r0 = ReducingFactor{{0.5, 0.5, 0.0}};
  cfg.target_p = 50.0;  // unreachable inside the box
  cfg.alpha = 10.0;     // huge steps slam into the bounds
  cfg.max_iters = 25;

  const OptimizeResult out = optimize_r(model, cfg);
  REQUIRE_FALSE(out.converged);
  REQUIRE(out.iterations == 25);
  REQUIRE(out.trajectory.size() == 26);
  for (double v : out.r.values) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 0.99);
  }
  REQUIRE(out.r.values.back() == 0.0);
  // The returned iterate is the best one seen.
  double best = out.trajectory[0];
  for (double t : out.trajectory) best = std::min(best, t);
  REQUIRE(std::fabs(model.predict(out.r) - cfg.target_p) == best);
}

TEST_CASE("optimization cannot move against a zero gradient", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::linear;
  model.input_dim = 2;
  model.w = {0.0, 0.0};
  model.b = 0.2;

  GoConfig cfg;
  cfg.r0 = ReducingFactor{{0.3, 0.0}};
  cfg.target_p = 0.9;
  cfg.max_iters = 7;

  const OptimizeResult out = optimize_r(model, cfg);
  REQUIRE_FALSE(out.converged);
  REQUIRE(out.iterations == 7);
  REQUIRE(out.r == cfg.r0);
  for (double t : out.trajectory) REQUIRE(t == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("optimization config validation", "[go]") {
  RegressionModel model;
  model.kind = SurrogateKind::linear;
  model.input_dim = 2;
  model.w = {0.1, 0.1};

  GoConfig cfg;
  cfg.r0 = ReducingFactor{{0.1, 0.1, 0.1}};
  REQUIRE_THROWS_AS(optimize_r(model, cfg), ConfigError);
  cfg.r0 = ReducingFactor{};
  cfg.alpha = 0.0;
  REQUIRE_THROWS_AS(optimize_r(model, cfg), ConfigError);
  cfg.alpha = 0.01;
  cfg.margin = 0.0;
  REQUIRE_THROWS_AS(optimize_r(model, cfg), ConfigError);
  cfg.margin = 0.01;
  cfg.max_iters = -1;
  REQUIRE_THROWS_AS(optimize_r(model, cfg), ConfigError);
}

TEST_CASE("closed loop hits the target drop within snapping error", "[go]") {
  const NetworkSpec spec = NetworkSpec::vdsr();
  GoConfig cfg;
  cfg.target_p = 0.1;
  GoDataConfig data_cfg;

  const GoResult result = run_go(spec, cfg, data_cfg, mean_harness());
  REQUIRE(result.data.pairs.size() == 64);
  REQUIRE(result.fit.final_loss < 1e-6);
  REQUIRE(result.opt.converged);
  REQUIRE(std::fabs(result.fit.model.predict(result.opt.r) - 0.1) < cfg.margin);
  // Snapping moves each factor by at most half a kernel-count quantum.
  REQUIRE(std::fabs(result.achieved_drop - 0.1) <= cfg.margin + 0.0625);
  REQUIRE(result.final_factors.values.back() == 0.0);
  REQUIRE(result.achieved_drop == mean_of(result.final_factors));
}

TEST_CASE("closed loop with a zero target leaves the network whole", "[go]") {
  const NetworkSpec spec = NetworkSpec::vdsr(6, 16);
  GoConfig cfg;
  cfg.target_p = 0.0;
  cfg.r0 = ReducingFactor{{0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
  GoDataConfig data_cfg;
  data_cfg.n_samples = 32;

  const GoResult result = run_go(spec, cfg, data_cfg, mean_harness());
  REQUIRE(result.opt.converged);
  REQUIRE(result.achieved_drop == 0.0);
  for (double v : result.final_factors.values) REQUIRE(v == 0.0);
}

TEST_CASE("closed loop is deterministic", "[go]") {
  const NetworkSpec spec = NetworkSpec::vdsr(8, 32);
  GoConfig cfg;
  cfg.target_p = 0.15;
  GoDataConfig data_cfg;
  data_cfg.n_samples = 24;

  const GoResult a = run_go(spec, cfg, data_cfg, mean_harness());
  const GoResult b = run_go(spec, cfg, data_cfg, mean_harness());
  REQUIRE(a.final_factors == b.final_factors);
  REQUIRE(a.achieved_drop == b.achieved_drop);
  REQUIRE(a.fit.final_loss == b.fit.final_loss);
  REQUIRE(a.opt.iterations == b.opt.iterations);
}
