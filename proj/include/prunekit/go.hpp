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
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/network.hpp"
#include "prunekit/pruning.hpp"

namespace prunekit {

/// One observation for the surrogate: a factor vector and the measured
/// performance drop it produced.
struct TrainingPair {
  ReducingFactor r;
  double p = 0.0;
};

enum class SurrogateKind { linear, one_hidden };

/// Differentiable surrogate mapping factor vectors to predicted drop.
/// Linear: w.r + b. One-hidden: w2.relu(W1 r + b1) + b2 with a fixed hidden
/// width.
struct RegressionModel {
  static constexpr int kHiddenWidth = 16;

  SurrogateKind kind = SurrogateKind::linear;
  int input_dim = 0;
  std::vector<double> w;  // linear weights (input_dim)
  double b = 0.0;
  std::vector<double> w1;  // hidden x input, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  int hidden() const { return kind == SurrogateKind::one_hidden ? kHiddenWidth : 0; }

  double predict(const ReducingFactor& r) const {
    check_input(r);
    if (kind == SurrogateKind::linear) {
      double out = b;
      for (int i = 0; i < input_dim; ++i) out += w[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
      return out;
    }
    double out = b2;
    for (int j = 0; j < kHiddenWidth; ++j) {
      double pre = b1[static_cast<std::size_t>(j)];
      for (int i = 0; i < input_dim; ++i) {
        pre += w1[static_cast<std::size_t>(j * input_dim + i)] * r[static_cast<std::size_t>(i)];
      }
      if (pre > 0.0) out += w2[static_cast<std::size_t>(j)] * pre;
    }
    return out;
  }

  /// dR/dr, one entry per input coordinate.
  std::vector<double> input_jacobian(const ReducingFactor& r) const {
    check_input(r);
    if (kind == SurrogateKind::linear) return w;
    std::vector<double> grad(static_cast<std::size_t>(input_dim), 0.0);
    for (int j = 0; j < kHiddenWidth; ++j) {
      double pre = b1[static_cast<std::size_t>(j)];
      for (int i = 0; i < input_dim; ++i) {
        pre += w1[static_cast<std::size_t>(j * input_dim + i)] * r[static_cast<std::size_t>(i)];
      }
      if (pre > 0.0) {
        for (int i = 0; i < input_dim; ++i) {
          grad[static_cast<std::size_t>(i)] +=
              w2[static_cast<std::size_t>(j)] * w1[static_cast<std::size_t>(j * input_dim + i)];
        }
      }
    }
    return grad;
  }

 private:
  void check_input(const ReducingFactor& r) const {
    if (static_cast<int>(r.size()) != input_dim) {
      throw ConfigError("surrogate expects " + std::to_string(input_dim) +
                        " factors, got " + std::to_string(r.size()));
    }
  }
};

/// Gradient of |R(r) - target| with respect to r: sign(R - target) * dR/dr,
/// zero at the kink.
inline std::vector<double> surrogate_input_gradient(const RegressionModel& model,
                                                    const ReducingFactor& r, double target) {
  const double diff = model.predict(r) - target;
  std::vector<double> grad = model.input_jacobian(r);
  if (diff == 0.0) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return grad;
  }
  const double sign = diff > 0.0 ? 1.0 : -1.0;
  for (double& g : grad) g *= sign;
  return grad;
}

namespace detail {

// Adaptive-moment gradient updates over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double*>& params, const std::vector<double>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i] * grads[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      *params[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  double lr_;
  int t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

inline std::vector<double*> model_params(RegressionModel& model) {
  std::vector<double*> params;
  if (model.kind == SurrogateKind::linear) {
    for (auto& v : model.w) params.push_back(&v);
    params.push_back(&model.b);
  } else {
    for (auto& v : model.w1) params.push_back(&v);
    for (auto& v : model.b1) params.push_back(&v);
    for (auto& v : model.w2) params.push_back(&v);
    params.push_back(&model.b2);
  }
  return params;
}

// MSE over the pairs plus its gradient in model_params order.
inline double model_loss_and_grad(const RegressionModel& model,
                                  const std::vector<TrainingPair>& pairs,
                                  std::vector<double>& grad) {
  const int dim = model.input_dim;
  double loss = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  const double scale = 2.0 / static_cast<double>(pairs.size());

  for (const TrainingPair& pair : pairs) {
    const double diff = model.predict(pair.r) - pair.p;
    loss += diff * diff;
    const double up = scale * diff;
    if (model.kind == SurrogateKind::linear) {
      for (int i = 0; i < dim; ++i) grad[static_cast<std::size_t>(i)] += up * pair.r[static_cast<std::size_t>(i)];
      grad[static_cast<std::size_t>(dim)] += up;
    } else {
      const int hidden = RegressionModel::kHiddenWidth;
      const std::size_t w1_off = 0;
      const std::size_t b1_off = static_cast<std::size_t>(hidden * dim);
      const std::size_t w2_off = b1_off + static_cast<std::size_t>(hidden);
      const std::size_t b2_off = w2_off + static_cast<std::size_t>(hidden);
      for (int j = 0; j < hidden; ++j) {
        double pre = model.b1[static_cast<std::size_t>(j)];
        for (int i = 0; i < dim; ++i) {
          pre += model.w1[static_cast<std::size_t>(j * dim + i)] * pair.r[static_cast<std::size_t>(i)];
        }
        if (pre <= 0.0) continue;
        grad[w2_off + static_cast<std::size_t>(j)] += up * pre;
        const double back = up * model.w2[static_cast<std::size_t>(j)];
        grad[b1_off + static_cast<std::size_t>(j)] += back;
        for (int i = 0; i < dim; ++i) {
          grad[w1_off + static_cast<std::size_t>(j * dim + i)] += back * pair.r[static_cast<std::size_t>(i)];
        }
      }
      grad[b2_off] += up;
    }
  }
  return loss / static_cast<double>(pairs.size());
}

}  // namespace detail

struct RegressionFit {
  RegressionModel model;
  double final_loss = 0.0;
};

/// Fits the surrogate to the pairs by full-batch MSE descent with adaptive
/// moments.
inline RegressionFit train_regression(const std::vector<TrainingPair>& pairs, SurrogateKind kind,
                                      int epochs = 4000, std::uint32_t seed = 17,
                                      double learning_rate = 0.01) {
  if (pairs.size() < 2) throw ConfigError("surrogate training needs at least 2 pairs");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  const int dim = static_cast<int>(pairs.front().r.size());
  for (const TrainingPair& pair : pairs) {
    if (static_cast<int>(pair.r.size()) != dim) {
      throw ConfigError("training pairs disagree on factor length");
    }
    if (!std::isfinite(pair.p)) throw ConfigError("non-finite drop in training pair");
  }

  RegressionFit fit;
  RegressionModel& model = fit.model;
  model.kind = kind;
  model.input_dim = dim;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  if (kind == SurrogateKind::linear) {
    model.w.resize(static_cast<std::size_t>(dim));
    for (auto& v : model.w) v = init(rng);
    model.b = init(rng);
  } else {
    const int hidden = RegressionModel::kHiddenWidth;
    model.w1.resize(static_cast<std::size_t>(hidden * dim));
    model.b1.resize(static_cast<std::size_t>(hidden));
    model.w2.resize(static_cast<std::size_t>(hidden));
    for (auto& v : model.w1) v = init(rng);
    for (auto& v : model.b1) v = init(rng);
    for (auto& v : model.w2) v = init(rng);
    model.b2 = init(rng);
  }

  std::vector<double*> params = detail::model_params(model);
  std::vector<double> grad(params.size(), 0.0);
  detail::Adam adam(params.size(), learning_rate);
  for (int e = 0; e < epochs; ++e) {
    fit.final_loss = detail::model_loss_and_grad(model, pairs, grad);
    if (!std::isfinite(fit.final_loss)) {
      throw DivergenceError("surrogate training loss is not finite");
    }
    adam.step(params, grad);
  }
  fit.final_loss = detail::model_loss_and_grad(model, pairs, grad);
  if (!std::isfinite(fit.final_loss)) {
    throw DivergenceError("surrogate training loss is not finite");
  }
  return fit;
}

struct CollectResult {
  std::vector<TrainingPair> pairs;
  int skipped = 0;
};

/// Samples factor vectors uniformly per layer from [0, range_hi) with the
/// last layer pinned to 0, snaps them, and measures each through the harness.
/// Harness failures skip the sample and are counted.
inline CollectResult collect_training_data(const NetworkSpec& spec, int n_samples,
                                           std::uint32_t seed, const Harness& harness,
                                           double range_hi = 0.5, int multiple = 4) {
  validate_spec(spec);
  if (n_samples < 1) throw ConfigError("need at least one training sample");
  if (!(range_hi >= 0.0 && range_hi < 1.0)) {
    throw ConfigError("sampling range must sit inside [0,1)");
  }

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, range_hi);
  CollectResult out;
  for (int s = 0; s < n_samples; ++s) {
    ReducingFactor r;
    r.values.resize(spec.size());
    for (std::size_t l = 0; l < spec.size(); ++l) {
      r.values[l] = range_hi == 0.0 ? 0.0 : dist(rng);
    }
    r.values.back() = 0.0;
    ReducingFactor snapped = snap_to_architecture(r, spec, multiple);
    try {
      const HarnessOutcome outcome = harness(snapped);
      out.pairs.push_back({std::move(snapped), outcome.drop_db});
    } catch (const Error&) {
      ++out.skipped;
    }
  }
  return out;
}

struct GoConfig {
  double target_p = 0.1;  // desired drop, dB
  double alpha = 0.01;    // descent rate on r
  double margin = 0.01;   // acceptable |R(r) - target|, dB
  int max_iters = 10000;
  ReducingFactor r0;  // empty: uniform 0.25 with last layer 0
};

struct OptimizeResult {
  ReducingFactor r;
  std::vector<double> trajectory;  // |R(r^i) - target| per iterate, r0 first
  bool converged = false;
  int iterations = 0;
};

/// Descends r along sign(R(r) - P) * dR/dr until the prediction sits within
/// the margin of the target. Coordinates clamp into [0, 0.99] and the last
/// stays 0. If the iteration cap trips first, returns the best iterate seen
/// with converged = false.
inline OptimizeResult optimize_r(const RegressionModel& model, const GoConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(cfg.margin > 0.0)) throw ConfigError("margin must be positive");
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be >= 0");

  ReducingFactor r = cfg.r0;
  if (r.size() == 0) {
    r.values.assign(static_cast<std::size_t>(model.input_dim), 0.25);
    r.values.back() = 0.0;
  }
  if (static_cast<int>(r.size()) != model.input_dim) {
    throw ConfigError("r0 length does not match the surrogate input dimension");
  }

  OptimizeResult out;
  ReducingFactor best = r;
  double best_loss = std::fabs(model.predict(r) - cfg.target_p);
  out.trajectory.push_back(best_loss);

  for (int i = 0; i < cfg.max_iters; ++i) {
    if (out.trajectory.back() < cfg.margin) {
      out.converged = true;
      break;
    }
    const std::vector<double> grad = surrogate_input_gradient(model, r, cfg.target_p);
    for (std::size_t l = 0; l < r.size(); ++l) {
      r.values[l] = std::clamp(r.values[l] - cfg.alpha * grad[l], 0.0, 0.99);
    }
    r.values.back() = 0.0;
    ++out.iterations;

    const double loss = std::fabs(model.predict(r) - cfg.target_p);
    out.trajectory.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = r;
    }
  }
  if (!out.converged && out.trajectory.back() < cfg.margin) out.converged = true;
  out.r = out.converged ? r : best;
  return out;
}

struct GoDataConfig {
  int n_samples = 64;
  std::uint32_t sample_seed = 19;
  double range_hi = 0.5;
  SurrogateKind kind = SurrogateKind::linear;
  int train_epochs = 4000;
  std::uint32_t train_seed = 17;
  double train_lr = 0.01;
  int multiple = 4;
};

struct GoResult {
  CollectResult data;
  RegressionFit fit;
  OptimizeResult opt;
  ReducingFactor final_factors;  // snapped optimum actually executed
  Network net;
  double achieved_drop = 0.0;
  double target_p = 0.0;
};

/// The full pipeline: collect (r, drop) pairs, fit the surrogate, descend r
/// toward the target drop, snap, and run the winner through the harness.
inline GoResult run_go(const NetworkSpec& spec, const GoConfig& cfg, const GoDataConfig& data_cfg,
                       const Harness& harness) {
  validate_spec(spec);
  GoResult out;
  out.target_p = cfg.target_p;
  out.data = collect_training_data(spec, data_cfg.n_samples, data_cfg.sample_seed, harness,
                                   data_cfg.range_hi, data_cfg.multiple);
  out.fit = train_regression(out.data.pairs, data_cfg.kind, data_cfg.train_epochs,
                             data_cfg.train_seed, data_cfg.train_lr);

  GoConfig opt_cfg = cfg;
  if (opt_cfg.r0.size() == 0) {
    opt_cfg.r0.values.assign(spec.size(), 0.25);
    opt_cfg.r0.values.back() = 0.0;
  }
  out.opt = optimize_r(out.fit.model, opt_cfg);

  out.final_factors = snap_to_architecture(out.opt.r, spec, data_cfg.multiple);
  const HarnessOutcome outcome = harness(out.final_factors);
  out.net = outcome.net;
  out.achieved_drop = outcome.drop_db;
  return out;
}

}  // namespace prunekit
