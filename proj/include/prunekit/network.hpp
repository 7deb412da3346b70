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
#include <string>
#include <utility>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

enum class Activation : unsigned char { identity = 0, relu = 1 };

/// One 3x3 convolution layer: kernels (N, C, 3, 3), one bias per kernel,
/// stride 1 and zero padding 1 so spatial extents are preserved.
struct ConvLayer {
  Tensor4 kernels;
  std::vector<float> bias;
  Activation activation = Activation::identity;

  int out_channels() const { return kernels.dims().n; }
  int in_channels() const { return kernels.dims().c; }
};

/// Sequential stack of ConvLayers. With `residual` set, the input feature
/// map is added to the final layer's output.
struct Network {
  std::vector<ConvLayer> layers;
  bool residual = false;
};

inline void validate_layer(const ConvLayer& layer, int index = -1) {
  const std::string where = index >= 0 ? "layer " + std::to_string(index) + ": " : "";
  const Shape4& kd = layer.kernels.dims();
  if (kd.h != 3 || kd.w != 3) {
    throw ShapeError(where + "kernel spatial extent must be 3x3, got " + kd.str());
  }
  if (kd.n < 1 || kd.c < 1) {
    throw ShapeError(where + "kernel stack needs at least one kernel and one channel, got " +
                     kd.str());
  }
  if (static_cast<int>(layer.bias.size()) != kd.n) {
    throw ShapeError(where + "bias length " + std::to_string(layer.bias.size()) +
                     " does not match kernel count " + std::to_string(kd.n));
  }
}

inline void validate_network(const Network& net) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    validate_layer(net.layers[i], static_cast<int>(i));
    if (i + 1 < net.layers.size() &&
        net.layers[i + 1].in_channels() != net.layers[i].out_channels()) {
      throw ShapeError("layer " + std::to_string(i + 1) + " expects " +
                       std::to_string(net.layers[i + 1].in_channels()) +
                       " input channels but layer " + std::to_string(i) + " produces " +
                       std::to_string(net.layers[i].out_channels()));
    }
  }
  if (net.residual && net.layers.back().out_channels() != net.layers.front().in_channels()) {
    throw ShapeError("residual network needs matching input/output channels, got " +
                     std::to_string(net.layers.front().in_channels()) + " vs " +
                     std::to_string(net.layers.back().out_channels()));
  }
}

namespace detail {

inline void apply_activation(Tensor4& t, Activation act) {
  if (act == Activation::relu) {
    for (auto& v : t.data()) v = v > 0.0f ? v : 0.0f;
  }
}

// Correlation without the activation; used by both the forward pass and the
// backward pass (which needs pre-activation values).
inline Tensor4 conv_preactivation(const Tensor4& input, const ConvLayer& layer) {
  const Shape4& id = input.dims();
  const Shape4& kd = layer.kernels.dims();
  if (id.n != 1) {
    throw ShapeError("feature map must have leading extent 1, got " + id.str());
  }
  if (id.c != kd.c) {
    throw ShapeError("input " + id.str() + " does not match kernels " + kd.str() +
                     ": channel counts differ");
  }
  validate_layer(layer);

  const int channels = kd.c;
  const int height = id.h;
  const int width = id.w;
  Tensor4 out({1, kd.n, height, width});
  for (int n = 0; n < kd.n; ++n) {
    float* out_ch = &out.at(0, n, 0, 0);
    const float b = layer.bias[static_cast<std::size_t>(n)];
    for (int i = 0; i < height * width; ++i) out_ch[i] = b;
    for (int c = 0; c < channels; ++c) {
      const float* in_ch = &input.at(0, c, 0, 0);
      for (int ky = 0; ky < 3; ++ky) {
        const int y_lo = std::max(0, 1 - ky);
        const int y_hi = std::min(height, height + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const float kw = layer.kernels.at(n, c, ky, kx);
          if (kw == 0.0f) continue;
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(width, width + 1 - kx);
          for (int y = y_lo; y < y_hi; ++y) {
            const float* src = in_ch + (y + ky - 1) * width + (x_lo + kx - 1);
            float* dst = out_ch + y * width + x_lo;
            for (int x = 0; x < x_hi - x_lo; ++x) dst[x] += kw * src[x];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// 3x3 correlation of a (1,C,H,W) feature map with a layer's kernel stack,
/// zero padding 1, stride 1, bias and activation applied. Output is (1,N,H,W).
inline Tensor4 conv_forward(const Tensor4& input, const ConvLayer& layer) {
  Tensor4 out = detail::conv_preactivation(input, layer);
  detail::apply_activation(out, layer.activation);
  return out;
}

/// Runs all layers in order; residual networks add the input at the end.
inline Tensor4 network_forward(const Network& net, const Tensor4& input) {
  validate_network(net);
  Tensor4 current = input;
  for (const ConvLayer& layer : net.layers) {
    current = conv_forward(current, layer);
  }
  if (net.residual) {
    if (current.dims() != input.dims()) {
      throw ShapeError("residual add needs matching shapes, got " + input.dims().str() + " vs " +
                       current.dims().str());
    }
    for (std::size_t i = 0; i < current.size(); ++i) current.data()[i] += input.data()[i];
  }
  return current;
}

/// Gradients for one layer, same shapes as the parameters they refer to.
struct LayerGrads {
  Tensor4 kernels;
  std::vector<float> bias;
};

using TrainBatch = std::vector<std::pair<Tensor4, Tensor4>>;

namespace detail {

// Accumulates kernel/bias gradients for one layer and returns the gradient
// with respect to the layer input. `upstream` is dLoss/d(post-activation).
inline Tensor4 conv_backward(const Tensor4& input, const ConvLayer& layer, const Tensor4& pre,
                             const Tensor4& upstream, LayerGrads& grads) {
  const Shape4& id = input.dims();
  const Shape4& kd = layer.kernels.dims();
  const int height = id.h;
  const int width = id.w;

  Tensor4 dpre = upstream;
  if (layer.activation == Activation::relu) {
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      if (pre.data()[i] <= 0.0f) dpre.data()[i] = 0.0f;
    }
  }

  Tensor4 dinput({1, id.c, height, width});
  for (int n = 0; n < kd.n; ++n) {
    const float* g_ch = &dpre.at(0, n, 0, 0);
    float gb = 0.0f;
    for (int i = 0; i < height * width; ++i) gb += g_ch[i];
    grads.bias[static_cast<std::size_t>(n)] += gb;
    for (int c = 0; c < kd.c; ++c) {
      const float* in_ch = &input.at(0, c, 0, 0);
      float* din_ch = &dinput.at(0, c, 0, 0);
      for (int ky = 0; ky < 3; ++ky) {
        const int y_lo = std::max(0, 1 - ky);
        const int y_hi = std::min(height, height + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(width, width + 1 - kx);
          const float kw = layer.kernels.at(n, c, ky, kx);
          float gk = 0.0f;
          for (int y = y_lo; y < y_hi; ++y) {
            const float* src = in_ch + (y + ky - 1) * width + (x_lo + kx - 1);
            float* dst = din_ch + (y + ky - 1) * width + (x_lo + kx - 1);
            const float* g_row = g_ch + y * width + x_lo;
            for (int x = 0; x < x_hi - x_lo; ++x) {
              gk += g_row[x] * src[x];
              dst[x] += kw * g_row[x];
            }
          }
          grads.kernels.at(n, c, ky, kx) += gk;
        }
      }
    }
  }
  return dinput;
}

}  // namespace detail

/// Full-batch gradients of the mean squared error over all output elements,
/// one LayerGrads per layer. If `loss_out` is given it receives the loss.
inline std::vector<LayerGrads> compute_gradients(const Network& net, const TrainBatch& batch,
                                                 double* loss_out = nullptr) {
  validate_network(net);
  if (batch.empty()) throw ConfigError("training batch is empty");

  std::vector<LayerGrads> grads;
  grads.reserve(net.layers.size());
  for (const ConvLayer& layer : net.layers) {
    grads.push_back({Tensor4::zeros(layer.kernels.dims()),
                     std::vector<float>(layer.bias.size(), 0.0f)});
  }

  std::size_t total_elems = 0;
  for (const auto& [input, target] : batch) total_elems += target.size();

  double loss_sum = 0.0;
  std::vector<Tensor4> inputs(net.layers.size());
  std::vector<Tensor4> pres(net.layers.size());
  for (const auto& [input, target] : batch) {
    Tensor4 current = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      inputs[i] = std::move(current);
      pres[i] = detail::conv_preactivation(inputs[i], net.layers[i]);
      current = pres[i];
      detail::apply_activation(current, net.layers[i].activation);
    }
    Tensor4 output = current;
    if (net.residual) {
      if (output.dims() != input.dims()) {
        throw ShapeError("residual add needs matching shapes, got " + input.dims().str() +
                         " vs " + output.dims().str());
      }
      for (std::size_t i = 0; i < output.size(); ++i) output.data()[i] += input.data()[i];
    }
    if (output.dims() != target.dims()) {
      throw ShapeError("target " + target.dims().str() + " does not match output " +
                       output.dims().str());
    }

    Tensor4 upstream(output.dims());
    const float scale = 2.0f / static_cast<float>(total_elems);
    for (std::size_t i = 0; i < output.size(); ++i) {
      const float diff = output.data()[i] - target.data()[i];
      loss_sum += static_cast<double>(diff) * static_cast<double>(diff);
      upstream.data()[i] = scale * diff;
    }

    // Residual passes the upstream gradient through unchanged.
    for (std::size_t i = net.layers.size(); i-- > 0;) {
      upstream = detail::conv_backward(inputs[i], net.layers[i], pres[i], upstream, grads[i]);
    }
  }

  const double loss = loss_sum / static_cast<double>(total_elems);
  if (!std::isfinite(loss)) {
    throw DivergenceError("training loss is not finite");
  }
  if (loss_out != nullptr) *loss_out = loss;
  return grads;
}

/// One full-batch gradient step on every kernel and bias. Returns the loss
/// before the step.
inline double backward_and_step(Network& net, const TrainBatch& batch, float learning_rate) {
  if (learning_rate <= 0.0f) {
    throw ConfigError("learning rate must be positive, got " + std::to_string(learning_rate));
  }
  double loss = 0.0;
  const std::vector<LayerGrads> grads = compute_gradients(net, batch, &loss);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& kdata = net.layers[i].kernels.data();
    const auto& gdata = grads[i].kernels.data();
    for (std::size_t j = 0; j < kdata.size(); ++j) kdata[j] -= learning_rate * gdata[j];
    for (std::size_t j = 0; j < net.layers[i].bias.size(); ++j) {
      net.layers[i].bias[j] -= learning_rate * grads[i].bias[j];
    }
  }
  return loss;
}

/// Peak signal-to-noise ratio in dB. A zero MSE is reported as 99.0 dB.
inline double psnr(const Tensor4& a, const Tensor4& b, double peak = 1.0) {
  if (a.dims() != b.dims()) {
    throw ShapeError("psnr needs matching shapes, got " + a.dims().str() + " vs " +
                     b.dims().str());
  }
  if (peak <= 0.0) throw ConfigError("psnr peak must be positive");
  if (a.empty()) throw ShapeError("psnr on empty tensors");
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sq_sum += diff * diff;
  }
  const double mse = sq_sum / static_cast<double>(a.size());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace prunekit
