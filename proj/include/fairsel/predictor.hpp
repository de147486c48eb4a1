// Copyright 2026 The fairsel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense feed-forward classifier with SELU hidden layers and a softmax head,
// exact reverse-mode gradients, Adam, and a central-difference gradient
// checker.
//
// Parameters live in one flat buffer laid out layer by layer as
// [W0 (out x in, row-major), b0, W1, b1, ...] so that optimizers and the
// gradient checker can treat the network as a single vector.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fairsel/error.hpp"
#include "fairsel/random.hpp"

namespace fairsel {

inline constexpr double kSeluScale = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

// Lower bound applied to probabilities before any logarithm or division.
inline constexpr double kProbabilityFloor = 1e-12;

inline double selu(double x) {
  return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
}

// Uses the x <= 0 branch at the kink.
inline double selu_derivative(double x) {
  return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

// In-place, max-subtracted softmax.
inline void softmax(std::span<double> z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : z) v /= total;
}

inline std::vector<std::size_t> default_hidden_layers() {
  return {200, 200, 200};
}

class DenseNet {
 public:
  struct Layer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  DenseNet() = default;

  // All parameters zero. `layer_sizes` = {input_dim, hidden..., classes}.
  explicit DenseNet(std::vector<std::size_t> layer_sizes)
      : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) {
      throw InvalidArgument("DenseNet needs at least input and output sizes");
    }
    for (std::size_t s : sizes_) {
      if (s == 0) throw InvalidArgument("DenseNet layer sizes must be > 0");
    }
    if (sizes_.back() < 2) {
      throw InvalidArgument("DenseNet needs at least two output classes");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      Layer layer{sizes_[l], sizes_[l + 1], offset, 0};
      offset += layer.inputs * layer.outputs;
      layer.bias_offset = offset;
      offset += layer.outputs;
      layers_.push_back(layer);
    }
    params_.assign(offset, 0.0);
  }

  // LeCun-normal weights (variance 1 / fan_in) and zero biases.
  static DenseNet lecun_normal(std::vector<std::size_t> layer_sizes,
                               RandomEngine& rng) {
    DenseNet net(std::move(layer_sizes));
    for (const Layer& layer : net.layers_) {
      const double stddev = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
      for (std::size_t i = 0; i < layer.inputs * layer.outputs; ++i) {
        net.params_[layer.weight_offset + i] = stddev * standard_normal(rng);
      }
    }
    return net;
  }

  static DenseNet with_hidden(std::size_t input_dim,
                              const std::vector<std::size_t>& hidden,
                              std::size_t classes, RandomEngine& rng) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(classes);
    return lecun_normal(std::move(sizes), rng);
  }

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t num_classes() const { return sizes_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weights(std::size_t l) {
    const Layer& L = layers_.at(l);
    return {params_.data() + L.weight_offset, L.inputs * L.outputs};
  }
  std::span<const double> weights(std::size_t l) const {
    const Layer& L = layers_.at(l);
    return {params_.data() + L.weight_offset, L.inputs * L.outputs};
  }
  std::span<double> bias(std::size_t l) {
    const Layer& L = layers_.at(l);
    return {params_.data() + L.bias_offset, L.outputs};
  }
  std::span<const double> bias(std::size_t l) const {
    const Layer& L = layers_.at(l);
    return {params_.data() + L.bias_offset, L.outputs};
  }

  double& weight(std::size_t l, std::size_t row, std::size_t col) {
    return params_[layers_.at(l).weight_offset + row * layers_[l].inputs + col];
  }
  double weight(std::size_t l, std::size_t row, std::size_t col) const {
    return params_[layers_.at(l).weight_offset + row * layers_[l].inputs + col];
  }

  // Human-readable name of the block containing flat parameter `index`.
  std::string block_name(std::size_t index) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      if (index < L.bias_offset) {
        return "layer " + std::to_string(l) + " weights";
      }
      if (index < L.bias_offset + L.outputs) {
        return "layer " + std::to_string(l) + " bias";
      }
    }
    return "parameter " + std::to_string(index);
  }

  bool all_finite() const {
    return std::all_of(params_.begin(), params_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    return a.sizes_ == b.sizes_ && a.params_ == b.params_;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

// Per-layer activations kept by a forward pass for the backward pass.
// `activations[0]` is the input, `activations.back()` the probabilities.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preactivations;
  // Scratch for backward.
  std::vector<double> delta;
  std::vector<double> next_delta;

  std::span<const double> output() const { return activations.back(); }
};

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void check_input(const DenseNet& net, std::span<const double> input) {
  if (input.size() != net.input_dim()) {
    throw DimensionError("DenseNet input", net.input_dim(), input.size());
  }
}

}  // namespace detail

// Forward pass that records what backward needs. Returns the probabilities.
inline std::span<const double> forward(const DenseNet& net,
                                       std::span<const double> input,
                                       ForwardTrace& trace) {
  detail::check_input(net, input);
  const std::size_t L = net.num_layers();
  trace.activations.resize(L + 1);
  trace.preactivations.resize(L);
  trace.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < L; ++l) {
    const auto& shape = net.layer(l);
    const auto w = net.weights(l);
    const auto b = net.bias(l);
    const std::vector<double>& in = trace.activations[l];
    std::vector<double>& z = trace.preactivations[l];
    z.resize(shape.outputs);
    for (std::size_t o = 0; o < shape.outputs; ++o) {
      z[o] = b[o] + detail::dot(w.data() + o * shape.inputs, in.data(),
                                shape.inputs);
    }
    std::vector<double>& out = trace.activations[l + 1];
    out = z;
    if (l + 1 < L) {
      for (double& v : out) v = selu(v);
    } else {
      softmax(out);
    }
  }
  return trace.activations.back();
}

inline std::vector<double> forward(const DenseNet& net,
                                   std::span<const double> input) {
  ForwardTrace trace;
  const auto out = forward(net, input, trace);
  return {out.begin(), out.end()};
}

// Accumulates the gradient of <output_grad, forward(input)> into
// `param_grad` (size num_params) and, if non-empty, `input_grad`.
inline void backward_accumulate(const DenseNet& net, ForwardTrace& trace,
                                std::span<const double> output_grad,
                                std::span<double> param_grad,
                                std::span<double> input_grad = {}) {
  if (output_grad.size() != net.num_classes()) {
    throw DimensionError("output gradient", net.num_classes(),
                         output_grad.size());
  }
  if (param_grad.size() != net.num_params()) {
    throw DimensionError("parameter gradient", net.num_params(),
                         param_grad.size());
  }
  if (!input_grad.empty() && input_grad.size() != net.input_dim()) {
    throw DimensionError("input gradient", net.input_dim(), input_grad.size());
  }
  const std::size_t L = net.num_layers();
  if (trace.activations.size() != L + 1) {
    throw InvalidArgument("backward called without a matching forward trace");
  }

  // Softmax vector-Jacobian product: dz = f * (g - <g, f>).
  const std::vector<double>& probs = trace.activations.back();
  const double gf = detail::dot(output_grad.data(), probs.data(), probs.size());
  std::vector<double>& delta = trace.delta;
  delta.resize(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    delta[c] = probs[c] * (output_grad[c] - gf);
  }

  for (std::size_t l = L; l-- > 0;) {
    const auto& shape = net.layer(l);
    const auto w = net.weights(l);
    const std::vector<double>& in = trace.activations[l];
    double* gw = param_grad.data() + shape.weight_offset;
    double* gb = param_grad.data() + shape.bias_offset;
    for (std::size_t o = 0; o < shape.outputs; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* row = gw + o * shape.inputs;
      for (std::size_t i = 0; i < shape.inputs; ++i) row[i] += d * in[i];
    }
    const bool need_input = l > 0 || !input_grad.empty();
    if (!need_input) break;
    std::vector<double>& next = trace.next_delta;
    next.assign(shape.inputs, 0.0);
    for (std::size_t o = 0; o < shape.outputs; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w.data() + o * shape.inputs;
      for (std::size_t i = 0; i < shape.inputs; ++i) next[i] += row[i] * d;
    }
    if (l == 0) {
      for (std::size_t i = 0; i < shape.inputs; ++i) input_grad[i] += next[i];
      break;
    }
    const std::vector<double>& z = trace.preactivations[l - 1];
    for (std::size_t i = 0; i < shape.inputs; ++i) {
      next[i] *= selu_derivative(z[i]);
    }
    std::swap(delta, next);
  }
}

struct Gradients {
  std::vector<double> params;
  std::vector<double> input;
};

// Exact gradients of the scalar <output_grad, forward(net, input)>.
inline Gradients backward(const DenseNet& net, std::span<const double> input,
                          std::span<const double> output_grad) {
  ForwardTrace trace;
  forward(net, input, trace);
  Gradients g{std::vector<double>(net.num_params(), 0.0),
              std::vector<double>(net.input_dim(), 0.0)};
  backward_accumulate(net, trace, output_grad, g.params, g.input);
  return g;
}

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

// One bias-corrected Adam update. `block_name` maps a flat index to a label
// for the error raised on a non-finite gradient.
inline void adam_step(
    std::span<double> params, std::span<const double> grads, AdamState& state,
    double lr,
    const std::function<std::string(std::size_t)>& block_name = nullptr) {
  if (grads.size() != params.size()) {
    throw DimensionError("Adam gradient", params.size(), grads.size());
  }
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw DimensionError("Adam moments", params.size(),
                         state.first_moment.size());
  }
  if (!(lr > 0.0)) throw InvalidArgument("Adam learning rate must be > 0");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      const std::string where =
          block_name ? block_name(i) : "parameter " + std::to_string(i);
      throw NumericalError("non-finite gradient in " + where);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  }
}

inline void adam_step(DenseNet& net, std::span<const double> grads,
                      AdamState& state, double lr) {
  adam_step(net.params(), grads, state, lr,
            [&net](std::size_t i) { return net.block_name(i); });
}

struct GradCheckOptions {
  double step = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool passed = true;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

// Compares `analytic` against central differences of `value_at`, which is
// evaluated with the point perturbed in place (restored afterwards).
template <typename ValueAt>
GradCheckReport check_gradient(std::span<double> point,
                               std::span<const double> analytic,
                               ValueAt&& value_at, double tolerance,
                               const GradCheckOptions& options = {}) {
  if (analytic.size() != point.size()) {
    throw DimensionError("analytic gradient", point.size(), analytic.size());
  }
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + options.step;
    const double up = value_at();
    point[i] = saved - options.step;
    const double down = value_at();
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err =
        relative_error(analytic[i], numeric, options.denominator_floor);
    if (report.checked == 0 || std::isnan(err) ||
        err > report.max_relative_error) {
      report.max_relative_error =
          std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
    ++report.checked;
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

struct LossAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

using LossFunction = std::function<LossAndGradient(const DenseNet&)>;

// Checks the analytic parameter gradient returned by `loss` against central
// differences of its value.
inline GradCheckReport grad_check(const DenseNet& net, const LossFunction& loss,
                                  double tolerance,
                                  const GradCheckOptions& options = {}) {
  DenseNet probe = net;
  const LossAndGradient at = loss(probe);
  return check_gradient(
      probe.params(), at.gradient, [&] { return loss(probe).value; },
      tolerance, options);
}

}  // namespace fairsel
