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

// Adversarial training of a feature selector against a predictor.
//
// For an example x with selection s (unselected features zeroed) and the
// sensitive feature k, the sensitivity of the predictor is
//
//   l_sen(x, s) = f(x, s ∪ {k}) - f(x, s),
//
// the change in predicted probabilities caused by revealing x_k. Each
// mini-batch draws one s per example from the selector and then
//
//   * moves the selector logits up the score-function estimate of
//     grad E_s |l_sen|, i.e. mean_i |l_sen(x_i, s_i)| (s_i - p);
//   * moves the predictor down lambda * |l_sen| + cross-entropy(f(x, s), y)
//     with Adam.
//
// The selector therefore learns to keep features under which revealing x_k
// still changes the prediction, i.e. to drop features that already leak the
// sensitive information, while the predictor learns to ignore x_k.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsel/data.hpp"
#include "fairsel/error.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/predictor.hpp"
#include "fairsel/random.hpp"
#include "fairsel/selector.hpp"

namespace fairsel {

// Below this norm the sensitivity term has a kink; its gradient is taken as
// zero there.
inline constexpr double kSensitivityKink = 1e-12;

struct InferencePolicy {
  enum class Kind { kThreshold, kExpectedInput, kMonteCarlo };

  Kind kind = Kind::kThreshold;
  std::size_t samples = 100;  // kMonteCarlo only

  static InferencePolicy threshold() { return {Kind::kThreshold, 0}; }
  static InferencePolicy expected_input() { return {Kind::kExpectedInput, 0}; }
  static InferencePolicy monte_carlo(std::size_t n) {
    return {Kind::kMonteCarlo, n};
  }

  // "threshold05", "expected-input", "mc:N" (also "mcAverage(N)").
  static InferencePolicy parse(const std::string& text) {
    if (text == "threshold05" || text == "threshold") return threshold();
    if (text == "expected-input" || text == "expectedInput") {
      return expected_input();
    }
    std::string digits;
    if (text.rfind("mc:", 0) == 0) {
      digits = text.substr(3);
    } else if (text.rfind("mcAverage(", 0) == 0 && text.back() == ')') {
      digits = text.substr(10, text.size() - 11);
    }
    if (!digits.empty() &&
        std::all_of(digits.begin(), digits.end(),
                    [](char c) { return c >= '0' && c <= '9'; })) {
      const std::size_t n = std::stoul(digits);
      if (n > 0) return monte_carlo(n);
    }
    throw InvalidArgument("unknown inference policy '" + text +
                          "' (threshold05, expected-input, mc:N)");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::kThreshold: return "threshold05";
      case Kind::kExpectedInput: return "expected-input";
      case Kind::kMonteCarlo: return "mc:" + std::to_string(samples);
    }
    return "?";
  }

  friend bool operator==(const InferencePolicy&, const InferencePolicy&) =
      default;
};

struct TrainConfig {
  double alpha_theta = 1e-4;
  double alpha_phi = 1e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  InferencePolicy inference;
  std::vector<std::size_t> hidden = default_hidden_layers();
  bool mask_sensitive = true;
  // Selector logits start at N(theta_init_mean, theta_init_stddev^2).
  double theta_init_mean = 0.0;
  double theta_init_stddev = 0.01;
  // Optional moving-average baseline subtracted from |l_sen| in the
  // selector's score-function estimate.
  bool selector_baseline = false;
  double baseline_decay = 0.9;

  void validate() const {
    if (!(alpha_theta > 0.0) || !(alpha_phi > 0.0)) {
      throw InvalidArgument("learning rates must be > 0");
    }
    if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
    if (patience == 0) throw InvalidArgument("patience must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw InvalidArgument("lambda must be a finite value >= 0");
    }
    if (hidden.empty()) throw InvalidArgument("need at least one hidden layer");
    for (std::size_t h : hidden) {
      if (h == 0) throw InvalidArgument("hidden layer sizes must be > 0");
    }
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
      throw InvalidArgument("baseline decay must lie in [0, 1)");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double prediction_loss = 0.0;
  double sensitivity = 0.0;
  double validation_balanced_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

enum class TrainStatus { kMaxEpochs, kEarlyStopped, kDiverged };

inline const char* train_status_name(TrainStatus s) {
  switch (s) {
    case TrainStatus::kMaxEpochs: return "max_epochs";
    case TrainStatus::kEarlyStopped: return "early_stopped";
    case TrainStatus::kDiverged: return "diverged";
  }
  return "?";
}

struct TrainedModel {
  DenseNet net;
  SelectorPolicy policy;
  TrainConfig config;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  TrainStatus status = TrainStatus::kMaxEpochs;
  std::string diagnostic;
};

// x with unselected features set to 0.
inline std::vector<double> apply_selection(std::span<const double> x,
                                           const SelectionVector& s) {
  if (x.size() != s.size()) {
    throw DimensionError("selection vector", x.size(), s.size());
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = s[j] ? x[j] : 0.0;
  return out;
}

inline double euclidean_distance(std::span<const double> a,
                                 std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

// |f(x, s ∪ {k}) - f(x, s)|_2
inline double sensitivity_loss(const DenseNet& net, std::span<const double> x,
                               const SelectionVector& s, std::size_t k) {
  const auto with_k = forward(net, apply_selection(x, s.with(k)));
  const auto without_k = forward(net, apply_selection(x, s));
  return euclidean_distance(with_k, without_k);
}

// -sum_l y_l log f_l(x, s), with probabilities floored before the log.
inline double prediction_loss(const DenseNet& net, std::span<const double> x,
                              const SelectionVector& s,
                              std::span<const double> y) {
  if (y.size() != net.num_classes()) {
    throw DimensionError("label vector", net.num_classes(), y.size());
  }
  const auto f = forward(net, apply_selection(x, s));
  double loss = 0.0;
  for (std::size_t l = 0; l < f.size(); ++l) {
    if (y[l] != 0.0) loss -= y[l] * std::log(std::max(f[l], kProbabilityFloor));
  }
  return loss;
}

inline double prediction_loss(const DenseNet& net, std::span<const double> x,
                              const SelectionVector& s, int label) {
  std::vector<double> y(net.num_classes(), 0.0);
  y.at(static_cast<std::size_t>(label)) = 1.0;
  return prediction_loss(net, x, s, y);
}

// One training example with its sampled selection.
struct BatchExample {
  std::span<const double> x;
  int label = 0;
  SelectionVector selection;
};

using Batch = std::vector<BatchExample>;

// Forward passes for one example, kept for the selector and predictor
// updates of the same step.
struct ExampleEvaluation {
  ForwardTrace with_k;
  ForwardTrace without_k;
  std::vector<double> masked_input;
  double norm = 0.0;
  double prediction_loss = 0.0;
};

inline void evaluate_example(const DenseNet& net, const BatchExample& ex,
                             std::size_t k, ExampleEvaluation& ev) {
  const std::size_t d = ex.x.size();
  if (ex.selection.size() != d) {
    throw DimensionError("selection vector", d, ex.selection.size());
  }
  ev.masked_input.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    ev.masked_input[j] = ex.selection[j] ? ex.x[j] : 0.0;
  }
  const auto without = forward(net, ev.masked_input, ev.without_k);
  ev.masked_input[k] = ex.x[k];
  const auto with = forward(net, ev.masked_input, ev.with_k);
  ev.norm = euclidean_distance(with, without);
  const double f_true = without[static_cast<std::size_t>(ex.label)];
  ev.prediction_loss = -std::log(std::max(f_true, kProbabilityFloor));
}

inline std::vector<ExampleEvaluation> evaluate_batch(const DenseNet& net,
                                                     const Batch& batch,
                                                     std::size_t k) {
  std::vector<ExampleEvaluation> evals(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    evaluate_example(net, batch[i], k, evals[i]);
  }
  return evals;
}

namespace detail {

// Score-function ascent step on the logits. `baseline` is subtracted from
// each |l_sen|.
inline void selector_update(SelectorPolicy& policy, const Batch& batch,
                            std::span<const ExampleEvaluation> evals,
                            std::span<const double> p, double alpha_theta,
                            double baseline) {
  const std::size_t d = policy.dim();
  std::vector<double> step(d, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double weight = evals[i].norm - baseline;
    const SelectionVector& s = batch[i].selection;
    for (std::size_t j = 0; j < d; ++j) {
      step[j] += weight * ((s[j] ? 1.0 : 0.0) - p[j]);
    }
  }
  const double scale = alpha_theta / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < d; ++j) {
    if (!std::isfinite(step[j])) {
      throw NumericalError("non-finite selector gradient estimate at feature " +
                           std::to_string(j));
    }
    if (policy.is_masked(j)) continue;
    policy.logits[j] += scale * step[j];
  }
  policy.clamp();
}

}  // namespace detail

// Gradient of mean_i [lambda |l_sen(x_i, s_i)| + ce_weight * CE_i] with
// respect to the predictor parameters. `ce_weight` exists for diagnostics
// that isolate the sensitivity term.
inline std::vector<double> predictor_gradient(
    const DenseNet& net, const Batch& batch,
    std::span<ExampleEvaluation> evals, double lambda,
    double ce_weight = 1.0) {
  std::vector<double> grad(net.num_params(), 0.0);
  const std::size_t c = net.num_classes();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> g_with(c), g_without(c);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ExampleEvaluation& ev = evals[i];
    const auto fa = ev.with_k.output();
    const auto fb = ev.without_k.output();
    const bool active = lambda != 0.0 && ev.norm >= kSensitivityKink;
    for (std::size_t l = 0; l < c; ++l) {
      const double u = active ? (fa[l] - fb[l]) / ev.norm : 0.0;
      g_with[l] = lambda * u * inv_n;
      g_without[l] = -lambda * u * inv_n;
    }
    const std::size_t y = static_cast<std::size_t>(batch[i].label);
    if (ce_weight != 0.0 && fb[y] >= kProbabilityFloor) {
      g_without[y] -= ce_weight * inv_n / fb[y];
    }
    if (active) backward_accumulate(net, ev.with_k, g_with, grad);
    backward_accumulate(net, ev.without_k, g_without, grad);
  }
  return grad;
}

inline std::vector<double> predictor_gradient(const DenseNet& net,
                                              const Batch& batch,
                                              std::size_t k, double lambda,
                                              double ce_weight = 1.0) {
  auto evals = evaluate_batch(net, batch, k);
  return predictor_gradient(net, batch, evals, lambda, ce_weight);
}

// mean_i [lambda |l_sen(x_i, s_i)| + ce_weight * CE_i]
inline double predictor_objective(const DenseNet& net, const Batch& batch,
                                  std::size_t k, double lambda,
                                  double ce_weight = 1.0) {
  double total = 0.0;
  ExampleEvaluation ev;
  for (const auto& ex : batch) {
    evaluate_example(net, ex, k, ev);
    total += lambda * ev.norm + ce_weight * ev.prediction_loss;
  }
  return total / static_cast<double>(batch.size());
}

// Gradient-ascent step on the selector logits from one sampled selection per
// example. The masked coordinate never moves.
inline SelectorPolicy selector_step(SelectorPolicy policy, const Batch& batch,
                                    const DenseNet& net, double alpha_theta,
                                    double baseline = 0.0) {
  if (batch.empty()) throw InvalidArgument("selector step on an empty batch");
  const auto evals = evaluate_batch(net, batch, policy.sensitive_index);
  const auto p = probabilities(policy);
  detail::selector_update(policy, batch, evals, p, alpha_theta, baseline);
  return policy;
}

// One Adam step on lambda * |l_sen| + cross-entropy over the batch.
inline DenseNet predictor_step(DenseNet net, AdamState& adam,
                               const Batch& batch,
                               const SelectorPolicy& policy, double alpha_phi,
                               double lambda) {
  if (batch.empty()) throw InvalidArgument("predictor step on an empty batch");
  const auto grad =
      predictor_gradient(net, batch, policy.sensitive_index, lambda);
  adam_step(net, grad, adam, alpha_phi);
  return net;
}

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;
};

inline int argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

// Deterministic inference-time selection {j : p_j >= 0.5}, never including a
// masked sensitive feature.
inline SelectionVector inference_selection(const SelectorPolicy& policy) {
  const auto p = probabilities(policy);
  SelectionVector s(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    s.set(j, !policy.is_masked(j) && p[j] >= 0.5);
  }
  return s;
}

// Class prediction under the model's inference policy. Monte-Carlo averaging
// draws from `rng` when given, otherwise from a fixed stream derived from the
// model seed so repeated calls agree.
inline Prediction predict(const TrainedModel& model, std::span<const double> x,
                          RandomEngine* rng = nullptr) {
  if (x.size() != model.net.input_dim()) {
    throw DimensionError("prediction input", model.net.input_dim(), x.size());
  }
  Prediction out;
  const InferencePolicy& policy = model.config.inference;
  switch (policy.kind) {
    case InferencePolicy::Kind::kThreshold:
      out.probabilities =
          forward(model.net, apply_selection(x, inference_selection(model.policy)));
      break;
    case InferencePolicy::Kind::kExpectedInput: {
      const auto p = probabilities(model.policy);
      std::vector<double> input(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) input[j] = x[j] * p[j];
      out.probabilities = forward(model.net, input);
      break;
    }
    case InferencePolicy::Kind::kMonteCarlo: {
      RandomEngine local = make_engine(model.config.seed, Stream::kInference);
      RandomEngine& engine = rng ? *rng : local;
      const auto p = probabilities(model.policy);
      out.probabilities.assign(model.net.num_classes(), 0.0);
      ForwardTrace trace;
      for (std::size_t m = 0; m < policy.samples; ++m) {
        const auto s = sample_selection(p, engine);
        const auto f = forward(model.net, apply_selection(x, s), trace);
        for (std::size_t l = 0; l < f.size(); ++l) out.probabilities[l] += f[l];
      }
      for (double& v : out.probabilities) {
        v /= static_cast<double>(policy.samples);
      }
      break;
    }
  }
  out.label = argmax(out.probabilities);
  return out;
}

inline GroupedOutcomes model_outcomes(const TrainedModel& model,
                                      const Dataset& data) {
  GroupedOutcomes out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back({data.labels[i], predict(model, data.row(i)).label,
                   data.groups[i]});
  }
  return out;
}

// Monte-Carlo estimate of mean_x E_s |l_sen(x, s)| under the model's
// selector, `samples` draws per example.
inline double mean_sensitivity(const DenseNet& net, const SelectorPolicy& policy,
                               const Dataset& data, std::size_t samples,
                               std::uint64_t seed) {
  if (data.size() == 0 || samples == 0) return 0.0;
  RandomEngine rng = make_engine(seed, Stream::kEvaluation);
  const auto p = probabilities(policy);
  ExampleEvaluation ev;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t m = 0; m < samples; ++m) {
      BatchExample ex{data.row(i), data.labels[i], sample_selection(p, rng)};
      evaluate_example(net, ex, policy.sensitive_index, ev);
      total += ev.norm;
    }
  }
  return total / static_cast<double>(data.size() * samples);
}

struct TrainHooks {
  // Called with every selection sampled during training.
  std::function<void(const SelectionVector&)> on_selection;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Mini-batch adversarial training with early stopping on validation
// balanced accuracy. Returns the best-validation parameters, or on
// divergence the parameters after the last finite epoch.
inline TrainedModel train(const Dataset& train_set, const Dataset& validation,
                          const TrainConfig& config,
                          const TrainHooks& hooks = {}) {
  config.validate();
  if (train_set.size() == 0) throw DataError("training set is empty");
  if (validation.size() == 0) throw DataError("validation set is empty");
  if (validation.dim() != train_set.dim()) {
    throw DimensionError("validation features", train_set.dim(),
                         validation.dim());
  }
  const std::size_t d = train_set.dim();
  const std::size_t k = train_set.sensitive_index;

  RandomEngine init_rng = make_engine(config.seed, Stream::kInit);
  TrainedModel model;
  model.config = config;
  model.net = DenseNet::with_hidden(d, config.hidden, train_set.num_classes,
                                    init_rng);
  model.policy =
      SelectorPolicy::random(d, k, config.mask_sensitive, init_rng,
                             config.theta_init_mean, config.theta_init_stddev);
  if (config.max_epochs == 0) return model;

  RandomEngine shuffle_rng = make_engine(config.seed, Stream::kShuffle);
  RandomEngine select_rng = make_engine(config.seed, Stream::kSelection);
  AdamState adam(model.net.num_params());
  double baseline = 0.0;
  bool baseline_primed = false;

  DenseNet net = model.net;
  SelectorPolicy policy = model.policy;
  DenseNet best_net = net, last_net = net;
  SelectorPolicy best_policy = policy, last_policy = policy;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const std::size_t patience = std::min(config.patience, config.max_epochs);

  std::vector<std::size_t> order = all_rows(train_set.size());
  Batch batch;
  std::vector<ExampleEvaluation> evals;
  TrainedModel probe;
  probe.config = config;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i-- > 1;) {
      std::swap(order[i], order[shuffle_rng() % (i + 1)]);
    }
    double loss_sum = 0.0, sens_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size();
           start += config.batch_size) {
        const std::size_t stop =
            std::min(order.size(), start + config.batch_size);
        const auto p = probabilities(policy);
        batch.resize(stop - start);
        evals.resize(stop - start);
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const std::size_t row = order[start + b];
          batch[b].x = train_set.row(row);
          batch[b].label = train_set.labels[row];
          batch[b].selection = sample_selection(p, select_rng);
          if (hooks.on_selection) hooks.on_selection(batch[b].selection);
          evaluate_example(net, batch[b], k, evals[b]);
          if (!std::isfinite(evals[b].norm) ||
              !std::isfinite(evals[b].prediction_loss)) {
            throw NumericalError("non-finite loss at epoch " +
                                 std::to_string(epoch));
          }
          loss_sum += evals[b].prediction_loss;
          sens_sum += evals[b].norm;
        }
        detail::selector_update(policy, batch, evals, p, config.alpha_theta,
                                config.selector_baseline ? baseline : 0.0);
        if (config.selector_baseline) {
          double mean_norm = 0.0;
          for (const auto& ev : evals) mean_norm += ev.norm;
          mean_norm /= static_cast<double>(evals.size());
          baseline = baseline_primed ? config.baseline_decay * baseline +
                                           (1.0 - config.baseline_decay) *
                                               mean_norm
                                     : mean_norm;
          baseline_primed = true;
        }
        const auto grad = predictor_gradient(net, batch, evals, config.lambda);
        adam_step(net, grad, adam, config.alpha_phi);
      }
      if (!net.all_finite()) {
        throw NumericalError("non-finite predictor parameters after epoch " +
                             std::to_string(epoch));
      }
    } catch (const NumericalError& e) {
      model.net = last_net;
      model.policy = last_policy;
      model.status = TrainStatus::kDiverged;
      model.diagnostic = e.what();
      return model;
    }
    last_net = net;
    last_policy = policy;

    probe.net = net;
    probe.policy = policy;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.prediction_loss = loss_sum / static_cast<double>(order.size());
    rec.sensitivity = sens_sum / static_cast<double>(order.size());
    rec.validation_balanced_accuracy =
        selection_score(model_outcomes(probe, validation));
    model.log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (rec.validation_balanced_accuracy > best_score) {
      best_score = rec.validation_balanced_accuracy;
      best_net = net;
      best_policy = policy;
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= patience) {
      model.status = TrainStatus::kEarlyStopped;
      break;
    }
  }
  model.net = std::move(best_net);
  model.policy = std::move(best_policy);
  return model;
}

}  // namespace fairsel
