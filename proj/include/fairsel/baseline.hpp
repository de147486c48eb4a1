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

// Unconstrained logistic-regression baseline trained on every feature,
// including the sensitive one.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fairsel/data.hpp"
#include "fairsel/error.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/random.hpp"
#include "fairsel/selector.hpp"

namespace fairsel {

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  std::size_t dim() const { return weights.size(); }

  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct LogisticPrediction {
  int label = 0;
  double probability = 0.0;
};

inline double logistic_score(const LogisticModel& m, std::span<const double> x) {
  if (x.size() != m.dim()) {
    throw DimensionError("logistic input", m.dim(), x.size());
  }
  double z = m.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += m.weights[j] * x[j];
  return z;
}

// A probability of exactly 0.5 predicts the favorable label.
inline LogisticPrediction predict_logistic(const LogisticModel& m,
                                           std::span<const double> x) {
  const double p = sigmoid(logistic_score(m, x));
  return {p >= 0.5 ? 1 : 0, p};
}

struct LogisticLoss {
  double value = 0.0;
  // d/dweights followed by d/dbias.
  std::vector<double> gradient;
};

// Mean binary cross-entropy plus (l2 / 2) * |w|^2.
inline LogisticLoss logistic_loss(const LogisticModel& m, const Dataset& data,
                                  double l2 = 0.0) {
  if (data.dim() != m.dim()) {
    throw DimensionError("logistic training data", m.dim(), data.dim());
  }
  if (data.size() == 0) throw DataError("logistic loss on an empty dataset");
  LogisticLoss out;
  out.gradient.assign(m.dim() + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const double z = logistic_score(m, x);
    const double y = data.labels[i];
    // log(1 + e^z) - y z, evaluated without overflow.
    const double softplus =
        z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.value += (softplus - y * z) * inv_n;
    const double r = (sigmoid(z) - y) * inv_n;
    for (std::size_t j = 0; j < x.size(); ++j) out.gradient[j] += r * x[j];
    out.gradient.back() += r;
  }
  for (std::size_t j = 0; j < m.dim(); ++j) {
    out.value += 0.5 * l2 * m.weights[j] * m.weights[j];
    out.gradient[j] += l2 * m.weights[j];
  }
  return out;
}

struct LogisticOptions {
  std::size_t epochs = 2000;
  double learning_rate = 0.5;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  double init_stddev = 0.01;
};

struct LogisticFit {
  LogisticModel model;
  std::size_t best_epoch = 0;
  double best_validation_score = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

inline GroupedOutcomes logistic_outcomes(const LogisticModel& m,
                                         const Dataset& data) {
  GroupedOutcomes out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back({data.labels[i], predict_logistic(m, data.row(i)).label,
                   data.groups[i]});
  }
  return out;
}

// Full-batch gradient descent on the training split; keeps the parameters
// with the best validation balanced accuracy (earliest on ties).
inline LogisticFit train_logistic(const Dataset& train,
                                  const Dataset& validation,
                                  const LogisticOptions& opt = {}) {
  if (train.num_classes != 2) {
    throw InvalidArgument("logistic baseline needs binary labels");
  }
  if (!(opt.learning_rate >= 0.0)) {
    throw InvalidArgument("learning rate must be >= 0");
  }
  RandomEngine rng = make_engine(opt.seed, Stream::kInit);
  LogisticModel model;
  model.weights.resize(train.dim());
  for (double& w : model.weights) w = opt.init_stddev * standard_normal(rng);

  LogisticFit fit;
  fit.model = model;
  fit.best_validation_score = selection_score(logistic_outcomes(model, validation));
  LogisticLoss loss = logistic_loss(model, train, opt.l2);
  fit.initial_loss = loss.value;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    for (std::size_t j = 0; j < model.dim(); ++j) {
      model.weights[j] -= opt.learning_rate * loss.gradient[j];
    }
    model.bias -= opt.learning_rate * loss.gradient.back();
    loss = logistic_loss(model, train, opt.l2);
    if (!std::isfinite(loss.value)) {
      throw NumericalError("logistic regression diverged at epoch " +
                           std::to_string(epoch) + " (learning rate " +
                           std::to_string(opt.learning_rate) + ")");
    }
    const double score = selection_score(logistic_outcomes(model, validation));
    if (score > fit.best_validation_score) {
      fit.best_validation_score = score;
      fit.best_epoch = epoch;
      fit.model = model;
    }
  }
  fit.final_loss = loss.value;
  return fit;
}

}  // namespace fairsel
