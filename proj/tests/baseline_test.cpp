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

#include "fairsel/baseline.hpp"

#include <cmath>

#include "gtest/gtest.h"

namespace fairsel {
namespace {

Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<int> labels) {
  Dataset ds;
  const std::size_t d = rows.front().size();
  for (std::size_t j = 0; j < d; ++j) {
    ds.columns.push_back({"x" + std::to_string(j), "x", FeatureColumn::Kind::kNumeric, {}});
  }
  ds.columns[0].kind = FeatureColumn::Kind::kSensitive;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.features.insert(ds.features.end(), rows[i].begin(), rows[i].end());
    ds.groups.push_back(rows[i][0] >= 0.5 ? Group::kPrivileged : Group::kUnprivileged);
  }
  ds.labels = std::move(labels);
  ds.normalizer = Normalizer::identity(d);
  return ds;
}

Dataset random_dataset(RandomEngine& rng, std::size_t n, std::size_t d) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : rows[i]) v = uniform01(rng);
    labels[i] = uniform01(rng) < rows[i][d - 1] ? 1 : 0;
  }
  return make_dataset(rows, labels);
}

TEST(PredictLogistic, TieAndSaturation) {
  LogisticModel m{{0.0, 0.0}, 0.0};
  const std::vector<double> x{0.3, 0.9};
  const auto tie = predict_logistic(m, x);
  EXPECT_EQ(tie.probability, 0.5);
  EXPECT_EQ(tie.label, 1);
  m.bias = 800.0;
  EXPECT_EQ(predict_logistic(m, x).probability, 1.0);
  EXPECT_THROW(predict_logistic(m, std::vector<double>{1.0}), DimensionError);
}

TEST(PredictLogistic, IndependentSigmoid) {
  LogisticModel m{{0.7, -1.3, 0.2}, 0.1};
  const std::vector<double> x{0.5, 0.25, 1.0};
  // z = 0.35 - 0.325 + 0.2 + 0.1 = 0.325
  EXPECT_NEAR(predict_logistic(m, x).probability, 1.0 / (1.0 + std::exp(-0.325)), 1e-15);
}

TEST(LogisticLoss, MatchesFiniteDifferences) {
  RandomEngine rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Dataset ds = random_dataset(rng, 40, 1 + rng() % 6);
    LogisticModel m;
    for (std::size_t j = 0; j < ds.dim(); ++j) m.weights.push_back(standard_normal(rng));
    m.bias = standard_normal(rng);
    const double l2 = trial % 2 ? 0.1 : 0.0;
    const auto analytic = logistic_loss(m, ds, l2).gradient;
    for (std::size_t j = 0; j <= ds.dim(); ++j) {
      double& param = j < ds.dim() ? m.weights[j] : m.bias;
      const double saved = param, h = 1e-6;
      param = saved + h;
      const double up = logistic_loss(m, ds, l2).value;
      param = saved - h;
      const double down = logistic_loss(m, ds, l2).value;
      param = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[j]), 1e-3});
      EXPECT_LE(std::abs(numeric - analytic[j]) / denom, 1e-6);
    }
  }
}

TEST(TrainLogistic, SeparableToy) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  RandomEngine rng(3);
  for (int i = 0; i < 60; ++i) {
    const double a = uniform01(rng), b = uniform01(rng);
    if (std::abs(a + b - 1.0) < 0.1) continue;
    rows.push_back({a, b});
    labels.push_back(a + b > 1.0 ? 1 : 0);
  }
  const Dataset ds = make_dataset(rows, labels);
  LogisticOptions opt;
  opt.epochs = 500;
  opt.learning_rate = 5.0;
  const auto fit = train_logistic(ds, ds, opt);
  EXPECT_EQ(accuracy(logistic_outcomes(fit.model, ds)), 1.0);
}

TEST(TrainLogistic, ZeroLearningRateKeepsInit) {
  RandomEngine rng(4);
  const Dataset ds = random_dataset(rng, 50, 3);
  LogisticOptions opt;
  opt.epochs = 20;
  opt.learning_rate = 0.0;
  opt.seed = 11;
  const auto fit = train_logistic(ds, ds, opt);
  RandomEngine init = make_engine(11, Stream::kInit);
  for (double w : fit.model.weights) EXPECT_EQ(w, opt.init_stddev * standard_normal(init));
  EXPECT_EQ(fit.model.bias, 0.0);
  EXPECT_EQ(fit.best_epoch, 0u);
}

TEST(TrainLogistic, LossDecreasesAtSmallRate) {
  RandomEngine rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset ds = random_dataset(rng, 80, 4);
    LogisticOptions opt;
    opt.epochs = 50;
    opt.learning_rate = 1e-3;
    opt.seed = static_cast<std::uint64_t>(trial);
    const auto fit = train_logistic(ds, ds, opt);
    EXPECT_LE(fit.final_loss, fit.initial_loss);
  }
}

TEST(TrainLogistic, Deterministic) {
  RandomEngine rng(6);
  const Dataset ds = random_dataset(rng, 80, 4);
  LogisticOptions opt;
  opt.epochs = 100;
  opt.seed = 3;
  EXPECT_EQ(train_logistic(ds, ds, opt).model, train_logistic(ds, ds, opt).model);
}

TEST(TrainLogistic, DivergenceReported) {
  std::vector<std::vector<double>> rows{{0.0, 1e300}, {1.0, -1e300}};
  const Dataset ds = make_dataset(rows, {1, 0});
  LogisticOptions opt;
  opt.epochs = 5;
  opt.learning_rate = 1e10;
  EXPECT_THROW(train_logistic(ds, ds, opt), NumericalError);
}

TEST(LogisticModel, ScalingKeepsLabels) {
  RandomEngine rng(8);
  const Dataset ds = random_dataset(rng, 100, 5);
  LogisticModel m;
  for (std::size_t j = 0; j < 5; ++j) m.weights.push_back(standard_normal(rng));
  m.bias = -0.3;
  for (double scale : {0.01, 0.5, 3.0, 1000.0}) {
    LogisticModel s = m;
    for (double& w : s.weights) w *= scale;
    s.bias *= scale;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      EXPECT_EQ(predict_logistic(m, ds.row(i)).label, predict_logistic(s, ds.row(i)).label);
    }
  }
}

}  // namespace
}  // namespace fairsel
