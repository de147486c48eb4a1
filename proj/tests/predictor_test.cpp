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

#include "fairsel/predictor.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace fairsel {
namespace {

using testing::random_net;
using testing::random_vector;

// Naive re-implementation over nested vectors, kept independent of the
// flat-buffer forward pass.
std::vector<double> reference_forward(const DenseNet& net,
                                      const std::vector<double>& input) {
  std::vector<double> h = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.layer_sizes()[l];
    const std::size_t out = net.layer_sizes()[l + 1];
    std::vector<std::vector<double>> w(out, std::vector<double>(in));
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) w[r][c] = net.weight(l, r, c);
    }
    std::vector<double> z(out);
    for (std::size_t r = 0; r < out; ++r) {
      long double acc = net.bias(l)[r];
      for (std::size_t c = 0; c < in; ++c) acc += w[r][c] * h[c];
      z[r] = static_cast<double>(acc);
    }
    if (l + 1 < net.num_layers()) {
      for (double& v : z) {
        v = v > 0 ? 1.0507009873554805 * v
                  : 1.0507009873554805 * 1.6732632423543772 * (std::exp(v) - 1);
      }
    } else {
      double total = 0;
      for (double v : z) total += std::exp(v);
      for (double& v : z) v = std::exp(v) / total;
    }
    h = z;
  }
  return h;
}

TEST(Selu, Values) {
  EXPECT_EQ(selu(0.0), 0.0);
  EXPECT_DOUBLE_EQ(selu(1.0), 1.0507009873554805);
  // mpmath, 30 digits: -1.11133073781256271242612740265
  EXPECT_NEAR(selu(-1.0), -1.1113307378125627, 1e-15);
}

TEST(Forward, ZeroNetIsUniform) {
  DenseNet net({4, 3, 5});
  const auto out = forward(net, std::vector<double>{0.3, -1, 2, 7});
  ASSERT_EQ(out.size(), 5u);
  for (double p : out) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(Forward, SymmetricSingleLayer) {
  DenseNet net({2, 2});
  net.weight(0, 0, 0) = 1.0;
  net.weight(0, 1, 1) = 1.0;
  const auto out = forward(net, std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
}

TEST(Forward, MatchesReferenceImplementation) {
  RandomEngine rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    DenseNet net = random_net({6, 9, 7, 3}, rng);
    const auto x = random_vector(6, rng, -1, 1);
    const auto got = forward(net, x);
    const auto want = reference_forward(net, x);
    for (std::size_t c = 0; c < got.size(); ++c) {
      EXPECT_NEAR(got[c], want[c], 1e-13);
    }
  }
}

TEST(Forward, DimensionMismatch) {
  DenseNet net({3, 2});
  try {
    forward(net, std::vector<double>{1, 2});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.expected(), 3u);
    EXPECT_EQ(e.actual(), 2u);
  }
}

TEST(Forward, SoftmaxSumsToOneProperty) {
  RandomEngine rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 8;
    const std::size_t c = 2 + rng() % 5;
    DenseNet net = random_net({d, 1 + rng() % 10, c}, rng, 3.0);
    const auto x = random_vector(d, rng, -50, 50);
    const auto out = forward(net, x);
    double total = 0;
    for (double p : out) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Forward, PermutingOutputRowsPermutesOutput) {
  RandomEngine rng(3);
  DenseNet net = random_net({4, 6, 3}, rng);
  const std::vector<std::size_t> perm{2, 0, 1};
  DenseNet permuted = net;
  const std::size_t last = net.num_layers() - 1;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      permuted.weight(last, r, c) = net.weight(last, perm[r], c);
    }
    permuted.bias(last)[r] = net.bias(last)[perm[r]];
  }
  const auto x = random_vector(4, rng);
  const auto a = forward(net, x);
  const auto b = forward(permuted, x);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(b[r], a[perm[r]], 1e-15);
}

TEST(Backward, ZeroOutputGradGivesZero) {
  RandomEngine rng(5);
  DenseNet net = random_net({3, 4, 2}, rng);
  const auto g = backward(net, random_vector(3, rng), std::vector<double>{0, 0});
  for (double v : g.params) EXPECT_EQ(v, 0.0);
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(Backward, LinearInOutputGrad) {
  RandomEngine rng(6);
  DenseNet net = random_net({3, 5, 3}, rng);
  const auto x = random_vector(3, rng);
  const std::vector<double> g{0.3, -1.2, 0.5};
  const std::vector<double> g2{0.6, -2.4, 1.0};
  const auto a = backward(net, x, g);
  const auto b = backward(net, x, g2);
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_NEAR(b.params[i], 2 * a.params[i], 1e-14 * (1 + std::abs(a.params[i])));
  }
  for (std::size_t i = 0; i < a.input.size(); ++i) {
    EXPECT_NEAR(b.input[i], 2 * a.input[i], 1e-14 * (1 + std::abs(a.input[i])));
  }
}

// Central differences of <g, forward(x)> with respect to every parameter and
// input coordinate, over 100 random (net, input) draws.
TEST(Backward, MatchesFiniteDifferencesProperty) {
  RandomEngine rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng() % 5;
    const std::size_t c = 2 + rng() % 3;
    DenseNet net = random_net({d, 3 + rng() % 5, 2 + rng() % 5, c}, rng);
    auto x = random_vector(d, rng, -1, 1);
    const auto g = random_vector(c, rng, -1, 1);
    const auto analytic = backward(net, x, g);
    auto value = [&] {
      const auto f = forward(net, x);
      return std::inner_product(f.begin(), f.end(), g.begin(), 0.0);
    };
    const auto params = check_gradient(net.params(), analytic.params, value, 1e-4);
    const auto input = check_gradient(std::span<double>(x), analytic.input, value, 1e-4);
    EXPECT_TRUE(params.passed) << "trial " << trial << " " << net.block_name(params.worst_index)
                               << " err " << params.max_relative_error;
    EXPECT_TRUE(input.passed) << "trial " << trial << " err " << input.max_relative_error;
    worst = std::max({worst, params.max_relative_error, input.max_relative_error});
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  std::vector<double> params{1.0, -2.0};
  AdamState state(2);
  state.first_moment = {0.5, -0.5};
  state.second_moment = {0.25, 0.25};
  state.step = 3;
  const std::vector<double> zero{0.0, 0.0};
  const std::vector<double> before = params;
  // With non-zero moments the parameters keep moving, so use fresh moments
  // to check "unchanged" and the primed state to check decay.
  AdamState fresh(2);
  adam_step(params, zero, fresh, 0.1);
  EXPECT_EQ(params, before);
  EXPECT_EQ(fresh.step, 1);
  adam_step(params, zero, state, 0.1);
  EXPECT_DOUBLE_EQ(state.first_moment[0], 0.45);
  EXPECT_DOUBLE_EQ(state.second_moment[1], 0.25 * 0.999);
  EXPECT_EQ(state.step, 4);
}

TEST(Adam, FirstStepHandEvaluated) {
  // t = 1: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1,
  // step = lr * 1 / (1 + 1e-8).
  std::vector<double> params{0.0};
  AdamState state(1);
  adam_step(params, std::vector<double>{1.0}, state, 0.1);
  EXPECT_NEAR(params[0], -0.1 / (1.0 + 1e-8), 1e-17);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, Deterministic) {
  std::vector<double> a{0.3, 0.7}, b{0.3, 0.7};
  AdamState sa(2), sb(2);
  const std::vector<double> g{0.2, -0.4};
  adam_step(a, g, sa, 0.01);
  adam_step(b, g, sb, 0.01);
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa.first_moment, sb.first_moment);
}

TEST(Adam, NonFiniteGradientNamesBlock) {
  RandomEngine rng(1);
  DenseNet net = random_net({2, 3, 2}, rng);
  std::vector<double> g(net.num_params(), 0.0);
  g[net.layer(1).bias_offset] = std::nan("");
  AdamState state(net.num_params());
  try {
    adam_step(net, g, state, 1e-3);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1 bias"), std::string::npos);
  }
  EXPECT_EQ(state.step, 0);
}

TEST(GradCheck, QuadraticToyLoss) {
  RandomEngine rng(9);
  DenseNet net = random_net({3, 4, 2}, rng);
  std::vector<double> coeff = random_vector(net.num_params(), rng, 0.5, 2.0);
  LossFunction loss = [&](const DenseNet& n) {
    LossAndGradient out;
    out.gradient.resize(n.num_params());
    for (std::size_t i = 0; i < n.num_params(); ++i) {
      const double t = n.params()[i];
      out.value += 0.5 * coeff[i] * t * t;
      out.gradient[i] = coeff[i] * t;
    }
    return out;
  };
  const auto report = grad_check(net, loss, 1e-6);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

LossAndGradient cross_entropy(const DenseNet& net, const std::vector<double>& x,
                              std::size_t label) {
  ForwardTrace trace;
  const auto f = forward(net, x, trace);
  LossAndGradient out;
  out.value = -std::log(f[label]);
  std::vector<double> g(net.num_classes(), 0.0);
  g[label] = -1.0 / f[label];
  out.gradient.assign(net.num_params(), 0.0);
  backward_accumulate(net, trace, g, out.gradient);
  return out;
}

TEST(GradCheck, CrossEntropyPasses) {
  RandomEngine rng(10);
  DenseNet net = random_net({5, 8, 8, 3}, rng);
  const auto x = random_vector(5, rng);
  const auto report = grad_check(
      net, [&](const DenseNet& n) { return cross_entropy(n, x, 1); }, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(GradCheck, CorruptedGradientFails) {
  RandomEngine rng(12);
  DenseNet net = random_net({5, 8, 3}, rng);
  const auto x = random_vector(5, rng);
  const auto report = grad_check(
      net,
      [&](const DenseNet& n) {
        auto out = cross_entropy(n, x, 0);
        out.gradient[7] += 1.0;
        return out;
      },
      1e-4);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.worst_index, 7u);
}

TEST(DenseNet, LecunInitStatistics) {
  RandomEngine rng(13);
  DenseNet net = DenseNet::lecun_normal({400, 300, 2}, rng);
  const auto w = net.weights(0);
  double sum = 0, sq = 0;
  for (double v : w) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  EXPECT_NEAR(sum / n, 0.0, 0.01 / std::sqrt(400.0));
  EXPECT_NEAR(sq / n, 1.0 / 400.0, 0.02 / 400.0);
  for (double b : net.bias(0)) EXPECT_EQ(b, 0.0);
}

TEST(DenseNet, DefaultArchitecture) {
  EXPECT_EQ(default_hidden_layers(), (std::vector<std::size_t>{200, 200, 200}));
  RandomEngine rng(1);
  DenseNet net = DenseNet::with_hidden(20, default_hidden_layers(), 2, rng);
  EXPECT_EQ(net.num_layers(), 4u);
  EXPECT_EQ(net.num_params(), 20u * 200 + 200 + 2 * (200 * 200 + 200) + 200 * 2 + 2);
}

}  // namespace
}  // namespace fairsel
