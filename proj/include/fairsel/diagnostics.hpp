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

// Self-checks: exhaustive enumeration over selections, finite-difference
// suites for every analytic gradient, and the score-function estimator
// check. Used by the test suite and by `fairsel gradcheck`.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fairsel/baseline.hpp"
#include "fairsel/faias.hpp"
#include "fairsel/predictor.hpp"
#include "fairsel/random.hpp"
#include "fairsel/selector.hpp"

namespace fairsel {

inline constexpr std::size_t kMaxEnumerationDim = 20;

// Calls fn(s, pi(s)) for every selection with non-zero probability under
// the policy (a masked sensitive feature is never selected).
template <typename Fn>
void for_each_selection(const SelectorPolicy& policy, Fn&& fn) {
  const std::size_t d = policy.dim();
  if (d > kMaxEnumerationDim) {
    throw InvalidArgument("enumeration limited to " +
                          std::to_string(kMaxEnumerationDim) + " features");
  }
  const auto p = probabilities(policy);
  SelectionVector s(d);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << d); ++bits) {
    bool skip = false;
    for (std::size_t j = 0; j < d; ++j) {
      const bool on = (bits >> j) & 1u;
      if (on && p[j] == 0.0) skip = true;
      s.set(j, on);
    }
    if (!skip) fn(static_cast<const SelectionVector&>(s), pi_prob(p, s));
  }
}

// E_s |l_sen(x, s)| by enumeration.
inline double expected_sensitivity(const DenseNet& net,
                                   const SelectorPolicy& policy,
                                   std::span<const double> x) {
  double total = 0.0;
  for_each_selection(policy, [&](const SelectionVector& s, double pi) {
    total += pi * sensitivity_loss(net, x, s, policy.sensitive_index);
  });
  return total;
}

// grad_theta E_s |l_sen(x, s)| = sum_s pi(s) (s - p) |l_sen(x, s)|, plus the
// per-coordinate second moment of the single-draw estimator.
struct EnumeratedGradient {
  std::vector<double> gradient;
  std::vector<double> second_moment;
};

inline EnumeratedGradient exact_selector_gradient(const DenseNet& net,
                                                  const SelectorPolicy& policy,
                                                  std::span<const double> x) {
  const auto p = probabilities(policy);
  EnumeratedGradient out{std::vector<double>(p.size(), 0.0),
                         std::vector<double>(p.size(), 0.0)};
  for_each_selection(policy, [&](const SelectionVector& s, double pi) {
    const double norm = sensitivity_loss(net, x, s, policy.sensitive_index);
    const auto g = log_pi_grad(p, s);
    for (std::size_t j = 0; j < p.size(); ++j) {
      out.gradient[j] += pi * norm * g[j];
      out.second_moment[j] += pi * norm * norm * g[j] * g[j];
    }
  });
  return out;
}

// sum_s pi(s) f(x, s): the limit of Monte-Carlo averaged inference.
inline std::vector<double> expected_prediction(const DenseNet& net,
                                               const SelectorPolicy& policy,
                                               std::span<const double> x) {
  std::vector<double> out(net.num_classes(), 0.0);
  for_each_selection(policy, [&](const SelectionVector& s, double pi) {
    const auto f = forward(net, apply_selection(x, s));
    for (std::size_t l = 0; l < f.size(); ++l) out[l] += pi * f[l];
  });
  return out;
}

// LeCun weights with N(0, bias_scale^2) biases. Non-zero biases keep SELU
// pre-activations away from the kink at 0 when inputs are masked to zero.
inline DenseNet random_test_net(std::vector<std::size_t> sizes,
                                RandomEngine& rng, double bias_scale = 0.2) {
  DenseNet net = DenseNet::lecun_normal(std::move(sizes), rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (double& b : net.bias(l)) b = bias_scale * standard_normal(rng);
  }
  return net;
}

// A d -> 2 -> 2 net whose first hidden unit stays on SELU's exponential
// branch, so |l_sen(x, s)| is close to C * prod_{j in s} (1 + gains[j]).
// Every selector coordinate then carries a large, well-separated gradient,
// which keeps the estimator's relative standard error small.
inline DenseNet gated_sensitivity_net(std::span<const double> x,
                                      std::span<const double> gains) {
  const std::size_t d = x.size();
  if (gains.size() != d) throw DimensionError("gains", d, gains.size());
  DenseNet net({d, 2, 2});
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (!(x[j] > 0.0) || !(gains[j] > 0.0)) {
      throw InvalidArgument("gated net needs positive inputs and gains");
    }
    const double log_gain = std::log1p(gains[j]);
    net.weight(0, 0, j) = log_gain / x[j];
    total += log_gain;
  }
  net.bias(0)[0] = -total - 2.0;
  net.weight(1, 0, 0) = 1.0;
  return net;
}

struct EstimatorCheck {
  std::vector<double> exact;
  std::vector<double> estimate;
  // Standard error of the estimate, from the enumerated second moment.
  std::vector<double> standard_error;
  std::vector<double> relative_error;
  double max_relative_error = 0.0;
  double max_relative_standard_error = 0.0;
  double max_abs_z = 0.0;
  std::size_t samples = 0;
};

// Runs the selector's score-function update on `samples` fresh draws at a
// fixed (net, x) and compares the mean step with the enumerated gradient.
// Coordinates whose exact gradient is 0 (the masked feature) must estimate
// exactly 0 and are excluded from the relative error.
inline EstimatorCheck check_selector_estimator(const DenseNet& net,
                                               const SelectorPolicy& policy,
                                               std::span<const double> x,
                                               std::size_t samples,
                                               std::uint64_t seed,
                                               bool flip_sign = false) {
  const std::size_t d = policy.dim();
  const std::size_t k = policy.sensitive_index;
  const auto p = probabilities(policy);
  EstimatorCheck out;
  out.samples = samples;
  const auto exact = exact_selector_gradient(net, policy, x);
  out.exact = exact.gradient;

  RandomEngine rng = make_engine(seed, Stream::kEvaluation);
  constexpr std::size_t kChunk = 1000;
  std::vector<double> sum(d, 0.0);
  Batch batch;
  std::vector<ExampleEvaluation> evals;
  for (std::size_t done = 0; done < samples;) {
    const std::size_t n = std::min(kChunk, samples - done);
    batch.resize(n);
    evals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      batch[i] = {x, 0, sample_selection(p, rng)};
      evaluate_example(net, batch[i], k, evals[i]);
    }
    // A unit-rate update from the policy's own logits yields the batch
    // mean of |l_sen| (s - p) as the logit change.
    SelectorPolicy stepped = policy;
    detail::selector_update(stepped, batch, evals, p, 1.0, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      sum[j] += (stepped.logits[j] - policy.logits[j]) * static_cast<double>(n);
    }
    done += n;
  }
  const double inv = 1.0 / static_cast<double>(samples);
  out.estimate.resize(d);
  out.standard_error.resize(d);
  out.relative_error.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    out.estimate[j] = (flip_sign ? -1.0 : 1.0) * sum[j] * inv;
    const double var = std::max(
        0.0, exact.second_moment[j] - exact.gradient[j] * exact.gradient[j]);
    out.standard_error[j] = std::sqrt(var * inv);
    if (exact.gradient[j] == 0.0) {
      if (out.estimate[j] != 0.0) out.max_relative_error = HUGE_VAL;
      continue;
    }
    const double diff = std::abs(out.estimate[j] - exact.gradient[j]);
    out.relative_error[j] = diff / std::abs(exact.gradient[j]);
    out.max_relative_error = std::max(out.max_relative_error, out.relative_error[j]);
    out.max_relative_standard_error =
        std::max(out.max_relative_standard_error,
                 out.standard_error[j] / std::abs(exact.gradient[j]));
    if (out.standard_error[j] > 0.0) {
      out.max_abs_z = std::max(out.max_abs_z, diff / out.standard_error[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference suites.

enum class Fault {
  kNone,
  // Negates the analytic gradient of |l_sen| before it is checked.
  kFlipSensitivityGradient,
  // Negates the selector's score-function estimate.
  kFlipSelectorEstimate,
};

struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string detail;
};

struct GradCheckSuiteOptions {
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  GradCheckOptions fd;
  Fault fault = Fault::kNone;
};

namespace detail {

struct PredictorInstance {
  DenseNet net;
  std::vector<double> x;
  std::size_t k = 0;
  BatchExample example;
};

// Small random net, input in [0.2, 1], label in range and a selection that
// leaves k out so that |l_sen| is away from its kink.
inline PredictorInstance random_predictor_instance(RandomEngine& rng) {
  PredictorInstance in;
  const std::size_t d = 2 + rng() % 7;
  const std::size_t c = 2 + rng() % 2;
  in.net = random_test_net({d, 3 + rng() % 6, 2 + rng() % 6, c}, rng);
  in.x.resize(d);
  for (double& v : in.x) v = 0.2 + 0.8 * uniform01(rng);
  in.k = rng() % d;
  SelectionVector s(d);
  for (std::size_t j = 0; j < d; ++j) s.set(j, j != in.k && uniform01(rng) < 0.6);
  in.example = {in.x, static_cast<int>(rng() % c), s};
  return in;
}

inline void record(SuiteResult& r, const GradCheckReport& rep,
                   std::size_t instance) {
  ++r.instances;
  if (!(rep.max_relative_error <= r.max_error)) {
    r.max_error = rep.max_relative_error;
    r.detail = "worst at instance " + std::to_string(instance) +
               ", parameter " + std::to_string(rep.worst_index) +
               ": analytic " + std::to_string(rep.analytic_at_worst) +
               " vs numeric " + std::to_string(rep.numeric_at_worst);
  }
}

inline SuiteResult predictor_suite(const std::string& name,
                                   const GradCheckSuiteOptions& opt,
                                   std::uint64_t stream, double lambda,
                                   double ce_weight, bool flip) {
  SuiteResult r;
  r.name = name;
  r.tolerance = opt.tolerance;
  RandomEngine rng = make_engine(opt.seed, Stream::kEvaluation, stream);
  for (std::size_t i = 0; i < opt.instances; ++i) {
    PredictorInstance in = random_predictor_instance(rng);
    const Batch batch{in.example};
    auto grad = predictor_gradient(in.net, batch, in.k, lambda, ce_weight);
    if (flip) {
      // Flip only the sensitivity part of the composite gradient.
      const auto ce = predictor_gradient(in.net, batch, in.k, 0.0, ce_weight);
      for (std::size_t p = 0; p < grad.size(); ++p) grad[p] = 2 * ce[p] - grad[p];
    }
    const auto rep = check_gradient(
        in.net.params(), grad,
        [&] { return predictor_objective(in.net, batch, in.k, lambda, ce_weight); },
        opt.tolerance, opt.fd);
    record(r, rep, i);
  }
  r.passed = r.max_error <= r.tolerance;
  return r;
}

}  // namespace detail

// Cross-entropy of f(x, s) with respect to the predictor parameters.
inline SuiteResult check_prediction_loss_gradients(
    const GradCheckSuiteOptions& opt = {}) {
  return detail::predictor_suite("prediction_loss", opt, 1, 0.0, 1.0, false);
}

// |l_sen| with respect to the predictor parameters.
inline SuiteResult check_sensitivity_gradients(
    const GradCheckSuiteOptions& opt = {}) {
  return detail::predictor_suite(
      "sensitivity_loss", opt, 2, 1.0, 0.0,
      opt.fault == Fault::kFlipSensitivityGradient);
}

// lambda |l_sen| + cross-entropy, the predictor's training objective.
inline SuiteResult check_composite_gradients(
    const GradCheckSuiteOptions& opt = {}) {
  return detail::predictor_suite(
      "predictor_objective", opt, 3, 0.7, 1.0,
      opt.fault == Fault::kFlipSensitivityGradient);
}

inline SuiteResult check_logistic_gradients(
    const GradCheckSuiteOptions& opt = {}) {
  SuiteResult r;
  r.name = "logistic_loss";
  r.tolerance = opt.tolerance;
  RandomEngine rng = make_engine(opt.seed, Stream::kEvaluation, 4);
  for (std::size_t i = 0; i < opt.instances; ++i) {
    const std::size_t d = 1 + rng() % 8;
    const std::size_t n = 10 + rng() % 40;
    Dataset data;
    data.normalizer = Normalizer::identity(d);
    for (std::size_t j = 0; j < d; ++j) {
      data.columns.push_back({"x" + std::to_string(j), "x",
                              FeatureColumn::Kind::kNumeric, {}});
    }
    for (std::size_t row = 0; row < n; ++row) {
      for (std::size_t j = 0; j < d; ++j) data.features.push_back(uniform01(rng));
      data.labels.push_back(uniform01(rng) < 0.5 ? 1 : 0);
      data.groups.push_back(Group::kUnprivileged);
    }
    std::vector<double> point(d + 1);
    for (double& v : point) v = standard_normal(rng);
    const double l2 = i % 2 ? 0.05 : 0.0;
    auto model_at = [&] {
      return LogisticModel{{point.begin(), point.end() - 1}, point.back()};
    };
    const auto grad = logistic_loss(model_at(), data, l2).gradient;
    const auto rep = check_gradient(
        std::span<double>(point), grad,
        [&] { return logistic_loss(model_at(), data, l2).value; },
        opt.tolerance, opt.fd);
    detail::record(r, rep, i);
  }
  r.passed = r.max_error <= r.tolerance;
  return r;
}

// log pi(s) through the sigmoid, with respect to the selector logits.
inline SuiteResult check_selector_log_prob_gradients(
    const GradCheckSuiteOptions& opt = {}) {
  SuiteResult r;
  r.name = "log_pi";
  r.tolerance = opt.tolerance;
  RandomEngine rng = make_engine(opt.seed, Stream::kEvaluation, 5);
  for (std::size_t i = 0; i < opt.instances; ++i) {
    const std::size_t d = 1 + rng() % 10;
    SelectorPolicy policy = SelectorPolicy::random(d, 0, false, rng, 0.0, 2.0);
    SelectionVector s(d);
    for (std::size_t j = 0; j < d; ++j) s.set(j, uniform01(rng) < 0.5);
    const auto grad = log_pi_grad(probabilities(policy), s);
    const auto rep = check_gradient(
        std::span<double>(policy.logits), grad,
        [&] { return log_pi(probabilities(policy), s); }, opt.tolerance, opt.fd);
    detail::record(r, rep, i);
  }
  r.passed = r.max_error <= r.tolerance;
  return r;
}

struct EstimatorSuiteOptions {
  std::size_t max_dim = 8;
  std::size_t samples = 200000;
  std::uint64_t seed = 0;
  // Strict per-coordinate relative tolerance on the gated instances.
  double tolerance = 0.02;
  // z-score bound on generic random instances, whose relative standard
  // error is too large for a fixed relative tolerance.
  double z_bound = 4.5;
  std::size_t generic_instances = 2;
  Fault fault = Fault::kNone;
};

struct EstimatorSuiteResult {
  SuiteResult gated;
  SuiteResult generic;
  std::vector<EstimatorCheck> gated_checks;
  bool passed() const { return gated.passed && generic.passed; }
};

// Gated instance for dimension d: inputs in [0.3, 1], gains in [3, 5] and
// selection probabilities in [0.85, 0.93], with the sensitive feature masked.
inline std::pair<DenseNet, SelectorPolicy> gated_instance(
    std::size_t d, std::vector<double>& x, RandomEngine& rng) {
  x.resize(d);
  std::vector<double> gains(d), theta(d);
  for (std::size_t j = 0; j < d; ++j) {
    x[j] = 0.3 + 0.7 * uniform01(rng);
    gains[j] = 3.0 + 2.0 * uniform01(rng);
    const double q = 0.85 + 0.08 * uniform01(rng);
    theta[j] = std::log(q / (1.0 - q));
  }
  const std::size_t k = rng() % d;
  return {gated_sensitivity_net(x, gains), SelectorPolicy(theta, k, true)};
}

inline EstimatorSuiteResult check_estimator(const EstimatorSuiteOptions& opt = {}) {
  EstimatorSuiteResult out;
  out.gated.name = "selector_estimator_gated";
  out.gated.tolerance = opt.tolerance;
  out.generic.name = "selector_estimator_generic";
  out.generic.tolerance = opt.z_bound;
  const bool flip = opt.fault == Fault::kFlipSelectorEstimate;
  RandomEngine rng = make_engine(opt.seed, Stream::kEvaluation, 6);
  for (std::size_t d = 2; d <= opt.max_dim; ++d) {
    std::vector<double> x;
    auto [net, policy] = gated_instance(d, x, rng);
    auto check = check_selector_estimator(net, policy, x, opt.samples,
                                          opt.seed + d, flip);
    ++out.gated.instances;
    if (!(check.max_relative_error <= out.gated.max_error)) {
      out.gated.max_error = check.max_relative_error;
      out.gated.detail = "worst at d=" + std::to_string(d) +
                         ", expected relative standard error " +
                         std::to_string(check.max_relative_standard_error);
    }
    out.gated_checks.push_back(std::move(check));

    for (std::size_t g = 0; g < opt.generic_instances; ++g) {
      DenseNet generic = random_test_net({d, 8, 8, 2}, rng, 0.5);
      SelectorPolicy gp = SelectorPolicy::random(d, rng() % d, true, rng, 0.0, 1.0);
      std::vector<double> gx(d);
      for (double& v : gx) v = 0.2 + 0.8 * uniform01(rng);
      const auto c = check_selector_estimator(generic, gp, gx, opt.samples,
                                              opt.seed + 100 * d + g, flip);
      ++out.generic.instances;
      const double z = c.max_relative_error == HUGE_VAL ? HUGE_VAL : c.max_abs_z;
      if (!(z <= out.generic.max_error)) {
        out.generic.max_error = z;
        out.generic.detail = "worst |z| at d=" + std::to_string(d);
      }
    }
  }
  out.gated.passed = out.gated.max_error <= opt.tolerance;
  out.generic.passed = out.generic.max_error <= opt.z_bound;
  return out;
}

}  // namespace fairsel
