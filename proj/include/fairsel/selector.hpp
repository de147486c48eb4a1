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

// Data-independent stochastic feature selector: one logit per feature,
// independent Bernoulli draws, and the log-probability gradient used by the
// score-function estimator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "fairsel/error.hpp"
#include "fairsel/random.hpp"

namespace fairsel {

// Logits are kept inside [-kLogitBound, kLogitBound] so that every unmasked
// probability stays strictly inside (0, 1).
inline constexpr double kLogitBound = 20.0;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Bit mask over features; 1 = selected.
class SelectionVector {
 public:
  SelectionVector() = default;
  explicit SelectionVector(std::size_t d) : bits_(d, 0) {}
  SelectionVector(std::size_t d, std::initializer_list<std::size_t> selected)
      : bits_(d, 0) {
    for (std::size_t j : selected) set(j, true);
  }

  static SelectionVector all(std::size_t d) {
    SelectionVector s(d);
    std::fill(s.bits_.begin(), s.bits_.end(), 1);
    return s;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t j) const { return bits_[j] != 0; }
  bool contains(std::size_t j) const { return bits_.at(j) != 0; }
  void set(std::size_t j, bool on) { bits_.at(j) = on ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  // s ∪ {j}
  SelectionVector with(std::size_t j) const {
    SelectionVector s = *this;
    s.set(j, true);
    return s;
  }

  friend bool operator==(const SelectionVector&, const SelectionVector&) =
      default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct SelectorPolicy {
  std::vector<double> logits;
  std::size_t sensitive_index = 0;
  bool mask_sensitive = true;

  SelectorPolicy() = default;
  SelectorPolicy(std::vector<double> theta, std::size_t k, bool mask = true)
      : logits(std::move(theta)), sensitive_index(k), mask_sensitive(mask) {
    if (k >= logits.size()) {
      throw InvalidArgument("sensitive index " + std::to_string(k) +
                            " out of range for " +
                            std::to_string(logits.size()) + " features");
    }
    clamp();
  }

  // Logits drawn from N(mean, stddev^2).
  static SelectorPolicy random(std::size_t d, std::size_t k, bool mask,
                               RandomEngine& rng, double mean = 0.0,
                               double stddev = 0.01) {
    std::vector<double> theta(d);
    for (double& t : theta) t = mean + stddev * standard_normal(rng);
    return SelectorPolicy(std::move(theta), k, mask);
  }

  std::size_t dim() const { return logits.size(); }

  bool is_masked(std::size_t j) const {
    return mask_sensitive && j == sensitive_index;
  }

  void clamp() {
    for (double& t : logits) t = std::clamp(t, -kLogitBound, kLogitBound);
  }

  friend bool operator==(const SelectorPolicy&, const SelectorPolicy&) =
      default;
};

// p_j = sigmoid(theta_j), with p_k = 0 for a masked sensitive feature.
inline std::vector<double> probabilities(const SelectorPolicy& policy) {
  std::vector<double> p(policy.dim());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!std::isfinite(policy.logits[j])) {
      throw NumericalError("non-finite selector logit at feature " +
                           std::to_string(j));
    }
    p[j] = policy.is_masked(j)
               ? 0.0
               : sigmoid(std::clamp(policy.logits[j], -kLogitBound,
                                    kLogitBound));
  }
  return p;
}

// Independent s_j ~ Bernoulli(p_j).
inline SelectionVector sample_selection(std::span<const double> p,
                                        RandomEngine& rng) {
  SelectionVector s(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    s.set(j, uniform01(rng) < p[j]);
  }
  return s;
}

namespace detail {

inline void check_selection(std::span<const double> p,
                            const SelectionVector& s) {
  if (s.size() != p.size()) {
    throw DimensionError("selection vector", p.size(), s.size());
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.0 && p[j] <= 1.0)) {
      throw InvalidArgument("selection probability outside [0, 1] at feature " +
                            std::to_string(j));
    }
    if (s[j] && p[j] == 0.0) {
      throw InvalidArgument("selection includes masked feature " +
                            std::to_string(j));
    }
  }
}

}  // namespace detail

// pi(s) = prod_j p_j^{s_j} (1 - p_j)^{1 - s_j}
inline double pi_prob(std::span<const double> p, const SelectionVector& s) {
  detail::check_selection(p, s);
  double prob = 1.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    prob *= s[j] ? p[j] : 1.0 - p[j];
  }
  return prob;
}

inline double log_pi(std::span<const double> p, const SelectionVector& s) {
  detail::check_selection(p, s);
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    total += std::log(s[j] ? p[j] : 1.0 - p[j]);
  }
  return total;
}

// d log pi(s) / d theta with p = sigmoid(theta): s_j - p_j. Masked features
// have p_j = s_j = 0 and so contribute exactly 0.
inline std::vector<double> log_pi_grad(std::span<const double> p,
                                       const SelectionVector& s) {
  detail::check_selection(p, s);
  std::vector<double> g(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    g[j] = (s[j] ? 1.0 : 0.0) - p[j];
  }
  return g;
}

}  // namespace fairsel
