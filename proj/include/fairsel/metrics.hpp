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

// Binary-classification quality and group-fairness metrics. Label 1 is the
// favorable outcome throughout.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairsel/error.hpp"

namespace fairsel {

enum class Group : std::uint8_t { kUnprivileged = 0, kPrivileged = 1 };

inline const char* group_name(Group g) {
  return g == Group::kPrivileged ? "privileged" : "unprivileged";
}

struct Outcome {
  int truth = 0;
  int predicted = 0;
  Group group = Group::kUnprivileged;
};

using GroupedOutcomes = std::vector<Outcome>;

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t positives() const { return tp + fn; }
  std::size_t negatives() const { return tn + fp; }

  // `who` names the population in the error message.
  double tpr(const std::string& who = "outcomes") const {
    if (positives() == 0) {
      throw DegenerateGroupError(who + " has no positive (label 1) records");
    }
    return static_cast<double>(tp) / static_cast<double>(positives());
  }
  double tnr(const std::string& who = "outcomes") const {
    if (negatives() == 0) {
      throw DegenerateGroupError(who + " has no negative (label 0) records");
    }
    return static_cast<double>(tn) / static_cast<double>(negatives());
  }
  double fpr(const std::string& who = "outcomes") const {
    return 1.0 - tnr(who);
  }
  double balanced_accuracy(const std::string& who = "outcomes") const {
    return 0.5 * (tpr(who) + tnr(who));
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) =
      default;
};

namespace detail {

inline void check_binary(const Outcome& o) {
  if ((o.truth != 0 && o.truth != 1) || (o.predicted != 0 && o.predicted != 1)) {
    throw InvalidArgument("metric labels must be 0 or 1");
  }
}

inline void add(ConfusionCounts& c, const Outcome& o) {
  check_binary(o);
  if (o.truth == 1) {
    (o.predicted == 1 ? c.tp : c.fn) += 1;
  } else {
    (o.predicted == 1 ? c.fp : c.tn) += 1;
  }
}

}  // namespace detail

inline ConfusionCounts confusion(std::span<const Outcome> outcomes) {
  ConfusionCounts c;
  for (const Outcome& o : outcomes) detail::add(c, o);
  return c;
}

inline ConfusionCounts confusion(std::span<const Outcome> outcomes, Group g) {
  ConfusionCounts c;
  for (const Outcome& o : outcomes) {
    if (o.group == g) detail::add(c, o);
  }
  return c;
}

inline double accuracy(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) throw DataError("accuracy of an empty outcome set");
  const ConfusionCounts c = confusion(outcomes);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline double balanced_accuracy(std::span<const Outcome> outcomes) {
  return confusion(outcomes).balanced_accuracy("outcome set");
}

// |TPR_privileged - TPR_unprivileged|
inline double equal_opportunity_diff(std::span<const Outcome> outcomes) {
  const double priv =
      confusion(outcomes, Group::kPrivileged).tpr("privileged group");
  const double unpriv =
      confusion(outcomes, Group::kUnprivileged).tpr("unprivileged group");
  return std::abs(priv - unpriv);
}

enum class AverageOddsVariant {
  // |BA_privileged - BA_unprivileged|
  kBalancedAccuracyGap,
  // |((FPR_u - FPR_p) + (TPR_u - TPR_p)) / 2|, as in common fairness
  // toolkits.
  kRateGapMean,
};

inline double average_odds_diff(
    std::span<const Outcome> outcomes,
    AverageOddsVariant variant = AverageOddsVariant::kBalancedAccuracyGap) {
  const ConfusionCounts p = confusion(outcomes, Group::kPrivileged);
  const ConfusionCounts u = confusion(outcomes, Group::kUnprivileged);
  if (variant == AverageOddsVariant::kBalancedAccuracyGap) {
    return std::abs(p.balanced_accuracy("privileged group") -
                    u.balanced_accuracy("unprivileged group"));
  }
  const double fpr_gap = u.fpr("unprivileged group") - p.fpr("privileged group");
  const double tpr_gap = u.tpr("unprivileged group") - p.tpr("privileged group");
  return std::abs(0.5 * (fpr_gap + tpr_gap));
}

// Generalized entropy index with alpha = 1 over benefits
// b_i = predicted_i - truth_i + 1, using 0 * ln 0 = 0.
inline double theil_index(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) throw DataError("Theil index of an empty outcome set");
  double total = 0.0;
  for (const Outcome& o : outcomes) {
    detail::check_binary(o);
    total += o.predicted - o.truth + 1;
  }
  const double n = static_cast<double>(outcomes.size());
  const double mean = total / n;
  if (mean == 0.0) {
    throw DataError("Theil index undefined: every record is a false negative");
  }
  double sum = 0.0;
  for (const Outcome& o : outcomes) {
    const double b = o.predicted - o.truth + 1;
    if (b == 0.0) continue;
    const double r = b / mean;
    sum += r * std::log(r);
  }
  return sum / n;
}

// Model-selection score: balanced accuracy, or plain accuracy when one class
// is absent from the outcomes.
inline double selection_score(std::span<const Outcome> outcomes) {
  const ConfusionCounts c = confusion(outcomes);
  if (c.positives() == 0 || c.negatives() == 0) return accuracy(outcomes);
  return c.balanced_accuracy();
}

struct FairnessReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double equal_opportunity_diff = 0.0;
  double average_odds_diff = 0.0;
  double theil_index = 0.0;
  ConfusionCounts privileged;
  ConfusionCounts unprivileged;
};

inline FairnessReport evaluate_fairness(
    std::span<const Outcome> outcomes,
    AverageOddsVariant variant = AverageOddsVariant::kBalancedAccuracyGap) {
  FairnessReport r;
  r.accuracy = accuracy(outcomes);
  r.balanced_accuracy = balanced_accuracy(outcomes);
  r.equal_opportunity_diff = equal_opportunity_diff(outcomes);
  r.average_odds_diff = average_odds_diff(outcomes, variant);
  r.theil_index = theil_index(outcomes);
  r.privileged = confusion(outcomes, Group::kPrivileged);
  r.unprivileged = confusion(outcomes, Group::kUnprivileged);
  return r;
}

}  // namespace fairsel
