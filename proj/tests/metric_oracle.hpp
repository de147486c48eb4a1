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

#pragma once

#include <cmath>

#include "fairsel/metrics.hpp"

namespace fairsel::testing {

// Brute-force recomputation: tallies a 2x2x2 (group, truth, prediction)
// table and evaluates every metric from it in long double. Theil uses the
// grouped form sum_v (n_v / n)(v / mu) ln(v / mu) over benefit values v.
struct OracleMetrics {
  long double accuracy = 0, balanced_accuracy = 0, eod = 0, aod = 0, theil = 0;
  bool has_ba = false, has_eod = false, has_aod = false, has_theil = false;
};

inline OracleMetrics oracle_metrics(std::span<const Outcome> outcomes) {
  long double table[2][2][2] = {};
  long double benefit_count[3] = {};
  for (const Outcome& o : outcomes) {
    table[o.group == Group::kPrivileged][o.truth][o.predicted] += 1;
    benefit_count[o.predicted - o.truth + 1] += 1;
  }
  auto cell = [&](int g, int t, int p) {
    return g < 0 ? table[0][t][p] + table[1][t][p] : table[g][t][p];
  };
  auto tpr = [&](int g) { return cell(g, 1, 1) / (cell(g, 1, 1) + cell(g, 1, 0)); };
  auto tnr = [&](int g) { return cell(g, 0, 0) / (cell(g, 0, 0) + cell(g, 0, 1)); };
  auto pos = [&](int g) { return cell(g, 1, 1) + cell(g, 1, 0) > 0; };
  auto neg = [&](int g) { return cell(g, 0, 0) + cell(g, 0, 1) > 0; };

  OracleMetrics m;
  const long double n = static_cast<long double>(outcomes.size());
  m.accuracy = (cell(-1, 1, 1) + cell(-1, 0, 0)) / n;
  m.has_ba = pos(-1) && neg(-1);
  if (m.has_ba) m.balanced_accuracy = (tpr(-1) + tnr(-1)) / 2;
  m.has_eod = pos(0) && pos(1);
  if (m.has_eod) m.eod = std::fabs(tpr(1) - tpr(0));
  m.has_aod = m.has_eod && neg(0) && neg(1);
  if (m.has_aod) {
    m.aod = std::fabs((tpr(1) + tnr(1)) / 2 - (tpr(0) + tnr(0)) / 2);
  }
  const long double mu = (benefit_count[1] + 2 * benefit_count[2]) / n;
  m.has_theil = mu > 0;
  for (int v = 1; v <= 2 && m.has_theil; ++v) {
    if (benefit_count[v] > 0) {
      m.theil += benefit_count[v] / n * (v / mu) * std::log(v / mu);
    }
  }
  return m;
}

}  // namespace fairsel::testing
