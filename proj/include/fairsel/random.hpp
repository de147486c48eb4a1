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

#include <cstdint>
#include <random>

namespace fairsel {

using RandomEngine = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent, reproducible seeds from
// a master seed and a counter.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named sub-streams so that e.g. weight initialization and mini-batch
// sampling never share an engine.
enum class Stream : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kSelection = 3,
  kSplit = 4,
  kRepetition = 5,
  kInference = 6,
  kSynthetic = 7,
  kEvaluation = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t index = 0) {
  return mix_seed(mix_seed(master ^ mix_seed(static_cast<std::uint64_t>(
                                        stream))) +
                  index);
}

inline RandomEngine make_engine(std::uint64_t master, Stream stream,
                                std::uint64_t index = 0) {
  return RandomEngine(derive_seed(master, stream, index));
}

// Uniform double in [0, 1) from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
inline double uniform01(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(RandomEngine& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace fairsel
