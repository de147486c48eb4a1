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

// Versioned JSON checkpoints for trained FAIAS and logistic models, carrying
// everything needed to encode new CSV rows the same way. Doubles are written
// in shortest round-trip form, so save/load is bit-exact.

#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fairsel/baseline.hpp"
#include "fairsel/data.hpp"
#include "fairsel/error.hpp"
#include "fairsel/faias.hpp"
#include "nlohmann/json.hpp"

namespace fairsel {

inline constexpr const char* kCheckpointFormat = "fairsel.checkpoint";
inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { kFaias, kLogistic };

inline const char* model_kind_name(ModelKind k) {
  return k == ModelKind::kFaias ? "faias" : "logistic";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "faias") return ModelKind::kFaias;
  if (s == "logistic") return ModelKind::kLogistic;
  throw DataError("unknown model kind '" + s + "'");
}

struct Checkpoint {
  ModelKind kind = ModelKind::kFaias;
  std::uint64_t seed = 0;
  // kFaias
  TrainedModel faias;
  // kLogistic
  LogisticModel logistic;
  LogisticOptions logistic_options;
  // Encoding of raw CSV rows into model inputs.
  DatasetSpec spec;
  std::vector<FeatureColumn> columns;
  Normalizer normalizer;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"alpha_theta", c.alpha_theta},
       {"alpha_phi", c.alpha_phi},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience},
       {"lambda", c.lambda},
       {"seed", c.seed},
       {"inference", c.inference.to_string()},
       {"hidden", c.hidden},
       {"mask_sensitive", c.mask_sensitive},
       {"theta_init_mean", c.theta_init_mean},
       {"theta_init_stddev", c.theta_init_stddev},
       {"selector_baseline", c.selector_baseline},
       {"baseline_decay", c.baseline_decay}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  j.at("alpha_theta").get_to(c.alpha_theta);
  j.at("alpha_phi").get_to(c.alpha_phi);
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("patience").get_to(c.patience);
  j.at("lambda").get_to(c.lambda);
  j.at("seed").get_to(c.seed);
  c.inference = InferencePolicy::parse(j.at("inference").get<std::string>());
  j.at("hidden").get_to(c.hidden);
  j.at("mask_sensitive").get_to(c.mask_sensitive);
  j.at("theta_init_mean").get_to(c.theta_init_mean);
  j.at("theta_init_stddev").get_to(c.theta_init_stddev);
  j.at("selector_baseline").get_to(c.selector_baseline);
  j.at("baseline_decay").get_to(c.baseline_decay);
}

inline void to_json(nlohmann::json& j, const LogisticOptions& o) {
  j = {{"epochs", o.epochs},
       {"learning_rate", o.learning_rate},
       {"l2", o.l2},
       {"seed", o.seed},
       {"init_stddev", o.init_stddev}};
}

inline void from_json(const nlohmann::json& j, LogisticOptions& o) {
  j.at("epochs").get_to(o.epochs);
  j.at("learning_rate").get_to(o.learning_rate);
  j.at("l2").get_to(o.l2);
  j.at("seed").get_to(o.seed);
  j.at("init_stddev").get_to(o.init_stddev);
}

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"prediction_loss", r.prediction_loss},
       {"sensitivity", r.sensitivity},
       {"validation_balanced_accuracy", r.validation_balanced_accuracy}};
}

// Non-finite values are written as null by the JSON library.
inline double nullable_double(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : v.get<double>();
}

inline void from_json(const nlohmann::json& j, EpochRecord& r) {
  j.at("epoch").get_to(r.epoch);
  r.prediction_loss = nullable_double(j.at("prediction_loss"));
  r.sensitivity = nullable_double(j.at("sensitivity"));
  r.validation_balanced_accuracy =
      nullable_double(j.at("validation_balanced_accuracy"));
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j = {{"format", kCheckpointFormat},
                      {"version", kCheckpointVersion},
                      {"kind", model_kind_name(c.kind)},
                      {"seed", c.seed},
                      {"encoder", {{"spec", c.spec}, {"columns", c.columns}}},
                      {"normalizer", c.normalizer}};
  if (c.kind == ModelKind::kFaias) {
    const TrainedModel& m = c.faias;
    j["config"] = m.config;
    j["net"] = {{"layer_sizes", m.net.layer_sizes()}, {"params", m.net.params()}};
    j["selector"] = {{"logits", m.policy.logits},
                     {"sensitive_index", m.policy.sensitive_index},
                     {"mask_sensitive", m.policy.mask_sensitive}};
    j["training"] = {{"best_epoch", m.best_epoch},
                     {"status", train_status_name(m.status)},
                     {"diagnostic", m.diagnostic},
                     {"log", m.log}};
  } else {
    j["config"] = c.logistic_options;
    j["logistic"] = {{"weights", c.logistic.weights}, {"bias", c.logistic.bias}};
  }
  return j;
}

inline TrainStatus parse_train_status(const std::string& s) {
  for (TrainStatus t : {TrainStatus::kMaxEpochs, TrainStatus::kEarlyStopped,
                        TrainStatus::kDiverged}) {
    if (s == train_status_name(t)) return t;
  }
  throw DataError("unknown training status '" + s + "'");
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    if (j.value("format", std::string{}) != kCheckpointFormat) {
      throw DataError("not a fairsel checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    c.kind = parse_model_kind(j.at("kind").get<std::string>());
    j.at("seed").get_to(c.seed);
    c.spec = j.at("encoder").at("spec").get<DatasetSpec>();
    c.columns = j.at("encoder").at("columns").get<std::vector<FeatureColumn>>();
    c.normalizer = j.at("normalizer").get<Normalizer>();
    if (c.kind == ModelKind::kFaias) {
      TrainedModel& m = c.faias;
      m.config = j.at("config").get<TrainConfig>();
      const auto& net = j.at("net");
      m.net = DenseNet(net.at("layer_sizes").get<std::vector<std::size_t>>());
      const auto params = net.at("params").get<std::vector<double>>();
      if (params.size() != m.net.num_params()) {
        throw DimensionError("checkpoint parameters", m.net.num_params(),
                             params.size());
      }
      std::copy(params.begin(), params.end(), m.net.params().begin());
      const auto& sel = j.at("selector");
      m.policy = SelectorPolicy(sel.at("logits").get<std::vector<double>>(),
                                sel.at("sensitive_index").get<std::size_t>(),
                                sel.at("mask_sensitive").get<bool>());
      const auto& tr = j.at("training");
      tr.at("best_epoch").get_to(m.best_epoch);
      m.status = parse_train_status(tr.at("status").get<std::string>());
      tr.at("diagnostic").get_to(m.diagnostic);
      m.log = tr.at("log").get<std::vector<EpochRecord>>();
      if (m.net.input_dim() != c.columns.size() ||
          m.policy.dim() != c.columns.size()) {
        throw DimensionError("checkpoint model input", c.columns.size(),
                             m.net.input_dim());
      }
    } else {
      c.logistic_options = j.at("config").get<LogisticOptions>();
      const auto& lg = j.at("logistic");
      c.logistic.weights = lg.at("weights").get<std::vector<double>>();
      c.logistic.bias = lg.at("bias").get<double>();
      if (c.logistic.dim() != c.columns.size()) {
        throw DimensionError("checkpoint model input", c.columns.size(),
                             c.logistic.dim());
      }
    }
    if (c.normalizer.dim() != c.columns.size()) {
      throw DimensionError("checkpoint normalizer", c.columns.size(),
                           c.normalizer.dim());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(c).dump(1) << '\n';
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace fairsel
