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

// Repeated-split experiments: every repetition derives its own seed from the
// master seed, splits the data once and trains each requested method on that
// split. Results are folded in repetition order, so reports do not depend on
// how many threads ran them.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "fairsel/baseline.hpp"
#include "fairsel/checkpoint.hpp"
#include "fairsel/data.hpp"
#include "fairsel/faias.hpp"
#include "fairsel/metrics.hpp"
#include "nlohmann/json.hpp"

namespace fairsel {

inline constexpr const char* kReportSchema = "fairsel.run-report/1";

enum class Method { kFaias, kLogistic };

inline const char* method_name(Method m) {
  return m == Method::kFaias ? "faias" : "logistic";
}

enum Metric : std::size_t {
  kAccuracy,
  kBalancedAccuracy,
  kEqualOpportunityDiff,
  kAverageOddsDiff,
  kTheilIndex,
  kSensitivity,
  kNumMetrics,
};

inline constexpr std::array<const char*, kNumMetrics> kMetricNames = {
    "accuracy",          "balanced_accuracy", "equal_opportunity_diff",
    "average_odds_diff", "theil_index",       "sensitivity"};

// A metric is absent when it is undefined on the data (e.g. a group without
// positives) or does not apply to the method.
using MetricValues = std::array<std::optional<double>, kNumMetrics>;

struct ExperimentConfig {
  TrainConfig faias;
  LogisticOptions logistic;
  std::size_t repetitions = 5;
  std::uint64_t master_seed = 0;
  AverageOddsVariant aod_variant = AverageOddsVariant::kBalancedAccuracyGap;
  // Monte-Carlo selections per test example for the sensitivity estimate.
  std::size_t sensitivity_samples = 20;
  // Upper bound on concurrent repetitions; 0 = FAIRSEL_THREADS or hardware.
  std::size_t threads = 0;
};

struct RepetitionResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::string split_fingerprint;
  MetricValues test{};
  // Absent when the model is evaluated on data without a validation split.
  std::optional<double> validation_score;
  std::vector<std::string> warnings;
  // FAIAS only.
  std::vector<double> selection_probabilities;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::string status;
  std::string diagnostic;
  double wall_seconds = 0.0;
  Checkpoint checkpoint;
};

struct Summary {
  std::optional<double> mean;
  // Sample standard deviation (n - 1); absent for fewer than two values.
  std::optional<double> stddev;
  std::size_t count = 0;
};

struct MethodResult {
  Method method = Method::kFaias;
  std::vector<RepetitionResult> repetitions;
  std::array<Summary, kNumMetrics> aggregate{};
  std::optional<double> mean_validation_score;
};

inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  s.mean = mean;
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

inline void aggregate(MethodResult& m) {
  std::vector<double> scores;
  for (std::size_t k = 0; k < kNumMetrics; ++k) {
    std::vector<double> values;
    for (const auto& r : m.repetitions) {
      if (r.test[k]) values.push_back(*r.test[k]);
    }
    m.aggregate[k] = summarize(values);
  }
  for (const auto& r : m.repetitions) {
    if (r.validation_score) scores.push_back(*r.validation_score);
  }
  m.mean_validation_score = summarize(scores).mean;
}

// Every metric that is defined on the outcomes; undefined ones are noted.
inline MetricValues evaluate_metrics(std::span<const Outcome> outcomes,
                                     AverageOddsVariant variant,
                                     std::vector<std::string>& warnings) {
  MetricValues v{};
  auto attempt = [&](Metric m, auto&& fn) {
    try {
      v[m] = fn();
    } catch (const DataError& e) {
      warnings.push_back(std::string(kMetricNames[m]) + ": " + e.what());
    }
  };
  attempt(kAccuracy, [&] { return accuracy(outcomes); });
  attempt(kBalancedAccuracy, [&] { return balanced_accuracy(outcomes); });
  attempt(kEqualOpportunityDiff, [&] { return equal_opportunity_diff(outcomes); });
  attempt(kAverageOddsDiff, [&] { return average_odds_diff(outcomes, variant); });
  attempt(kTheilIndex, [&] { return theil_index(outcomes); });
  return v;
}

// FNV-1a over the split indices; equal fingerprints mean equal splits.
inline std::string split_fingerprint(const SplitIndices& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    mix(part->size());
    for (std::size_t i : *part) mix(i);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t repetition_seed(std::uint64_t master, std::size_t r) {
  return derive_seed(master, Stream::kRepetition, r);
}

struct PreparedData {
  DatasetSpec spec;
  EncodedTable table;
  LoadReport load;
};

inline PreparedData prepare_data(const RawTable& raw, const DatasetSpec& spec) {
  PreparedData p;
  p.spec = spec;
  p.table = Encoder::fit(raw, spec).encode(raw);
  p.load = raw.report;
  return p;
}

inline PreparedData load_prepared(const std::string& csv_path,
                                  const DatasetSpec& spec) {
  return prepare_data(load_csv(csv_path, spec), spec);
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

inline RepetitionResult run_method(Method method, const PreparedData& data,
                                   const SplitData& parts,
                                   const ExperimentConfig& cfg, std::size_t r,
                                   std::uint64_t seed, double lambda) {
  const auto t0 = std::chrono::steady_clock::now();
  RepetitionResult out;
  out.index = r;
  out.seed = seed;
  out.train_size = parts.train.size();
  out.validation_size = parts.validation.size();
  out.test_size = parts.test.size();
  out.split_fingerprint = split_fingerprint(parts.indices);
  out.checkpoint.seed = seed;
  out.checkpoint.spec = data.spec;
  out.checkpoint.columns = data.table.columns;
  out.checkpoint.normalizer = parts.train.normalizer;

  if (method == Method::kFaias) {
    TrainConfig tc = cfg.faias;
    tc.seed = seed;
    tc.lambda = lambda;
    TrainedModel model = train(parts.train, parts.validation, tc);
    out.validation_score =
        selection_score(model_outcomes(model, parts.validation));
    out.test = evaluate_metrics(model_outcomes(model, parts.test),
                                cfg.aod_variant, out.warnings);
    out.test[kSensitivity] =
        mean_sensitivity(model.net, model.policy, parts.test,
                         cfg.sensitivity_samples, seed);
    out.selection_probabilities = probabilities(model.policy);
    out.best_epoch = model.best_epoch;
    out.epochs_run = model.log.size();
    out.status = train_status_name(model.status);
    out.diagnostic = model.diagnostic;
    out.checkpoint.kind = ModelKind::kFaias;
    out.checkpoint.faias = std::move(model);
  } else {
    LogisticOptions lo = cfg.logistic;
    lo.seed = seed;
    const LogisticFit fit = train_logistic(parts.train, parts.validation, lo);
    out.validation_score = fit.best_validation_score;
    out.test = evaluate_metrics(logistic_outcomes(fit.model, parts.test),
                                cfg.aod_variant, out.warnings);
    out.best_epoch = fit.best_epoch;
    out.epochs_run = lo.epochs;
    out.checkpoint.kind = ModelKind::kLogistic;
    out.checkpoint.logistic = fit.model;
    out.checkpoint.logistic_options = lo;
  }
  out.wall_seconds = seconds_since(t0);
  return out;
}

}  // namespace detail

inline std::size_t thread_budget(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("FAIRSEL_THREADS")) {
      char* end = nullptr;
      const unsigned long v = std::strtoul(env, &end, 10);
      if (end != env && *end == '\0' && v > 0) n = v;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs) on up to `threads` workers. The first
// exception (lowest job index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// All methods share the split of each repetition.
inline std::vector<MethodResult> run_experiment(
    const PreparedData& data, const ExperimentConfig& cfg,
    const std::vector<Method>& methods) {
  if (cfg.repetitions == 0) throw InvalidArgument("need at least 1 repetition");
  std::vector<MethodResult> results(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    results[m].method = methods[m];
    results[m].repetitions.resize(cfg.repetitions);
  }
  parallel_for(cfg.repetitions, thread_budget(cfg.threads, cfg.repetitions),
               [&](std::size_t r) {
                 const std::uint64_t seed = repetition_seed(cfg.master_seed, r);
                 const SplitData parts = split(data.table, seed);
                 for (std::size_t m = 0; m < methods.size(); ++m) {
                   results[m].repetitions[r] = detail::run_method(
                       methods[m], data, parts, cfg, r, seed, cfg.faias.lambda);
                 }
               });
  for (auto& m : results) aggregate(m);
  return results;
}

struct GridPoint {
  double lambda = 0.0;
  MethodResult result;
};

struct TuneResult {
  std::vector<GridPoint> grid;
  std::size_t best = 0;
};

inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

// Mean scores closer than this are ties. Equal rates reached through
// different sums can differ in the last bit.
inline constexpr double kScoreTieTolerance = 1e-12;

// Index of the highest score; ties go to the smaller lambda.
inline std::size_t best_grid_index(const std::vector<double>& lambdas,
                                   const std::vector<double>& scores) {
  if (lambdas.empty() || lambdas.size() != scores.size()) {
    throw InvalidArgument("grid and scores must be non-empty and equal length");
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < lambdas.size(); ++g) {
    const double s = scores[g], b = scores[best];
    if (s > b + kScoreTieTolerance ||
        (std::fabs(s - b) <= kScoreTieTolerance && lambdas[g] < lambdas[best])) {
      best = g;
    }
  }
  return best;
}

// Picks the lambda with the highest mean validation balanced accuracy.
inline TuneResult tune_lambda(const PreparedData& data,
                              const ExperimentConfig& cfg,
                              const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidArgument("tuning grid is empty");
  for (double l : grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw InvalidArgument("grid values must be finite and >= 0");
    }
  }
  TuneResult out;
  out.grid.resize(grid.size());
  const std::size_t jobs = grid.size() * cfg.repetitions;
  std::vector<RepetitionResult> flat(jobs);
  parallel_for(jobs, thread_budget(cfg.threads, jobs), [&](std::size_t job) {
    const std::size_t g = job / cfg.repetitions;
    const std::size_t r = job % cfg.repetitions;
    const std::uint64_t seed = repetition_seed(cfg.master_seed, r);
    const SplitData parts = split(data.table, seed);
    flat[job] = detail::run_method(Method::kFaias, data, parts, cfg, r, seed,
                                   grid[g]);
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.grid[g].lambda = grid[g];
    out.grid[g].result.method = Method::kFaias;
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      out.grid[g].result.repetitions.push_back(
          std::move(flat[g * cfg.repetitions + r]));
    }
    aggregate(out.grid[g].result);
  }
  std::vector<double> scores;
  for (const auto& g : out.grid) scores.push_back(*g.result.mean_validation_score);
  out.best = best_grid_index(grid, scores);
  return out;
}

// Encodes raw rows exactly as the checkpointed model saw its training data.
inline Dataset encode_for_checkpoint(const Checkpoint& c, const RawTable& raw) {
  const EncodedTable t = Encoder(c.spec, c.columns).encode(raw);
  return materialize(t, all_rows(t.rows()), c.normalizer);
}

// All metrics of a checkpointed model on `data`, as a single repetition.
inline MethodResult evaluate_checkpoint(const Checkpoint& c,
                                        const Dataset& data,
                                        AverageOddsVariant variant,
                                        std::size_t sensitivity_samples) {
  if (data.size() == 0) throw DataError("evaluation data is empty");
  const auto t0 = std::chrono::steady_clock::now();
  MethodResult m;
  RepetitionResult r;
  r.seed = c.seed;
  r.test_size = data.size();
  if (c.kind == ModelKind::kFaias) {
    m.method = Method::kFaias;
    r.test = evaluate_metrics(model_outcomes(c.faias, data), variant, r.warnings);
    r.test[kSensitivity] = mean_sensitivity(c.faias.net, c.faias.policy, data,
                                            sensitivity_samples, c.seed);
    r.selection_probabilities = probabilities(c.faias.policy);
    r.best_epoch = c.faias.best_epoch;
    r.epochs_run = c.faias.log.size();
    r.status = train_status_name(c.faias.status);
    r.diagnostic = c.faias.diagnostic;
  } else {
    m.method = Method::kLogistic;
    r.test = evaluate_metrics(logistic_outcomes(c.logistic, data), variant,
                              r.warnings);
  }
  r.wall_seconds = detail::seconds_since(t0);
  m.repetitions.push_back(std::move(r));
  aggregate(m);
  return m;
}

// ---------------------------------------------------------------------------
// Reports.

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json metrics_json(const MetricValues& v) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumMetrics; ++k) {
    j[kMetricNames[k]] = optional_json(v[k]);
  }
  return j;
}

inline nlohmann::json repetition_json(const RepetitionResult& r, Method m,
                                      const std::vector<FeatureColumn>& cols) {
  nlohmann::json j = {
      {"index", r.index},
      {"seed", r.seed},
      {"split",
       {{"train", r.train_size},
        {"validation", r.validation_size},
        {"test", r.test_size},
        {"fingerprint", r.split_fingerprint}}},
      {"test_metrics", metrics_json(r.test)},
      {"validation_score", optional_json(r.validation_score)},
      {"best_epoch", r.best_epoch},
      {"epochs_run", r.epochs_run},
      {"warnings", r.warnings},
      {"wall_seconds", r.wall_seconds}};
  if (m == Method::kFaias) {
    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t c = 0; c < r.selection_probabilities.size(); ++c) {
      probs.push_back({{"feature", cols.at(c).name},
                       {"probability", r.selection_probabilities[c]}});
    }
    j["selection_probabilities"] = probs;
    j["status"] = r.status;
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  }
  return j;
}

inline nlohmann::json method_json(const MethodResult& m,
                                  const std::vector<FeatureColumn>& cols) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : m.repetitions) reps.push_back(repetition_json(r, m.method, cols));
  nlohmann::json agg = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumMetrics; ++k) {
    const Summary& s = m.aggregate[k];
    agg[kMetricNames[k]] = {{"mean", optional_json(s.mean)},
                            {"std", optional_json(s.stddev)},
                            {"n", s.count}};
  }
  return {{"method", method_name(m.method)},
          {"repetitions", reps},
          {"aggregate", agg},
          {"mean_validation_score", optional_json(m.mean_validation_score)}};
}

struct ReportContext {
  std::string command;
  std::string dataset_name;
  std::size_t rows = 0;
  std::size_t rows_rejected_missing = 0;
  std::vector<FeatureColumn> columns;
  std::size_t sensitive_index = 0;
  nlohmann::json config = nlohmann::json::object();
  double wall_seconds = 0.0;
};

inline const char* aod_variant_name(AverageOddsVariant v) {
  return v == AverageOddsVariant::kBalancedAccuracyGap ? "balanced-accuracy-gap"
                                                       : "rate-gap-mean";
}

inline nlohmann::json experiment_config_json(const ExperimentConfig& c) {
  return {{"faias", c.faias},
          {"logistic", c.logistic},
          {"repetitions", c.repetitions},
          {"master_seed", c.master_seed},
          {"aod_variant", aod_variant_name(c.aod_variant)},
          {"sensitivity_samples", c.sensitivity_samples}};
}

inline nlohmann::json report_json(const ReportContext& ctx,
                                  const std::vector<MethodResult>& methods) {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& c : ctx.columns) names.push_back(c.name);
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : methods) ms.push_back(method_json(m, ctx.columns));
  return {{"schema", kReportSchema},
          {"command", ctx.command},
          {"dataset",
           {{"name", ctx.dataset_name},
            {"rows", ctx.rows},
            {"rows_rejected_missing", ctx.rows_rejected_missing},
            {"features", ctx.columns.size()},
            {"feature_names", names},
            {"sensitive_feature", ctx.columns.empty()
                                      ? std::string{}
                                      : ctx.columns.at(ctx.sensitive_index).name}}},
          {"config", ctx.config},
          {"methods", ms},
          {"wall_seconds", ctx.wall_seconds}};
}

inline nlohmann::json tune_report_json(const ReportContext& ctx,
                                       const TuneResult& t) {
  std::vector<MethodResult> none;
  nlohmann::json j = report_json(ctx, none);
  nlohmann::json grid = nlohmann::json::array();
  for (std::size_t g = 0; g < t.grid.size(); ++g) {
    nlohmann::json e = method_json(t.grid[g].result, ctx.columns);
    e["lambda"] = t.grid[g].lambda;
    e["best"] = g == t.best;
    grid.push_back(std::move(e));
  }
  j["grid"] = grid;
  j["best_lambda"] = t.grid.at(t.best).lambda;
  return j;
}

// Long-format CSV: one row per (method, lambda, repetition, metric), with
// "mean" and "std" rows for the aggregates.
inline void write_report_csv(const nlohmann::json& report, std::ostream& out) {
  out << "method,lambda,repetition,metric,value\n";
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::string{} : v.dump();
  };
  auto emit = [&](const nlohmann::json& m, const std::string& lambda) {
    const std::string method = m.at("method").get<std::string>();
    for (const auto& r : m.at("repetitions")) {
      for (const auto& [k, v] : r.at("test_metrics").items()) {
        out << method << ',' << lambda << ',' << r.at("index").get<std::size_t>()
            << ',' << k << ',' << num(v) << '\n';
      }
    }
    for (const auto& [k, v] : m.at("aggregate").items()) {
      out << method << ',' << lambda << ",mean," << k << ',' << num(v.at("mean")) << '\n';
      out << method << ',' << lambda << ",std," << k << ',' << num(v.at("std")) << '\n';
    }
  };
  for (const auto& m : report.at("methods")) emit(m, "");
  if (report.contains("grid")) {
    for (const auto& g : report.at("grid")) emit(g, g.at("lambda").dump());
  }
}

}  // namespace fairsel
