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

// fairsel command-line tool.
//
// Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure
// (diverged training, failed gradient check).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairsel/checkpoint.hpp"
#include "fairsel/diagnostics.hpp"
#include "fairsel/pipeline.hpp"

namespace fs = std::filesystem;
using namespace fairsel;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct RunArgs {
  std::string data;
  std::string spec;
  std::string out;
  std::string report_format = "json";
  std::uint64_t seed = 0;
  std::size_t reps = 5;
  double lambda = 1.0;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::string inference = "threshold05";
  double alpha_theta = 1e-4;
  double alpha_phi = 1e-4;
  std::vector<std::size_t> hidden = default_hidden_layers();
  std::string aod_variant = "balanced-accuracy-gap";
  std::size_t baseline_epochs = 2000;
  double baseline_lr = 0.5;
  double baseline_l2 = 0.0;
  std::size_t sensitivity_samples = 20;
  std::size_t threads = 0;
};

AverageOddsVariant parse_aod(const std::string& s) {
  return s == "rate-gap-mean" ? AverageOddsVariant::kRateGapMean
                              : AverageOddsVariant::kBalancedAccuracyGap;
}

void add_output_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--out", a.out,
                  "Output directory (report, checkpoints); report goes to "
                  "stdout when omitted");
  cmd->add_option("--report-format", a.report_format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--aod-variant", a.aod_variant, "Average-odds definition")
      ->check(CLI::IsMember({"balanced-accuracy-gap", "rate-gap-mean"}));
  cmd->add_option("--sensitivity-samples", a.sensitivity_samples,
                  "Selections per test example for the sensitivity estimate")
      ->check(CLI::PositiveNumber);
}

void add_run_flags(CLI::App* cmd, RunArgs& a, bool with_lambda) {
  cmd->add_option("--data", a.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--spec", a.spec, "Dataset spec JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Master seed");
  cmd->add_option("--reps", a.reps, "Random split repetitions")->check(CLI::PositiveNumber);
  if (with_lambda) {
    cmd->add_option("--lambda", a.lambda, "Sensitivity weight")->check(CLI::NonNegativeNumber);
  }
  cmd->add_option("--batch-size", a.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--max-epochs", a.max_epochs);
  cmd->add_option("--patience", a.patience)->check(CLI::PositiveNumber);
  cmd->add_option("--inference-policy", a.inference,
                  "threshold05, expected-input or mc:N");
  cmd->add_option("--alpha-theta", a.alpha_theta, "Selector learning rate")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--alpha-phi", a.alpha_phi, "Predictor learning rate")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--hidden", a.hidden, "Hidden layer widths")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  cmd->add_option("--baseline-epochs", a.baseline_epochs);
  cmd->add_option("--baseline-lr", a.baseline_lr)->check(CLI::NonNegativeNumber);
  cmd->add_option("--baseline-l2", a.baseline_l2)->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", a.threads,
                  "Concurrent repetitions (default: FAIRSEL_THREADS or all cores)");
  add_output_flags(cmd, a);
}

ExperimentConfig make_config(const RunArgs& a) {
  ExperimentConfig c;
  c.faias.alpha_theta = a.alpha_theta;
  c.faias.alpha_phi = a.alpha_phi;
  c.faias.batch_size = a.batch_size;
  c.faias.max_epochs = a.max_epochs;
  c.faias.patience = a.patience;
  c.faias.lambda = a.lambda;
  c.faias.inference = InferencePolicy::parse(a.inference);
  c.faias.hidden = a.hidden;
  c.faias.validate();
  c.logistic.epochs = a.baseline_epochs;
  c.logistic.learning_rate = a.baseline_lr;
  c.logistic.l2 = a.baseline_l2;
  c.repetitions = a.reps;
  c.master_seed = a.seed;
  c.aod_variant = parse_aod(a.aod_variant);
  c.sensitivity_samples = a.sensitivity_samples;
  c.threads = a.threads;
  return c;
}

std::string dataset_name(const DatasetSpec& spec, const std::string& path) {
  return spec.name.empty() ? fs::path(path).stem().string() : spec.name;
}

ReportContext make_context(const std::string& command, const RunArgs& a,
                           const PreparedData& data,
                           const ExperimentConfig& cfg) {
  ReportContext ctx;
  ctx.command = command;
  ctx.dataset_name = dataset_name(data.spec, a.data);
  ctx.rows = data.table.rows();
  ctx.rows_rejected_missing = data.load.rows_rejected_missing;
  ctx.columns = data.table.columns;
  ctx.sensitive_index = data.table.sensitive_index;
  ctx.config = experiment_config_json(cfg);
  return ctx;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string render(const nlohmann::json& report, const std::string& format) {
  if (format == "csv") {
    std::ostringstream s;
    write_report_csv(report, s);
    return s.str();
  }
  return report.dump(2) + "\n";
}

// Writes the report to <out>/report.<format>, or to stdout without --out.
void emit_report(const nlohmann::json& report, const RunArgs& a) {
  const std::string text = render(report, a.report_format);
  if (a.out.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / ("report." + a.report_format);
  write_text(path, text);
  std::cerr << "wrote " << path.string() << "\n";
}

void print_summary(const std::vector<MethodResult>& methods) {
  std::fprintf(stderr, "%-24s", "metric");
  for (const auto& m : methods) std::fprintf(stderr, " %22s", method_name(m.method));
  std::fprintf(stderr, "\n");
  for (std::size_t k = 0; k < kNumMetrics; ++k) {
    std::fprintf(stderr, "%-24s", kMetricNames[k]);
    for (const auto& m : methods) {
      const Summary& s = m.aggregate[k];
      char cell[64];
      if (!s.mean) {
        std::snprintf(cell, sizeof cell, "-");
      } else if (s.stddev) {
        std::snprintf(cell, sizeof cell, "%.4f +- %.4f", *s.mean, *s.stddev);
      } else {
        std::snprintf(cell, sizeof cell, "%.4f", *s.mean);
      }
      std::fprintf(stderr, " %22s", cell);
    }
    std::fprintf(stderr, "\n");
  }
}

void save_checkpoints(const std::vector<MethodResult>& methods,
                      const RunArgs& a) {
  if (a.out.empty()) return;
  const fs::path dir = fs::path(a.out) / "checkpoints";
  fs::create_directories(dir);
  for (const auto& m : methods) {
    for (const auto& r : m.repetitions) {
      save_checkpoint((dir / (std::string(method_name(m.method)) + "-rep" +
                              std::to_string(r.index) + ".json"))
                          .string(),
                      r.checkpoint);
    }
  }
}

bool any_diverged(const std::vector<MethodResult>& methods) {
  for (const auto& m : methods) {
    for (const auto& r : m.repetitions) {
      if (r.status == train_status_name(TrainStatus::kDiverged)) {
        std::cerr << "repetition " << r.index << " diverged: " << r.diagnostic
                  << "\n";
        return true;
      }
    }
  }
  return false;
}

int run_methods(const std::string& command, const RunArgs& a,
                const std::vector<Method>& methods) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = make_config(a);
  const DatasetSpec spec = load_spec(a.spec);
  const PreparedData data = load_prepared(a.data, spec);
  const auto results = run_experiment(data, cfg, methods);
  ReportContext ctx = make_context(command, a, data, cfg);
  ctx.wall_seconds = detail::seconds_since(t0);
  save_checkpoints(results, a);
  emit_report(report_json(ctx, results), a);
  print_summary(results);
  return any_diverged(results) ? kExitNumerical : 0;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw InvalidArgument("bad grid value '" + item + "'");
    grid.push_back(v);
  }
  return grid;
}

int run_tune(const RunArgs& a, const std::string& grid_text) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> grid =
      grid_text.empty() ? default_lambda_grid() : parse_grid(grid_text);
  const ExperimentConfig cfg = make_config(a);
  const DatasetSpec spec = load_spec(a.spec);
  const PreparedData data = load_prepared(a.data, spec);
  const TuneResult t = tune_lambda(data, cfg, grid);
  ReportContext ctx = make_context("tune", a, data, cfg);
  ctx.wall_seconds = detail::seconds_since(t0);
  emit_report(tune_report_json(ctx, t), a);
  std::fprintf(stderr, "%-8s %s\n", "lambda", "mean validation balanced accuracy");
  for (std::size_t g = 0; g < t.grid.size(); ++g) {
    std::fprintf(stderr, "%-8g %.4f%s\n", t.grid[g].lambda,
                 *t.grid[g].result.mean_validation_score,
                 g == t.best ? "  <- best" : "");
  }
  std::vector<MethodResult> all;
  for (const auto& g : t.grid) all.push_back(g.result);
  return any_diverged(all) ? kExitNumerical : 0;
}

int run_evaluate(const std::string& checkpoint_path, const RunArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint c = load_checkpoint(checkpoint_path);
  DatasetSpec spec = c.spec;
  if (!a.spec.empty()) spec = load_spec(a.spec);
  Checkpoint use = c;
  use.spec = spec;
  const RawTable raw = load_csv(a.data, spec);
  const Dataset data = encode_for_checkpoint(use, raw);
  const AverageOddsVariant variant = parse_aod(a.aod_variant);
  const MethodResult m =
      evaluate_checkpoint(c, data, variant, a.sensitivity_samples);
  ReportContext ctx;
  ctx.command = "evaluate";
  ctx.dataset_name = dataset_name(spec, a.data);
  ctx.rows = data.size();
  ctx.rows_rejected_missing = raw.report.rows_rejected_missing;
  ctx.columns = c.columns;
  ctx.sensitive_index = data.sensitive_index;
  ctx.config = {{"checkpoint", fs::path(checkpoint_path).filename().string()},
                {"kind", model_kind_name(c.kind)},
                {"aod_variant", aod_variant_name(variant)},
                {"sensitivity_samples", a.sensitivity_samples}};
  if (c.kind == ModelKind::kFaias) {
    ctx.config["faias"] = c.faias.config;
  } else {
    ctx.config["logistic"] = c.logistic_options;
  }
  ctx.wall_seconds = detail::seconds_since(t0);
  emit_report(report_json(ctx, {m}), a);
  print_summary({m});
  return 0;
}

struct GradcheckArgs {
  std::size_t instances = 100;
  std::size_t dims = 8;
  std::size_t samples = 200000;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double estimator_tolerance = 0.02;
  std::string fault = "none";
  std::string out;
};

nlohmann::json suite_json(const SuiteResult& s) {
  return {{"name", s.name},
          {"instances", s.instances},
          {"max_error", s.max_error},
          {"tolerance", s.tolerance},
          {"passed", s.passed},
          {"detail", s.detail}};
}

int run_gradcheck(const GradcheckArgs& g) {
  const auto t0 = std::chrono::steady_clock::now();
  Fault fault = Fault::kNone;
  if (g.fault == "flip-sensitivity") fault = Fault::kFlipSensitivityGradient;
  if (g.fault == "flip-estimator") fault = Fault::kFlipSelectorEstimate;

  GradCheckSuiteOptions opt;
  opt.instances = g.instances;
  opt.seed = g.seed;
  opt.tolerance = g.tolerance;
  opt.fault = fault;
  std::vector<SuiteResult> suites = {
      check_prediction_loss_gradients(opt), check_sensitivity_gradients(opt),
      check_composite_gradients(opt), check_logistic_gradients(opt),
      check_selector_log_prob_gradients(opt)};
  if (g.dims >= 2) {
    EstimatorSuiteOptions eo;
    eo.max_dim = g.dims;
    eo.samples = g.samples;
    eo.seed = g.seed;
    eo.tolerance = g.estimator_tolerance;
    eo.fault = fault;
    const EstimatorSuiteResult est = check_estimator(eo);
    suites.push_back(est.gated);
    suites.push_back(est.generic);
  }
  bool passed = true;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : suites) {
    passed = passed && s.passed;
    list.push_back(suite_json(s));
    std::fprintf(stderr, "%-28s %s  max error %.3g (tolerance %.3g) over %zu\n",
                 s.name.c_str(), s.passed ? "PASS" : "FAIL", s.max_error,
                 s.tolerance, s.instances);
  }
  const nlohmann::json report = {
      {"schema", "fairsel.gradcheck-report/1"},
      {"seed", g.seed},
      {"instances", g.instances},
      {"dims", g.dims},
      {"samples", g.samples},
      {"fault", g.fault},
      {"suites", list},
      {"passed", passed},
      {"wall_seconds", detail::seconds_since(t0)}};
  if (g.out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    fs::create_directories(g.out);
    write_text(fs::path(g.out) / "gradcheck.json", report.dump(2) + "\n");
  }
  return passed ? 0 : kExitNumerical;
}

struct SynthArgs {
  std::size_t n = 5000;
  double rho = 0.95;
  std::uint64_t seed = 0;
  std::size_t noise_features = 2;
  std::string out;
};

int run_synth(const SynthArgs& s) {
  SyntheticOptions opt;
  opt.noise_features = s.noise_features;
  const EncodedTable t = synth_proxy_table(s.n, s.rho, s.seed, opt);
  fs::create_directories(s.out);
  const fs::path csv = fs::path(s.out) / "synthetic.csv";
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw DataError("cannot write '" + csv.string() + "'");
  DatasetSpec spec = write_table_csv(t, out, "synthetic");
  spec.notes = "proxy correlation " + std::to_string(s.rho) + ", seed " +
               std::to_string(s.seed);
  out.close();
  write_text(fs::path(s.out) / "synthetic.json",
             nlohmann::json(spec).dump(2) + "\n");
  std::cerr << "wrote " << csv.string() << " and synthetic.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairsel: adversarial feature selection for fair classification"};
  app.require_subcommand(1);

  RunArgs train_args;
  std::string method = "faias";
  auto* train_cmd = app.add_subcommand("train", "Train over repeated random splits");
  add_run_flags(train_cmd, train_args, true);
  train_cmd->add_option("--method", method, "Model to train")
      ->check(CLI::IsMember({"faias", "logistic"}));

  RunArgs compare_args;
  auto* compare_cmd = app.add_subcommand(
      "compare", "Train FAIAS and the logistic baseline on shared splits");
  add_run_flags(compare_cmd, compare_args, true);

  RunArgs tune_args;
  std::string grid;
  auto* tune_cmd = app.add_subcommand(
      "tune", "Grid-search lambda by mean validation balanced accuracy");
  add_run_flags(tune_cmd, tune_args, false);
  tune_cmd->add_option("--grid", grid,
                       "Comma-separated lambda values (default 0,0.1,...,1)");

  RunArgs eval_args;
  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a CSV");
  eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_args.data, "CSV to evaluate on")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--spec", eval_args.spec,
                       "Override the spec stored in the checkpoint")
      ->check(CLI::ExistingFile);
  add_output_flags(eval_cmd, eval_args);

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand(
      "gradcheck", "Finite-difference and estimator self-checks");
  gc_cmd->add_option("--instances", gc.instances)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--dims", gc.dims,
                     "Largest dimension for the enumeration check (0 skips it)")
      ->check(CLI::Range(0, static_cast<int>(kMaxEnumerationDim)));
  gc_cmd->add_option("--samples", gc.samples)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--seed", gc.seed);
  gc_cmd->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--estimator-tolerance", gc.estimator_tolerance)
      ->check(CLI::PositiveNumber);
  gc_cmd->add_option("--inject-fault", gc.fault, "Test hook")
      ->check(CLI::IsMember({"none", "flip-sensitivity", "flip-estimator"}));
  gc_cmd->add_option("--out", gc.out);

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Write a synthetic proxy dataset and its spec");
  synth_cmd->add_option("--n", sy.n)->check(CLI::Range(100, 100000000));
  synth_cmd->add_option("--rho", sy.rho)->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", sy.seed);
  synth_cmd->add_option("--noise-features", sy.noise_features);
  synth_cmd->add_option("--out", sy.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) {
      return run_methods("train", train_args,
                         {method == "faias" ? Method::kFaias : Method::kLogistic});
    }
    if (*compare_cmd) {
      return run_methods("compare", compare_args,
                         {Method::kFaias, Method::kLogistic});
    }
    if (*tune_cmd) return run_tune(tune_args, grid);
    if (*eval_cmd) return run_evaluate(checkpoint, eval_args);
    if (*gc_cmd) return run_gradcheck(gc);
    if (*synth_cmd) return run_synth(sy);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
