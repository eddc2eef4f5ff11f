//
// Copyright 2026 The dperm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Command-line front end: run sweeps, calibrate noise, audit calibrations and
// compute the non-private optimum.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "dperm/bench.h"
#include "dperm/privacy.h"
#include "dperm/trainer.h"

namespace {

struct PrivacyFlags {
  double epsilon = 0.1;
  double delta = 1e-5;
  int64_t steps = 100;
  int64_t n = 1000;
  double lipschitz = 1.0;
  std::optional<double> strong_convexity;
  bool pl = false;
  double c = 1.0;
};

void AddPrivacyFlags(CLI::App* app, PrivacyFlags& f) {
  app->add_option("--epsilon", f.epsilon, "Target epsilon")->required();
  app->add_option("--delta", f.delta, "Target delta")->required();
  app->add_option("--steps,-T", f.steps, "Gradient steps T")->required();
  app->add_option("--n", f.n, "Training set size")->required();
  app->add_option("--lipschitz,-G", f.lipschitz, "Lipschitz constant G");
  auto* sc = app->add_option("--strong-convexity", f.strong_convexity,
                             "Strong convexity constant Delta");
  app->add_flag("--pl", f.pl, "Use the PL calibration (no sqrt(Delta))")->excludes(sc);
  app->add_option("--c", f.c, "Calibration constant c");
}

absl::StatusOr<dperm::NoiseScale> Calibrate(const PrivacyFlags& f) {
  absl::StatusOr<dperm::PrivacyParams> params = dperm::PrivacyParams::Create(f.epsilon, f.delta);
  if (!params.ok()) return params.status();
  dperm::CalibrationRegime regime = dperm::PlRegime{};
  if (!f.pl) {
    if (!f.strong_convexity) {
      return absl::InvalidArgumentError("pass --strong-convexity or --pl");
    }
    regime = dperm::StronglyConvexRegime{*f.strong_convexity};
  }
  return dperm::CalibrateSigma(*params, f.steps, f.n, f.lipschitz, regime, f.c);
}

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status.message() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private ERM by input perturbation"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment sweep from a spec file");
  std::string spec_path;
  std::optional<std::string> out_path;
  std::optional<std::string> format_name;
  std::optional<int64_t> workers;
  std::optional<uint64_t> seed;
  run->add_option("--spec", spec_path, "Spec file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "Output file (default: spec 'output' or stdout)");
  run->add_option("--format", format_name, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--workers", workers, "Concurrent sweep cells")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Base seed (overrides the spec)");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Print the input-perturbation variance");
  PrivacyFlags cal_flags;
  AddPrivacyFlags(calibrate, cal_flags);

  // verify-privacy
  auto* verify = app.add_subcommand("verify-privacy",
                                    "Check a calibration against the moments accountant");
  PrivacyFlags ver_flags;
  std::optional<double> c1;
  std::optional<int64_t> max_lambda;
  std::optional<double> sigma_sq;
  AddPrivacyFlags(verify, ver_flags);
  verify->add_option("--c1", c1, "Per-step moment constant (default c/8)");
  verify->add_option("--max-lambda", max_lambda, "Largest moment order");
  verify->add_option("--sigma-sq", sigma_sq, "Audit this variance instead of the calibrated one");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Print the non-private minimizer and L*");
  dperm::DatasetSource source;
  std::string data_path;
  std::string synthetic;
  std::string label = "0";
  std::string model = "lr_l2";
  double reg_lambda = 0.01;
  double tolerance = 1e-8;
  auto* data_opt = oracle->add_option("--data", data_path, "CSV file")->check(CLI::ExistingFile);
  oracle->add_option("--synthetic", synthetic, "blobs or noisy_margin")
      ->check(CLI::IsMember({"blobs", "noisy_margin"}))
      ->excludes(data_opt);
  oracle->add_option("--label", label, "Label column name or index");
  oracle->add_option("--positive", source.positive_label, "Label value mapped to +1");
  oracle->add_option("--synthetic-n", source.synthetic_n, "Synthetic rows");
  oracle->add_option("--synthetic-d", source.synthetic_d, "Synthetic features");
  oracle->add_option("--synthetic-seed", source.synthetic_seed, "Synthetic seed");
  oracle->add_option("--model", model, "lr or lr_l2")->check(CLI::IsMember({"lr", "lr_l2"}));
  oracle->add_option("--reg-lambda", reg_lambda, "L2 strength for lr_l2");
  oracle->add_option("--tolerance", tolerance, "Gradient-norm tolerance");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    absl::StatusOr<dperm::ExperimentSpec> spec = dperm::ExperimentSpec::Load(spec_path);
    if (!spec.ok()) return Fail(spec.status());
    if (out_path) spec->output = *out_path;
    if (format_name) spec->format = *dperm::ParseFormat(*format_name);
    if (workers) spec->workers = *workers;
    if (seed) spec->base_seed = *seed;
    absl::StatusOr<dperm::ResultTable> table = dperm::RunExperiment(*spec);
    if (!table.ok()) return Fail(table.status());
    if (spec->output.empty()) {
      std::cout << dperm::FormatTable(*table, spec->format);
    } else if (absl::Status s = dperm::Emit(*table, spec->format, spec->output); !s.ok()) {
      return Fail(s);
    }
    for (const dperm::ResultRow& row : table->rows) {
      if (!row.error.empty()) {
        std::cerr << "cell " << row.mechanism << " eps=" << row.epsilon << " seed=" << row.seed
                  << " failed: " << row.error << "\n";
      }
    }
    return table->has_errors() ? 2 : 0;
  }

  if (*calibrate) {
    absl::StatusOr<dperm::NoiseScale> scale = Calibrate(cal_flags);
    if (!scale.ok()) return Fail(scale.status());
    std::cout << absl::StrFormat("sigma_sq=%.17g\nsigma=%.17g\nregime=%s\nc=%.17g\n",
                                 scale->sigma_sq, std::sqrt(scale->sigma_sq),
                                 scale->strongly_convex() ? "strongly_convex" : "pl",
                                 scale->c);
    return 0;
  }

  if (*verify) {
    absl::StatusOr<dperm::NoiseScale> scale = Calibrate(ver_flags);
    if (!scale.ok()) return Fail(scale.status());
    if (sigma_sq) scale->sigma_sq = *sigma_sq;
    dperm::VerifyOptions options;
    options.c1 = c1;
    options.max_lambda = max_lambda;
    absl::StatusOr<dperm::CalibrationReport> report =
        dperm::VerifyCalibration(scale->params, *scale, options);
    if (!report.ok()) return Fail(report.status());
    std::cout << absl::StrFormat(
        "sigma_sq=%.17g\ntarget_epsilon=%.17g\nrealized_epsilon=%.17g\nbest_lambda=%d\n"
        "c1=%.17g\nmax_lambda=%d\nresult=%s\n",
        scale->sigma_sq, report->target_epsilon, report->realized_epsilon, report->best_lambda,
        report->c1, report->max_lambda, report->pass ? "pass" : "fail");
    return report->pass ? 0 : 1;
  }

  if (*oracle) {
    if (!data_path.empty()) {
      source.kind = dperm::DatasetKind::kCsv;
      source.path = data_path;
      size_t index = 0;
      if (CLI::detail::lexical_cast(label, index)) source.label_column = index;
      else source.label_column = label;
    } else if (synthetic == "noisy_margin") {
      source.kind = dperm::DatasetKind::kNoisyMargin;
    } else if (synthetic == "blobs") {
      source.kind = dperm::DatasetKind::kBlobs;
    } else {
      return Fail(absl::InvalidArgumentError("pass --data or --synthetic"));
    }
    absl::StatusOr<dperm::Dataset> data = dperm::LoadSource(source);
    if (!data.ok()) return Fail(data.status());
    absl::StatusOr<dperm::LossSpec> loss = model == "lr" ? dperm::LossSpec::Logistic()
                                                         : dperm::LossSpec::LogisticL2(reg_lambda);
    if (!loss.ok()) return Fail(loss.status());
    dperm::OracleOptions options;
    options.tolerance = tolerance;
    absl::StatusOr<dperm::OracleResult> result = dperm::OracleOptimum(*data, *loss, options);
    if (!result.ok()) return Fail(result.status());
    std::cout << absl::StrFormat("L_star=%.17g\ngradient_norm=%.17g\niterations=%d\ntheta_star=",
                                 result->objective_min, result->gradient_norm,
                                 result->iterations);
    for (Eigen::Index j = 0; j < result->theta_star.theta.size(); ++j) {
      std::cout << (j ? "," : "") << absl::StrFormat("%.17g", result->theta_star.theta[j]);
    }
    std::cout << "\n";
    if (result->certified_gap_bound) {
      std::cout << absl::StrFormat("certified_gap_bound=%.17g\n", *result->certified_gap_bound);
    }
    return 0;
  }
  return 0;
}
