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

#ifndef DPERM_BENCH_H_
#define DPERM_BENCH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dperm/data.h"
#include "dperm/losses.h"
#include "dperm/mechanisms.h"
#include "dperm/trainer.h"

namespace dperm {

enum class DatasetKind { kCsv, kBlobs, kNoisyMargin };

struct DatasetSource {
  DatasetKind kind = DatasetKind::kBlobs;
  std::string path;
  LabelColumn label_column = size_t{0};
  std::string positive_label;
  size_t synthetic_n = 500;
  size_t synthetic_d = 10;
  uint64_t synthetic_seed = 1;
  double flip_probability = 0.1;
};

// Loads (or generates) and normalizes the dataset.
absl::StatusOr<Dataset> LoadSource(const DatasetSource& source);

enum class OutputFormat { kCsv, kJson };

// Default privacy budgets, spanning 0.01 to 0.25.
std::vector<double> DefaultEpsilonGrid();

// A declarative sweep. Text form: one `key = value` per line, `#` comments.
// See README.md for the key list.
struct ExperimentSpec {
  DatasetSource dataset;
  std::string model = "lr_l2";  // lr | lr_l2 | mlp
  double reg_lambda = 0.01;
  double mlp_lipschitz = 1.0;
  double mlp_smoothness = 1.0;
  std::vector<Mechanism> mechanisms = {Mechanism{MechanismKind::kInput}};
  std::vector<double> epsilon_grid = DefaultEpsilonGrid();
  // Empty means 1/n^2 for the training set size n.
  std::optional<double> delta;
  int64_t repetitions = 1;
  uint64_t base_seed = 0;
  TrainConfig train;
  // Empty means 1/reg_lambda for lr_l2 (which contains the minimizer), else 10.
  std::optional<double> radius;
  bool grid_search = false;
  double test_fraction = 0.2;
  double c = 1.0;
  NoiseLayout noise_layout = NoiseLayout::kPerInstance;
  double oracle_tolerance = 1e-8;
  int64_t workers = 1;
  bool record_wall_time = false;
  std::string output;
  OutputFormat format = OutputFormat::kCsv;

  absl::Status Validate() const;
  // Hidden width for mlp equals `input_dim`.
  absl::StatusOr<LossSpec> BuildLoss(size_t input_dim = 1) const;

  // Relative dataset paths resolve against `base_dir` when non-empty.
  static absl::StatusOr<ExperimentSpec> Parse(const std::string& text,
                                              const std::string& base_dir = "");
  static absl::StatusOr<ExperimentSpec> Load(const std::string& path);
};

struct ResultRow {
  std::string mechanism;
  double epsilon = 0.0;  // +inf for the non-private reference
  uint64_t seed = 0;
  double accuracy = 0.0;
  double opt_gap = 0.0;
  // Gap on the objective the mechanism trained on (perturbed data for input,
  // perturbed objective for objective); equals opt_gap otherwise.
  double opt_gap_perturbed = 0.0;
  std::optional<double> realized_epsilon;
  double wall_ms = 0.0;
  // Set when the cell failed; numeric fields are then NaN.
  std::string error;
};

struct Aggregate {
  std::string mechanism;
  double epsilon = 0.0;
  int64_t count = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double opt_gap_mean = 0.0;
  double opt_gap_std = 0.0;
  double opt_gap_perturbed_mean = 0.0;
  double opt_gap_perturbed_std = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<Aggregate> aggregates;

  // Mean and sample standard deviation per (mechanism, epsilon), in order of
  // first appearance; failed rows are skipped.
  void RecomputeAggregates();
  bool has_errors() const;
};

absl::StatusOr<ResultTable> RunExperiment(const ExperimentSpec& spec);

inline constexpr char kCsvHeader[] =
    "mechanism,epsilon,seed,accuracy,opt_gap,opt_gap_perturbed,realized_epsilon,wall_ms";

std::string FormatTable(const ResultTable& table, OutputFormat format);
absl::Status Emit(const ResultTable& table, OutputFormat format, const std::string& path);
absl::StatusOr<ResultTable> ParseTable(const std::string& text, OutputFormat format);
absl::StatusOr<OutputFormat> ParseFormat(absl::string_view name);

}  // namespace dperm

#endif  // DPERM_BENCH_H_
