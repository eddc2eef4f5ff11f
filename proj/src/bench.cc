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

#include "dperm/bench.h"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <variant>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "dperm/privacy.h"
#include "dperm/rng.h"
#include "dperm/status_macros.h"
#include "json.hpp"

namespace dperm {

std::vector<double> DefaultEpsilonGrid() {
  return {0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.25};
}

absl::StatusOr<Dataset> LoadSource(const DatasetSource& source) {
  switch (source.kind) {
    case DatasetKind::kCsv: {
      ASSIGN_OR_RETURN(Dataset raw,
                       LoadCsv(source.path, source.label_column, source.positive_label));
      return Normalize(raw);
    }
    case DatasetKind::kBlobs:
      return MakeSeparableBlobs(source.synthetic_n, source.synthetic_d, source.synthetic_seed);
    case DatasetKind::kNoisyMargin:
      return MakeNoisyMargin(source.synthetic_n, source.synthetic_d, source.synthetic_seed,
                             source.flip_probability);
  }
  return absl::InvalidArgumentError("unknown dataset kind");
}

absl::StatusOr<OutputFormat> ParseFormat(absl::string_view name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json") return OutputFormat::kJson;
  return absl::InvalidArgumentError(absl::StrCat("unknown format '", name, "'"));
}

absl::Status ExperimentSpec::Validate() const {
  if (epsilon_grid.empty()) return absl::InvalidArgumentError("epsilon_grid is empty");
  for (size_t k = 0; k < epsilon_grid.size(); ++k) {
    if (!(epsilon_grid[k] > 0.0)) {
      return absl::InvalidArgumentError("epsilon_grid entries must be > 0");
    }
    if (k > 0 && !(epsilon_grid[k] > epsilon_grid[k - 1])) {
      return absl::InvalidArgumentError("epsilon_grid must be strictly ascending");
    }
  }
  if (delta && !(*delta > 0.0 && *delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0,1)");
  }
  if (repetitions < 1) return absl::InvalidArgumentError("repetitions must be >= 1");
  if (workers < 1) return absl::InvalidArgumentError("workers must be >= 1");
  if (!(c > 0.0)) return absl::InvalidArgumentError("c must be > 0");
  if (radius && !(*radius > 0.0)) return absl::InvalidArgumentError("radius must be > 0");
  if (mechanisms.empty()) return absl::InvalidArgumentError("mechanisms is empty");
  RETURN_IF_ERROR(train.Validate());
  return BuildLoss().status();
}

absl::StatusOr<LossSpec> ExperimentSpec::BuildLoss(size_t input_dim) const {
  if (model == "lr") return LossSpec::Logistic();
  if (model == "lr_l2") return LossSpec::LogisticL2(reg_lambda);
  if (model == "mlp") {
    return LossSpec::Mlp(input_dim, mlp_lipschitz, mlp_smoothness);
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown model '", model, "'"));
}

namespace {

absl::StatusOr<double> ParseDouble(absl::string_view key, absl::string_view v) {
  double out = 0.0;
  if (!absl::SimpleAtod(v, &out)) {
    return absl::InvalidArgumentError(absl::StrCat(key, ": '", v, "' is not a number"));
  }
  return out;
}

absl::StatusOr<int64_t> ParseInt(absl::string_view key, absl::string_view v) {
  int64_t out = 0;
  if (!absl::SimpleAtoi(v, &out)) {
    return absl::InvalidArgumentError(absl::StrCat(key, ": '", v, "' is not an integer"));
  }
  return out;
}

absl::StatusOr<uint64_t> ParseUint(absl::string_view key, absl::string_view v) {
  uint64_t out = 0;
  if (!absl::SimpleAtoi(v, &out)) {
    return absl::InvalidArgumentError(absl::StrCat(key, ": '", v, "' is not an unsigned integer"));
  }
  return out;
}

absl::StatusOr<bool> ParseBool(absl::string_view key, absl::string_view v) {
  bool out = false;
  if (!absl::SimpleAtob(v, &out)) {
    return absl::InvalidArgumentError(absl::StrCat(key, ": '", v, "' is not a boolean"));
  }
  return out;
}

std::vector<absl::string_view> SplitList(absl::string_view v) {
  std::vector<absl::string_view> out;
  for (absl::string_view item : absl::StrSplit(v, ',', absl::SkipWhitespace())) {
    out.push_back(absl::StripAsciiWhitespace(item));
  }
  return out;
}

}  // namespace

absl::StatusOr<ExperimentSpec> ExperimentSpec::Parse(const std::string& text,
                                                     const std::string& base_dir) {
  ExperimentSpec spec;
  bool init_given = false;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    absl::string_view line = raw;
    if (size_t hash = line.find('#'); hash != absl::string_view::npos) line = line.substr(0, hash);
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("spec line ", line_no, ": expected key = value"));
    }
    const std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    const absl::string_view value = absl::StripAsciiWhitespace(line.substr(eq + 1));

    if (key == "dataset") {
      if (value == "csv") spec.dataset.kind = DatasetKind::kCsv;
      else if (value == "blobs") spec.dataset.kind = DatasetKind::kBlobs;
      else if (value == "noisy_margin") spec.dataset.kind = DatasetKind::kNoisyMargin;
      else return absl::InvalidArgumentError(absl::StrCat("dataset: unknown kind '", value, "'"));
    } else if (key == "path") {
      std::filesystem::path p{std::string(value)};
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      spec.dataset.path = p.string();
    } else if (key == "label_column") {
      size_t index = 0;
      if (absl::SimpleAtoi(value, &index)) spec.dataset.label_column = index;
      else spec.dataset.label_column = std::string(value);
    } else if (key == "positive_label") {
      spec.dataset.positive_label = std::string(value);
    } else if (key == "synthetic_n") {
      ASSIGN_OR_RETURN(spec.dataset.synthetic_n, ParseUint(key, value));
    } else if (key == "synthetic_d") {
      ASSIGN_OR_RETURN(spec.dataset.synthetic_d, ParseUint(key, value));
    } else if (key == "synthetic_seed") {
      ASSIGN_OR_RETURN(spec.dataset.synthetic_seed, ParseUint(key, value));
    } else if (key == "flip_probability") {
      ASSIGN_OR_RETURN(spec.dataset.flip_probability, ParseDouble(key, value));
    } else if (key == "model") {
      spec.model = std::string(value);
    } else if (key == "reg_lambda") {
      ASSIGN_OR_RETURN(spec.reg_lambda, ParseDouble(key, value));
    } else if (key == "mlp_lipschitz") {
      ASSIGN_OR_RETURN(spec.mlp_lipschitz, ParseDouble(key, value));
    } else if (key == "mlp_smoothness") {
      ASSIGN_OR_RETURN(spec.mlp_smoothness, ParseDouble(key, value));
    } else if (key == "mechanisms") {
      spec.mechanisms.clear();
      for (absl::string_view name : SplitList(value)) {
        ASSIGN_OR_RETURN(Mechanism m, Mechanism::Parse(name));
        spec.mechanisms.push_back(m);
      }
    } else if (key == "epsilon_grid") {
      spec.epsilon_grid.clear();
      for (absl::string_view item : SplitList(value)) {
        ASSIGN_OR_RETURN(double e, ParseDouble(key, item));
        spec.epsilon_grid.push_back(e);
      }
    } else if (key == "delta") {
      if (value == "auto") {
        spec.delta.reset();
      } else {
        ASSIGN_OR_RETURN(double d, ParseDouble(key, value));
        spec.delta = d;
      }
    } else if (key == "repetitions") {
      ASSIGN_OR_RETURN(spec.repetitions, ParseInt(key, value));
    } else if (key == "base_seed") {
      ASSIGN_OR_RETURN(spec.base_seed, ParseUint(key, value));
    } else if (key == "steps") {
      ASSIGN_OR_RETURN(spec.train.steps, ParseInt(key, value));
    } else if (key == "learning_rate") {
      ASSIGN_OR_RETURN(spec.train.learning_rate, ParseDouble(key, value));
    } else if (key == "radius") {
      if (value == "auto") {
        spec.radius.reset();
      } else {
        ASSIGN_OR_RETURN(double r, ParseDouble(key, value));
        spec.radius = r;
      }
    } else if (key == "init") {
      init_given = true;
      if (value == "zeros") spec.train.init = InitKind::kZeros;
      else if (value == "gaussian") spec.train.init = InitKind::kGaussian;
      else return absl::InvalidArgumentError(absl::StrCat("init: unknown '", value, "'"));
    } else if (key == "init_scale") {
      ASSIGN_OR_RETURN(spec.train.init_scale, ParseDouble(key, value));
    } else if (key == "grid_search") {
      ASSIGN_OR_RETURN(spec.grid_search, ParseBool(key, value));
    } else if (key == "test_fraction") {
      ASSIGN_OR_RETURN(spec.test_fraction, ParseDouble(key, value));
    } else if (key == "c") {
      ASSIGN_OR_RETURN(spec.c, ParseDouble(key, value));
    } else if (key == "noise_layout") {
      if (value == "per_instance") spec.noise_layout = NoiseLayout::kPerInstance;
      else if (value == "shared") spec.noise_layout = NoiseLayout::kShared;
      else return absl::InvalidArgumentError(absl::StrCat("noise_layout: unknown '", value, "'"));
    } else if (key == "oracle_tolerance") {
      ASSIGN_OR_RETURN(spec.oracle_tolerance, ParseDouble(key, value));
    } else if (key == "workers") {
      ASSIGN_OR_RETURN(spec.workers, ParseInt(key, value));
    } else if (key == "timing") {
      ASSIGN_OR_RETURN(spec.record_wall_time, ParseBool(key, value));
    } else if (key == "output") {
      spec.output = std::string(value);
    } else if (key == "format") {
      ASSIGN_OR_RETURN(spec.format, ParseFormat(value));
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("spec line ", line_no, ": unknown key '", key, "'"));
    }
  }
  // Zero init leaves every hidden unit identical.
  if (spec.model == "mlp" && !init_given) spec.train.init = InitKind::kGaussian;
  RETURN_IF_ERROR(spec.Validate());
  return spec;
}

absl::StatusOr<ExperimentSpec> ExperimentSpec::Load(const std::string& path) {
  std::ifstream file(path);
  if (!file) return absl::NotFoundError(absl::StrCat("cannot open spec '", path, "'"));
  std::ostringstream buf;
  buf << file.rdbuf();
  return Parse(buf.str(), std::filesystem::path(path).parent_path().string());
}

void ResultTable::RecomputeAggregates() {
  aggregates.clear();
  // Keyed by first-appearance order of (mechanism, epsilon).
  std::vector<std::vector<const ResultRow*>> groups;
  std::map<std::pair<std::string, double>, size_t> index;
  for (const ResultRow& row : rows) {
    if (!row.error.empty()) continue;
    auto [it, inserted] = index.try_emplace({row.mechanism, row.epsilon}, groups.size());
    if (inserted) {
      groups.emplace_back();
      aggregates.push_back(Aggregate{row.mechanism, row.epsilon});
    }
    groups[it->second].push_back(&row);
  }
  auto mean_std = [](const std::vector<const ResultRow*>& g, double ResultRow::*field) {
    double sum = 0.0;
    for (const ResultRow* r : g) sum += r->*field;
    const double mean = sum / static_cast<double>(g.size());
    double ss = 0.0;
    for (const ResultRow* r : g) ss += (r->*field - mean) * (r->*field - mean);
    const double sd = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1)) : 0.0;
    return std::pair{mean, sd};
  };
  for (size_t k = 0; k < groups.size(); ++k) {
    Aggregate& a = aggregates[k];
    a.count = static_cast<int64_t>(groups[k].size());
    std::tie(a.accuracy_mean, a.accuracy_std) = mean_std(groups[k], &ResultRow::accuracy);
    std::tie(a.opt_gap_mean, a.opt_gap_std) = mean_std(groups[k], &ResultRow::opt_gap);
    std::tie(a.opt_gap_perturbed_mean, a.opt_gap_perturbed_std) =
        mean_std(groups[k], &ResultRow::opt_gap_perturbed);
  }
}

bool ResultTable::has_errors() const {
  for (const ResultRow& row : rows) {
    if (!row.error.empty()) return true;
  }
  return false;
}

namespace {

struct SweepContext {
  const ExperimentSpec* spec = nullptr;
  Dataset train;
  Dataset test;
  LossSpec loss;
  TrainConfig config;
  double delta = 0.0;
  double objective_min = 0.0;
  ModelParams reference_theta;
};

struct Cell {
  Mechanism mechanism;
  double epsilon = 0.0;
  int64_t repetition = 0;
};

// Iteration caps for oracles that carry no convergence certificate.
constexpr int64_t kUnconstrainedOracleBudget = 100'000;
// Network evaluations cost far more; the mlp L* is a stationary-point proxy anyway.
constexpr int64_t kMlpOracleBudget = 5'000;

// L - min L for an objective the model did not necessarily converge on.
absl::StatusOr<double> GapOn(const EmpiricalRisk& objective, const Eigen::VectorXd& theta,
                             double tolerance) {
  double minimum = 0.0;
  if (objective.spec().is_linear()) {
    ASSIGN_OR_RETURN(OracleResult r, MinimizeNewton(objective, tolerance));
    minimum = r.objective_min;
  } else {
    OracleOptions options;
    options.tolerance = tolerance;
    options.max_iterations = kMlpOracleBudget;
    options.require_convergence = false;
    ASSIGN_OR_RETURN(OracleResult r,
                     OracleOptimum(objective, objective.spec().ObjectiveSmoothness(
                                                  objective.data().MaxRowNorm()),
                                   options));
    minimum = r.objective_min;
  }
  return objective.Value(theta) - minimum;
}

absl::StatusOr<CalibrationRegime> RegimeFor(const LossSpec& loss) {
  if (const auto* sc = std::get_if<StronglyConvex>(&loss.convexity)) {
    return StronglyConvexRegime{sc->delta};
  }
  // PL-asserted and uncertified losses both take the PL calibration.
  return PlRegime{};
}

absl::StatusOr<ResultRow> RunCell(const SweepContext& ctx, const Cell& cell) {
  const ExperimentSpec& spec = *ctx.spec;
  ResultRow row;
  row.mechanism = cell.mechanism.Name();
  row.epsilon = cell.epsilon;
  row.seed = DeriveSeed(spec.base_seed,
                        {static_cast<uint64_t>(SeedTag::kRepetition),
                         static_cast<uint64_t>(cell.repetition)});
  ASSIGN_OR_RETURN(PrivacyParams params, PrivacyParams::Create(cell.epsilon, ctx.delta));
  const auto n = static_cast<int64_t>(ctx.train.size());
  const size_t d = ctx.train.dim();
  BaselineInputs baseline{params, ctx.loss.lipschitz, ctx.loss.smoothness,
                          ctx.loss.PlConstant().value_or(0.0), n, ctx.config.steps};

  ModelParams theta;
  std::optional<double> perturbed_gap;
  switch (cell.mechanism.kind) {
    case MechanismKind::kNone:
      return absl::InternalError("reference run is not a sweep cell");
    case MechanismKind::kInput: {
      ASSIGN_OR_RETURN(CalibrationRegime regime, RegimeFor(ctx.loss));
      ASSIGN_OR_RETURN(NoiseScale scale, CalibrateSigma(params, ctx.config.steps, n,
                                                        ctx.loss.lipschitz, regime, spec.c));
      ASSIGN_OR_RETURN(CalibrationReport report, VerifyCalibration(params, scale));
      row.realized_epsilon = report.realized_epsilon;
      const Dataset perturbed = PerturbInputs(ctx.train, scale, row.seed, spec.noise_layout);
      ASSIGN_OR_RETURN(EmpiricalRisk objective, TrainingObjective(perturbed, ctx.loss));
      ASSIGN_OR_RETURN(TrainResult run, TrainGd(objective, ctx.config, d));
      theta = run.params;
      ASSIGN_OR_RETURN(EmpiricalRisk plain, EmpiricalRisk::Create(perturbed, ctx.loss));
      ASSIGN_OR_RETURN(perturbed_gap, GapOn(plain, theta.theta, spec.oracle_tolerance));
      break;
    }
    case MechanismKind::kOutput: {
      if (!(baseline.strong_convexity > 0.0)) {
        return absl::FailedPreconditionError(
            "output perturbation needs a strongly convex loss");
      }
      theta = OutputPerturb(ctx.reference_theta, OutputPerturbationVariance(baseline), row.seed);
      break;
    }
    case MechanismKind::kObjective: {
      const double variance = ObjectivePerturbationVariance(baseline);
      ASSIGN_OR_RETURN(EmpiricalRisk objective,
                       PerturbedObjective(ctx.train, ctx.loss, variance, row.seed));
      ASSIGN_OR_RETURN(TrainResult run, TrainGd(objective, ctx.config, d));
      theta = run.params;
      ASSIGN_OR_RETURN(perturbed_gap, GapOn(objective, theta.theta, spec.oracle_tolerance));
      break;
    }
    case MechanismKind::kGradient: {
      const double variance =
          GradientPerturbationVariance(baseline, cell.mechanism.gradient_variant);
      ASSIGN_OR_RETURN(EmpiricalRisk objective, TrainingObjective(ctx.train, ctx.loss));
      ASSIGN_OR_RETURN(TrainResult run,
                       TrainGradientPerturbed(objective, ctx.config, variance, row.seed, d));
      theta = run.params;
      break;
    }
  }
  ASSIGN_OR_RETURN(Evaluation eval,
                   Evaluate(theta, ctx.test, ctx.train, ctx.loss, ctx.objective_min));
  row.accuracy = eval.accuracy;
  row.opt_gap = eval.optimality_gap;
  row.opt_gap_perturbed = perturbed_gap.value_or(eval.optimality_gap);
  return row;
}

ResultRow FailedRow(const Cell& cell, uint64_t seed, const absl::Status& status) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ResultRow row;
  row.mechanism = cell.mechanism.Name();
  row.epsilon = cell.epsilon;
  row.seed = seed;
  row.accuracy = row.opt_gap = row.opt_gap_perturbed = nan;
  row.error = std::string(status.message());
  if (row.error.empty()) row.error = status.ToString();
  return row;
}

}  // namespace

absl::StatusOr<ResultTable> RunExperiment(const ExperimentSpec& spec) {
  RETURN_IF_ERROR(spec.Validate());
  ASSIGN_OR_RETURN(Dataset data, LoadSource(spec.dataset));
  ASSIGN_OR_RETURN(TrainTestSplit split,
                   Split(data, SplitSpec{spec.test_fraction, spec.base_seed}));

  SweepContext ctx{&spec, std::move(split.train), std::move(split.test)};
  ASSIGN_OR_RETURN(ctx.loss, spec.BuildLoss(data.dim()));
  ctx.config = spec.train;
  ctx.config.seed = spec.base_seed;
  ctx.config.radius = spec.radius.value_or(
      ctx.loss.family == LossFamily::kLogisticL2 ? 1.0 / ctx.loss.reg_lambda : 10.0);
  const auto n = static_cast<double>(ctx.train.size());
  ctx.delta = spec.delta.value_or(1.0 / (n * n));
  if (spec.grid_search) {
    ASSIGN_OR_RETURN(ctx.config, SelectHyperparameters(ctx.train, ctx.loss, ctx.config));
  }

  OracleOptions oracle;
  oracle.tolerance = spec.oracle_tolerance;
  // Only a strongly convex objective is guaranteed a minimizer. Plain logistic
  // loss on separable data has none, so L* falls back to the best value found
  // within a fixed budget.
  const bool has_minimizer = std::holds_alternative<StronglyConvex>(ctx.loss.convexity);
  oracle.require_convergence = has_minimizer;
  if (!has_minimizer) {
    oracle.max_iterations =
        ctx.loss.is_linear() ? kUnconstrainedOracleBudget : kMlpOracleBudget;
  }
  oracle.seed = spec.base_seed;
  ASSIGN_OR_RETURN(OracleResult optimum, OracleOptimum(ctx.train, ctx.loss, oracle));
  ctx.objective_min = optimum.objective_min;

  ResultTable table;
  {
    const auto start = std::chrono::steady_clock::now();
    ASSIGN_OR_RETURN(EmpiricalRisk objective, TrainingObjective(ctx.train, ctx.loss));
    ASSIGN_OR_RETURN(TrainResult reference, TrainGd(objective, ctx.config, ctx.train.dim()));
    ctx.reference_theta = reference.params;
    ASSIGN_OR_RETURN(Evaluation eval, Evaluate(reference.params, ctx.test, ctx.train,
                                               ctx.loss, ctx.objective_min));
    ResultRow row;
    row.mechanism = Mechanism{}.Name();
    row.epsilon = std::numeric_limits<double>::infinity();
    row.seed = spec.base_seed;
    row.accuracy = eval.accuracy;
    row.opt_gap = row.opt_gap_perturbed = eval.optimality_gap;
    if (spec.record_wall_time) {
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start).count();
    }
    table.rows.push_back(std::move(row));
  }

  std::vector<Cell> cells;
  for (const Mechanism& m : spec.mechanisms) {
    if (m.kind == MechanismKind::kNone) continue;
    for (double eps : spec.epsilon_grid) {
      for (int64_t r = 0; r < spec.repetitions; ++r) cells.push_back({m, eps, r});
    }
  }

  std::vector<ResultRow> results(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next.fetch_add(1); k < cells.size(); k = next.fetch_add(1)) {
      const auto start = std::chrono::steady_clock::now();
      absl::StatusOr<ResultRow> row = RunCell(ctx, cells[k]);
      if (row.ok()) {
        results[k] = *std::move(row);
      } else {
        results[k] = FailedRow(cells[k],
                               DeriveSeed(spec.base_seed,
                                          {static_cast<uint64_t>(SeedTag::kRepetition),
                                           static_cast<uint64_t>(cells[k].repetition)}),
                               row.status());
      }
      if (spec.record_wall_time) {
        results[k].wall_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - start).count();
      }
    }
  };
  const auto threads = static_cast<size_t>(
      std::min<int64_t>(spec.workers, static_cast<int64_t>(std::max<size_t>(cells.size(), 1))));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (ResultRow& row : results) table.rows.push_back(std::move(row));
  table.RecomputeAggregates();
  return table;
}

namespace {

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return absl::StrFormat("%.17g", v);
}

std::string JsonNum(double v) {
  if (!std::isfinite(v)) return "null";
  return absl::StrFormat("%.17g", v);
}

double JsonToDouble(const nlohmann::json& j, double if_null) {
  return j.is_null() ? if_null : j.get<double>();
}

std::string FormatCsv(const ResultTable& table) {
  std::string out = absl::StrCat(kCsvHeader, "\n");
  for (const ResultRow& r : table.rows) {
    absl::StrAppend(&out, r.mechanism, ",", Num(r.epsilon), ",", r.seed, ",", Num(r.accuracy),
                    ",", Num(r.opt_gap), ",", Num(r.opt_gap_perturbed), ",",
                    r.realized_epsilon ? Num(*r.realized_epsilon) : "", ",", Num(r.wall_ms),
                    "\n");
  }
  return out;
}

std::string FormatJson(const ResultTable& table) {
  std::string out = "{\n  \"rows\": [";
  for (size_t k = 0; k < table.rows.size(); ++k) {
    const ResultRow& r = table.rows[k];
    absl::StrAppend(&out, k ? ",\n" : "\n", "    {\"mechanism\": ",
                    nlohmann::json(r.mechanism).dump(), ", \"epsilon\": ", JsonNum(r.epsilon),
                    ", \"seed\": ", r.seed, ", \"accuracy\": ", JsonNum(r.accuracy),
                    ", \"opt_gap\": ", JsonNum(r.opt_gap),
                    ", \"opt_gap_perturbed\": ", JsonNum(r.opt_gap_perturbed),
                    ", \"realized_epsilon\": ",
                    r.realized_epsilon ? JsonNum(*r.realized_epsilon) : "null",
                    ", \"wall_ms\": ", JsonNum(r.wall_ms));
    if (!r.error.empty()) {
      absl::StrAppend(&out, ", \"error\": ", nlohmann::json(r.error).dump());
    }
    out += "}";
  }
  out += "\n  ],\n  \"aggregates\": {";
  for (size_t k = 0; k < table.aggregates.size(); ++k) {
    const Aggregate& a = table.aggregates[k];
    absl::StrAppend(&out, k ? ",\n" : "\n", "    ",
                    nlohmann::json(absl::StrCat(a.mechanism, "@", Num(a.epsilon))).dump(),
                    ": {\"mechanism\": ", nlohmann::json(a.mechanism).dump(),
                    ", \"epsilon\": ", JsonNum(a.epsilon), ", \"count\": ", a.count,
                    ", \"accuracy_mean\": ", JsonNum(a.accuracy_mean),
                    ", \"accuracy_std\": ", JsonNum(a.accuracy_std),
                    ", \"opt_gap_mean\": ", JsonNum(a.opt_gap_mean),
                    ", \"opt_gap_std\": ", JsonNum(a.opt_gap_std),
                    ", \"opt_gap_perturbed_mean\": ", JsonNum(a.opt_gap_perturbed_mean),
                    ", \"opt_gap_perturbed_std\": ", JsonNum(a.opt_gap_perturbed_std), "}");
  }
  out += "\n  }\n}\n";
  return out;
}

absl::StatusOr<double> ParseCsvNumber(absl::string_view field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  if (!absl::SimpleAtod(field, &v)) {
    return absl::InvalidArgumentError(absl::StrCat("bad number '", field, "'"));
  }
  return v;
}

absl::StatusOr<ResultTable> ParseCsvTable(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    return absl::InvalidArgumentError("results csv: unexpected header");
  }
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<absl::string_view> f = absl::StrSplit(line, ',');
    if (f.size() != 8) return absl::InvalidArgumentError("results csv: expected 8 fields");
    ResultRow r;
    r.mechanism = std::string(f[0]);
    ASSIGN_OR_RETURN(r.epsilon, ParseCsvNumber(f[1]));
    if (!absl::SimpleAtoi(f[2], &r.seed)) {
      return absl::InvalidArgumentError("results csv: bad seed");
    }
    ASSIGN_OR_RETURN(r.accuracy, ParseCsvNumber(f[3]));
    ASSIGN_OR_RETURN(r.opt_gap, ParseCsvNumber(f[4]));
    ASSIGN_OR_RETURN(r.opt_gap_perturbed, ParseCsvNumber(f[5]));
    if (!f[6].empty()) {
      ASSIGN_OR_RETURN(double e, ParseCsvNumber(f[6]));
      r.realized_epsilon = e;
    }
    ASSIGN_OR_RETURN(r.wall_ms, ParseCsvNumber(f[7]));
    if (std::isnan(r.accuracy)) r.error = "failed";
    table.rows.push_back(std::move(r));
  }
  table.RecomputeAggregates();
  return table;
}

absl::StatusOr<ResultTable> ParseJsonTable(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.contains("rows") || !doc["rows"].is_array()) {
    return absl::InvalidArgumentError("results json: malformed document");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ResultTable table;
  try {
    for (const nlohmann::json& j : doc["rows"]) {
      ResultRow r;
      r.mechanism = j.at("mechanism").get<std::string>();
      r.epsilon = JsonToDouble(j.at("epsilon"), std::numeric_limits<double>::infinity());
      r.seed = j.at("seed").get<uint64_t>();
      r.accuracy = JsonToDouble(j.at("accuracy"), nan);
      r.opt_gap = JsonToDouble(j.at("opt_gap"), nan);
      r.opt_gap_perturbed = JsonToDouble(j.at("opt_gap_perturbed"), nan);
      if (!j.at("realized_epsilon").is_null()) {
        r.realized_epsilon = j.at("realized_epsilon").get<double>();
      }
      r.wall_ms = JsonToDouble(j.at("wall_ms"), nan);
      if (j.contains("error")) r.error = j["error"].get<std::string>();
      table.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("results json: ", e.what()));
  }
  table.RecomputeAggregates();
  return table;
}

}  // namespace

std::string FormatTable(const ResultTable& table, OutputFormat format) {
  return format == OutputFormat::kCsv ? FormatCsv(table) : FormatJson(table);
}

absl::Status Emit(const ResultTable& table, OutputFormat format, const std::string& path) {
  if (table.rows.empty()) return absl::InvalidArgumentError("emit: empty table");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::PermissionDeniedError(absl::StrCat("cannot write '", path, "'"));
  out << FormatTable(table, format);
  out.close();
  if (!out) return absl::DataLossError(absl::StrCat("write to '", path, "' failed"));
  return absl::OkStatus();
}

absl::StatusOr<ResultTable> ParseTable(const std::string& text, OutputFormat format) {
  return format == OutputFormat::kCsv ? ParseCsvTable(text) : ParseJsonTable(text);
}

}  // namespace dperm
