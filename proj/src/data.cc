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

#include "dperm/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "absl/strings/strip.h"
#include "dperm/rng.h"

namespace dperm {

absl::StatusOr<Dataset> Dataset::CreateUnchecked(
    Eigen::MatrixXd features, Eigen::VectorXd labels,
    std::vector<std::string> feature_names, std::vector<uint64_t> row_ids) {
  const auto n = static_cast<size_t>(features.rows());
  if (static_cast<size_t>(labels.size()) != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "dataset: ", n, " feature rows but ", labels.size(), " labels"));
  }
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] != 1.0 && labels[i] != -1.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("dataset: label at row ", i, " is ", labels[i],
                       ", expected +1 or -1"));
    }
  }
  if (!feature_names.empty() &&
      feature_names.size() != static_cast<size_t>(features.cols())) {
    return absl::InvalidArgumentError("dataset: feature_names size mismatch");
  }
  if (!features.allFinite()) {
    return absl::InvalidArgumentError("dataset: non-finite feature value");
  }
  if (row_ids.empty()) {
    row_ids.resize(n);
    std::iota(row_ids.begin(), row_ids.end(), uint64_t{0});
  } else if (row_ids.size() != n) {
    return absl::InvalidArgumentError("dataset: row_ids size mismatch");
  }
  Dataset d;
  d.features_ = std::move(features);
  d.labels_ = std::move(labels);
  d.feature_names_ = std::move(feature_names);
  d.row_ids_ = std::move(row_ids);
  return d;
}

absl::StatusOr<Dataset> Dataset::Create(Eigen::MatrixXd features,
                                        Eigen::VectorXd labels,
                                        std::vector<std::string> feature_names,
                                        std::vector<uint64_t> row_ids) {
  if (features.rows() < 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        "dataset: need at least 2 rows, got ", features.rows()));
  }
  return CreateUnchecked(std::move(features), std::move(labels),
                         std::move(feature_names), std::move(row_ids));
}

double Dataset::MaxRowNorm() const {
  if (features_.rows() == 0) return 0.0;
  return features_.rowwise().norm().maxCoeff();
}

bool Dataset::InUnitBall(double slack) const {
  return MaxRowNorm() <= 1.0 + slack;
}

Dataset Dataset::Select(const std::vector<size_t>& order) const {
  Dataset out;
  out.features_.resize(static_cast<Eigen::Index>(order.size()), features_.cols());
  out.labels_.resize(static_cast<Eigen::Index>(order.size()));
  out.row_ids_.reserve(order.size());
  for (size_t k = 0; k < order.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    out.features_.row(static_cast<Eigen::Index>(k)) = features_.row(i);
    out.labels_[static_cast<Eigen::Index>(k)] = labels_[i];
    out.row_ids_.push_back(row_ids_[order[k]]);
  }
  out.feature_names_ = feature_names_;
  return out;
}

Dataset Dataset::WithFeatures(Eigen::MatrixXd features) const {
  Dataset out = *this;
  out.features_ = std::move(features);
  return out;
}

namespace {

absl::string_view Trim(absl::string_view s) {
  s = absl::StripAsciiWhitespace(s);
  return s;
}

}  // namespace

absl::StatusOr<Dataset> ParseCsv(const std::string& text,
                                 const LabelColumn& label_column,
                                 const std::string& positive_label,
                                 const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    return absl::InvalidArgumentError(absl::StrCat(source, ": empty file"));
  }
  std::vector<std::string> header;
  for (absl::string_view h : absl::StrSplit(line, ',')) {
    header.emplace_back(Trim(h));
  }

  size_t label_index = 0;
  if (const auto* name = std::get_if<std::string>(&label_column)) {
    auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) {
      return absl::NotFoundError(
          absl::StrCat(source, ": label column '", *name, "' not in header"));
    }
    label_index = static_cast<size_t>(it - header.begin());
  } else {
    label_index = std::get<size_t>(label_column);
    if (label_index >= header.size()) {
      return absl::NotFoundError(absl::StrCat(source, ": label column index ",
                                              label_index, " out of range (",
                                              header.size(), " columns)"));
    }
  }

  std::vector<std::string> names;
  for (size_t j = 0; j < header.size(); ++j) {
    if (j != label_index) names.push_back(header[j]);
  }
  const size_t d = names.size();

  std::vector<double> values;
  std::vector<double> labels;
  size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    absl::string_view view = Trim(line);
    if (view.empty()) continue;
    std::vector<absl::string_view> cells = absl::StrSplit(view, ',');
    if (cells.size() != header.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat(source, ": row ", row, " has ", cells.size(),
                       " cells, header has ", header.size()));
    }
    for (size_t j = 0; j < cells.size(); ++j) {
      absl::string_view cell = Trim(cells[j]);
      if (j == label_index) {
        labels.push_back(cell == positive_label ? 1.0 : -1.0);
        continue;
      }
      double v = 0.0;
      if (cell.empty() || !absl::SimpleAtod(cell, &v) || !std::isfinite(v)) {
        return absl::InvalidArgumentError(
            absl::StrCat(source, ": row ", row, ", column '", header[j],
                         "': cannot parse '", cell, "' as a real"));
      }
      values.push_back(v);
    }
  }

  const size_t n = labels.size();
  if (n < 2) {
    return absl::InvalidArgumentError(
        absl::StrCat(source, ": need at least 2 data rows, got ", n));
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          values[i * d + j];
    }
  }
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(n));
  return Dataset::Create(std::move(features), std::move(y), std::move(names));
}

absl::StatusOr<Dataset> LoadCsv(const std::string& path,
                                const LabelColumn& label_column,
                                const std::string& positive_label) {
  std::ifstream file(path);
  if (!file) {
    return absl::NotFoundError(absl::StrCat("cannot open '", path, "'"));
  }
  std::ostringstream buf;
  buf << file.rdbuf();
  return ParseCsv(buf.str(), label_column, positive_label, path);
}

Dataset Normalize(const Dataset& dataset) {
  double scale = dataset.MaxRowNorm();
  if (scale <= 1.0) return dataset;
  // Division can round a row norm to just above 1; bump the divisor until the
  // result is inside the ball so a second Normalize is the identity.
  for (;;) {
    Eigen::MatrixXd scaled = dataset.features() / scale;
    if (scaled.rowwise().norm().maxCoeff() <= 1.0) {
      return dataset.WithFeatures(std::move(scaled));
    }
    scale = std::nextafter(scale, std::numeric_limits<double>::infinity());
  }
}

absl::StatusOr<TrainTestSplit> Split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "split: test_fraction must be in (0,1), got ", spec.test_fraction));
  }
  const size_t n = dataset.size();
  size_t n_test = static_cast<size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  n_test = std::max<size_t>(n_test, 1);
  if (n_test >= n || n - n_test < 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        "split: train part would have ", n > n_test ? n - n_test : 0,
        " rows (need at least 2)"));
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Engine engine(DeriveSeed(spec.seed, SeedTag::kSplit));
  std::shuffle(order.begin(), order.end(), engine);
  std::vector<size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  return TrainTestSplit{dataset.Select(train_idx), dataset.Select(test_idx)};
}

namespace {

Eigen::VectorXd RandomUnitVector(size_t d, Engine& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(static_cast<Eigen::Index>(d));
  do {
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = normal(engine);
  } while (w.norm() == 0.0);
  return w / w.norm();
}

}  // namespace

absl::StatusOr<Dataset> MakeSeparableBlobs(size_t n, size_t d, uint64_t seed,
                                           double center_offset, double spread,
                                           double margin) {
  if (n < 2 || d < 1) {
    return absl::InvalidArgumentError("blobs: need n >= 2 and d >= 1");
  }
  if (margin < 0.0 || margin >= center_offset + 4.0 * spread) {
    return absl::InvalidArgumentError("blobs: margin out of range");
  }
  Engine engine(DeriveSeed(seed, SeedTag::kSynthetic));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd w = RandomUnitVector(d, engine);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double label = (i % 2 == 0) ? 1.0 : -1.0;
    Eigen::VectorXd row(static_cast<Eigen::Index>(d));
    do {
      for (Eigen::Index j = 0; j < row.size(); ++j) row[j] = spread * normal(engine);
      row += label * center_offset * w;
    } while (label * w.dot(row) < margin);
    x.row(i) = row.transpose();
    y[i] = label;
  }
  auto ds = Dataset::Create(std::move(x), std::move(y));
  if (!ds.ok()) return ds.status();
  return Normalize(*ds);
}

absl::StatusOr<Dataset> MakeNoisyMargin(size_t n, size_t d, uint64_t seed,
                                        double flip_probability) {
  if (n < 2 || d < 1) {
    return absl::InvalidArgumentError("noisy margin: need n >= 2 and d >= 1");
  }
  if (flip_probability < 0.0 || flip_probability > 0.5) {
    return absl::InvalidArgumentError("noisy margin: flip_probability must be in [0, 0.5]");
  }
  Engine engine(DeriveSeed(seed, SeedTag::kSynthetic));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::VectorXd w = RandomUnitVector(d, engine);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    // Uniform in the ball: uniform direction, radius ~ U^(1/d).
    const Eigen::VectorXd dir = RandomUnitVector(d, engine);
    const double r = std::pow(uniform(engine), 1.0 / static_cast<double>(d));
    const Eigen::VectorXd row = r * dir;
    double label = w.dot(row) >= 0.0 ? 1.0 : -1.0;
    if (uniform(engine) < flip_probability) label = -label;
    x.row(i) = row.transpose();
    y[i] = label;
  }
  auto ds = Dataset::Create(std::move(x), std::move(y));
  if (!ds.ok()) return ds.status();
  return Normalize(*ds);
}

}  // namespace dperm
