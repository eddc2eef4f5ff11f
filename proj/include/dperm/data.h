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

#ifndef DPERM_DATA_H_
#define DPERM_DATA_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"

namespace dperm {

// A labeled binary-classification dataset. Rows are examples; labels are
// +1/-1. Each row carries a stable identifier assigned at construction which
// survives normalize/split/permutation, so per-row randomness can be keyed
// on it.
class Dataset {
 public:
  // Validates shapes, label values and n >= 2. `row_ids` defaults to 0..n-1.
  static absl::StatusOr<Dataset> Create(Eigen::MatrixXd features,
                                        Eigen::VectorXd labels,
                                        std::vector<std::string> feature_names = {},
                                        std::vector<uint64_t> row_ids = {});

  // Same as Create but allows n < 2; used for test sets and scratch data.
  static absl::StatusOr<Dataset> CreateUnchecked(
      Eigen::MatrixXd features, Eigen::VectorXd labels,
      std::vector<std::string> feature_names = {},
      std::vector<uint64_t> row_ids = {});

  size_t size() const { return static_cast<size_t>(features_.rows()); }
  size_t dim() const { return static_cast<size_t>(features_.cols()); }

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<uint64_t>& row_ids() const { return row_ids_; }

  double MaxRowNorm() const;
  bool InUnitBall(double slack = 0.0) const;

  // Rows in `order` (indices into this dataset), ids carried along.
  Dataset Select(const std::vector<size_t>& order) const;

  // Same labels and ids, replaced feature matrix of identical shape.
  Dataset WithFeatures(Eigen::MatrixXd features) const;

 private:
  Dataset() = default;

  Eigen::MatrixXd features_;
  Eigen::VectorXd labels_;
  std::vector<std::string> feature_names_;
  std::vector<uint64_t> row_ids_;
};

// Header name or zero-based column index.
using LabelColumn = std::variant<std::string, size_t>;

// Reads a comma-separated file with a header line. Labels equal to
// `positive_label` map to +1 and everything else to -1. Features are returned
// unscaled; call Normalize before training.
absl::StatusOr<Dataset> LoadCsv(const std::string& path,
                                const LabelColumn& label_column,
                                const std::string& positive_label);

// Parses CSV text (same rules as LoadCsv). `source` is used in messages.
absl::StatusOr<Dataset> ParseCsv(const std::string& text,
                                 const LabelColumn& label_column,
                                 const std::string& positive_label,
                                 const std::string& source = "<memory>");

// Scales every row by one global factor 1/max(1, max_i ||x_i||), so the
// result lies in the unit ball with pairwise geometry intact.
Dataset Normalize(const Dataset& dataset);

struct SplitSpec {
  double test_fraction = 0.2;
  uint64_t seed = 0;
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Seeded shuffle then cut. The test part gets round(n * test_fraction) rows
// (at least one); the train part must keep at least two.
absl::StatusOr<TrainTestSplit> Split(const Dataset& dataset, const SplitSpec& spec);

// Two Gaussian clusters on either side of a random hyperplane through the
// origin. Points closer than `margin` to the hyperplane are redrawn, which
// makes the set linearly separable. Output is normalized to the unit ball.
absl::StatusOr<Dataset> MakeSeparableBlobs(size_t n, size_t d, uint64_t seed,
                                           double center_offset = 0.5,
                                           double spread = 0.25,
                                           double margin = 0.05);

// Uniform points in the unit ball labeled by a random hyperplane, each label
// flipped with probability `flip_probability`.
absl::StatusOr<Dataset> MakeNoisyMargin(size_t n, size_t d, uint64_t seed,
                                        double flip_probability = 0.1);

}  // namespace dperm

#endif  // DPERM_DATA_H_
