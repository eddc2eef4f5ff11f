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

#ifndef DPERM_MECHANISMS_H_
#define DPERM_MECHANISMS_H_

#include <cstdint>
#include <string>
#include "absl/strings/string_view.h"

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "dperm/data.h"
#include "dperm/losses.h"
#include "dperm/privacy.h"
#include "dperm/trainer.h"

namespace dperm {

enum class MechanismKind { kNone, kInput, kOutput, kObjective, kGradient };

// Which published variance the gradient baseline uses.
enum class GradientVariant {
  // G^2 T ln(1/delta) / (n^2 eps^2): per-step noise under T-fold composition.
  kComposed,
  // G^2 n^2 ln(n/delta) ln(1/delta) / eps^2.
  kSquaredN,
};

struct Mechanism {
  MechanismKind kind = MechanismKind::kNone;
  GradientVariant gradient_variant = GradientVariant::kComposed;

  // "none", "input", "output", "objective", "gradient", "gradient-n2".
  std::string Name() const;
  static absl::StatusOr<Mechanism> Parse(absl::string_view name);

  friend bool operator==(const Mechanism&, const Mechanism&) = default;
};

// I.i.d. N(0, variance) values. Identical (seed, shape, variance) gives
// bit-identical values.
struct NoiseDraw {
  uint64_t seed = 0;
  Eigen::MatrixXd values;
};
NoiseDraw DrawGaussian(uint64_t seed, Eigen::Index rows, Eigen::Index cols, double variance);

enum class NoiseLayout {
  // Independent z_i per row, keyed on the row id.
  kPerInstance,
  // One z added to every row.
  kShared,
};

// x_i -> x_i + z_i with z_i ~ N(0, sigma_sq I_d); labels untouched. Rows are
// not pulled back into the unit ball.
Dataset PerturbInputs(const Dataset& dataset, double sigma_sq, uint64_t seed,
                      NoiseLayout layout = NoiseLayout::kPerInstance);
inline Dataset PerturbInputs(const Dataset& dataset, const NoiseScale& scale, uint64_t seed,
                             NoiseLayout layout = NoiseLayout::kPerInstance) {
  return PerturbInputs(dataset, scale.sigma_sq, seed, layout);
}

// The objective every pipeline trains on: plain empirical risk, with
// per-sample gradients clipped to G for mlp so the declared Lipschitz
// constant holds.
absl::StatusOr<EmpiricalRisk> TrainingObjective(const Dataset& dataset, const LossSpec& loss);

// L(theta) + (1/n) z.theta with z ~ N(0, variance I_p) drawn from `seed`.
absl::StatusOr<EmpiricalRisk> PerturbedObjective(const Dataset& dataset, const LossSpec& loss,
                                                 double variance, uint64_t seed);

// theta* + z, projected to the D-ball.
ModelParams OutputPerturb(const ModelParams& theta_star, double variance, uint64_t seed);

// Minimizes L(theta) + (1/n) z.theta with z ~ N(0, variance I_p) by TrainGd.
// Rejects non-convex families.
absl::StatusOr<TrainResult> ObjectivePerturb(const Dataset& dataset, const LossSpec& loss,
                                             double variance, uint64_t seed,
                                             const TrainConfig& config);

// project(theta_t - alpha (grad + z_t)), z_t drawn from (seed, step_index).
ModelParams GradientPerturbStep(const ModelParams& theta_t, const Eigen::VectorXd& grad,
                                double variance, double learning_rate, uint64_t seed,
                                int64_t step_index);

// TrainGd with GradientPerturbStep as the update.
absl::StatusOr<TrainResult> TrainGradientPerturbed(const Objective& objective,
                                                   const TrainConfig& config, double variance,
                                                   uint64_t seed, size_t input_dim);

// Shared inputs for the baseline variance formulas, all with leading constant 1.
struct BaselineInputs {
  PrivacyParams params;
  double lipschitz = 1.0;   // G
  double smoothness = 0.25; // L
  double strong_convexity = 0.0;  // Delta
  int64_t n = 0;
  int64_t steps = 0;  // T
};

double OutputPerturbationVariance(const BaselineInputs& in);
double ObjectivePerturbationVariance(const BaselineInputs& in);
double GradientPerturbationVariance(const BaselineInputs& in, GradientVariant variant);

}  // namespace dperm

#endif  // DPERM_MECHANISMS_H_
