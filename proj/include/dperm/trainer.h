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

#ifndef DPERM_TRAINER_H_
#define DPERM_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "dperm/data.h"
#include "dperm/losses.h"

namespace dperm {

enum class InitKind { kZeros, kGaussian };

struct TrainConfig {
  int64_t steps = 200;  // T
  double learning_rate = 0.5;
  uint64_t seed = 0;
  InitKind init = InitKind::kZeros;
  // Standard deviation for gaussian init; 0 means 0.1 / sqrt(d).
  double init_scale = 0.0;
  double radius = 10.0;  // D

  absl::Status Validate() const;
};

// theta_0 for a model with `p` parameters over `d` input features.
Eigen::VectorXd InitialTheta(const TrainConfig& config, size_t p, size_t d);

// One projected gradient step: project(theta - alpha * grad).
ModelParams GdStep(const ModelParams& theta, const Eigen::VectorXd& grad,
                   double learning_rate);

// Replaces GdStep inside TrainGd; receives theta_t, grad L(theta_t) and t.
using StepRule = std::function<ModelParams(const ModelParams&, const Eigen::VectorXd&, int64_t)>;

struct TrainResult {
  ModelParams params;
  // Objective value after each of the T steps.
  std::vector<double> loss_curve;
};

// T full-batch projected gradient steps from InitialTheta. `input_dim` feeds
// the default gaussian init scale.
absl::StatusOr<TrainResult> TrainGd(const Objective& objective, const TrainConfig& config,
                                    size_t input_dim, const StepRule& rule = {});

struct OracleOptions {
  double tolerance = 1e-8;
  int64_t max_iterations = 1'000'000;
  // Non-convex losses only get a stationary point; with this unset an
  // unconverged run is returned instead of failing.
  bool require_convergence = true;
  uint64_t seed = 0;
};

struct OracleResult {
  ModelParams theta_star;
  double objective_min = 0.0;  // L*
  double gradient_norm = 0.0;
  int64_t iterations = 0;
  double learning_rate = 0.0;
  bool converged = false;
  // tolerance^2 / (2 Delta) when the loss is strongly convex.
  std::optional<double> certified_gap_bound;
  // Objective value at each iterate, starting with theta_0.
  std::vector<double> loss_curve;
};

// Unconstrained minimizer of the empirical risk. Convex families run GD with
// alpha = 1 / L_total from zero; mlp uses Armijo backtracking from a seeded
// gaussian start.
absl::StatusOr<OracleResult> OracleOptimum(const Dataset& train, const LossSpec& loss,
                                           const OracleOptions& options = {});

// Same, for an arbitrary objective with known smoothness; fixed step 1/smoothness.
absl::StatusOr<OracleResult> OracleOptimum(const Objective& objective, double smoothness,
                                           const OracleOptions& options = {});

// Damped Newton with backtracking on a linear-family empirical risk. Used
// where only the minimum value matters and GD would crawl (e.g. badly
// conditioned perturbed data). Not certified for plain logistic loss on
// separable data, where no minimizer exists.
absl::StatusOr<OracleResult> MinimizeNewton(const EmpiricalRisk& objective,
                                            double tolerance = 1e-10,
                                            int64_t max_iterations = 200);

struct Evaluation {
  double accuracy = 0.0;
  double optimality_gap = 0.0;
};

// Test accuracy with sign(0) = +1, and L_train(theta) - L* on the unperturbed
// training objective.
absl::StatusOr<Evaluation> Evaluate(const ModelParams& theta, const Dataset& test,
                                     const Dataset& train, const LossSpec& loss,
                                     double objective_min);

absl::StatusOr<double> Accuracy(const ModelParams& theta, const Dataset& test,
                                const LossSpec& loss);

struct HyperparameterGrid {
  std::vector<double> learning_rates = {0.01, 0.1, 0.5, 1.0};
  std::vector<int64_t> steps = {50, 200, 1000};
  double validation_fraction = 0.2;
};

// Picks (alpha, T) by validation loss of non-private GD on a held-out fold of
// `train`. Ties keep the earlier grid entry.
absl::StatusOr<TrainConfig> SelectHyperparameters(const Dataset& train, const LossSpec& loss,
                                                  const TrainConfig& base,
                                                  const HyperparameterGrid& grid = {});

}  // namespace dperm

#endif  // DPERM_TRAINER_H_
