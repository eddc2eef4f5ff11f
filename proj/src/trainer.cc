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

#include "dperm/trainer.h"

#include <cmath>
#include <limits>
#include <random>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "dperm/rng.h"
#include "dperm/status_macros.h"

namespace dperm {

absl::Status TrainConfig::Validate() const {
  if (steps < 1) return absl::InvalidArgumentError(absl::StrCat("T must be >= 1, got ", steps));
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    return absl::InvalidArgumentError(
        absl::StrCat("learning rate must be > 0, got ", learning_rate));
  }
  if (!(radius > 0.0)) {
    return absl::InvalidArgumentError(absl::StrCat("radius D must be > 0, got ", radius));
  }
  if (init_scale < 0.0) return absl::InvalidArgumentError("init_scale must be >= 0");
  return absl::OkStatus();
}

Eigen::VectorXd InitialTheta(const TrainConfig& config, size_t p, size_t d) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (config.init == InitKind::kGaussian) {
    const double scale = config.init_scale > 0.0
                             ? config.init_scale
                             : 0.1 / std::sqrt(static_cast<double>(std::max<size_t>(d, 1)));
    Engine engine(DeriveSeed(config.seed, SeedTag::kInit));
    std::normal_distribution<double> normal(0.0, scale);
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = normal(engine);
    ProjectInPlace(theta, config.radius);
  }
  return theta;
}

ModelParams GdStep(const ModelParams& theta, const Eigen::VectorXd& grad,
                   double learning_rate) {
  ModelParams next{theta.theta - learning_rate * grad, theta.radius};
  ProjectInPlace(next.theta, next.radius);
  return next;
}

absl::StatusOr<TrainResult> TrainGd(const Objective& objective, const TrainConfig& config,
                                    size_t input_dim, const StepRule& rule) {
  RETURN_IF_ERROR(config.Validate());
  TrainResult result;
  result.params = {InitialTheta(config, objective.dimension(), input_dim), config.radius};
  result.loss_curve.reserve(static_cast<size_t>(config.steps));
  for (int64_t t = 0; t < config.steps; ++t) {
    const Eigen::VectorXd grad = objective.Gradient(result.params.theta);
    if (!grad.allFinite()) {
      return absl::InternalError(absl::StrCat("train_gd: non-finite gradient at iteration ", t));
    }
    result.params = rule ? rule(result.params, grad, t)
                         : GdStep(result.params, grad, config.learning_rate);
    const double value = objective.Value(result.params.theta);
    if (!std::isfinite(value)) {
      return absl::InternalError(absl::StrCat("train_gd: non-finite loss at iteration ", t));
    }
    result.loss_curve.push_back(value);
  }
  return result;
}

namespace {

absl::StatusOr<OracleResult> RunFixedStep(const Objective& objective, double step,
                                          Eigen::VectorXd theta, const OracleOptions& options) {
  OracleResult out;
  out.learning_rate = step;
  out.loss_curve.push_back(objective.Value(theta));
  Eigen::VectorXd grad = objective.Gradient(theta);
  int64_t it = 0;
  while (grad.norm() > options.tolerance && it < options.max_iterations) {
    theta -= step * grad;
    grad = objective.Gradient(theta);
    out.loss_curve.push_back(objective.Value(theta));
    ++it;
    if (!std::isfinite(out.loss_curve.back()) || !grad.allFinite()) {
      return absl::InternalError(absl::StrCat("oracle: non-finite value at iteration ", it));
    }
  }
  out.iterations = it;
  out.gradient_norm = grad.norm();
  out.converged = out.gradient_norm <= options.tolerance;
  out.objective_min = out.loss_curve.back();
  out.theta_star = {std::move(theta), std::numeric_limits<double>::infinity()};
  return out;
}

absl::StatusOr<OracleResult> RunBacktracking(const Objective& objective, double initial_step,
                                             Eigen::VectorXd theta,
                                             const OracleOptions& options) {
  OracleResult out;
  double value = objective.Value(theta);
  out.loss_curve.push_back(value);
  Eigen::VectorXd grad = objective.Gradient(theta);
  double step = initial_step;
  int64_t it = 0;
  while (grad.norm() > options.tolerance && it < options.max_iterations) {
    const double g2 = grad.squaredNorm();
    step *= 2.0;
    Eigen::VectorXd candidate = theta - step * grad;
    double candidate_value = objective.Value(candidate);
    while (candidate_value > value - 0.5 * step * g2 && step > 1e-12) {
      step *= 0.5;
      candidate = theta - step * grad;
      candidate_value = objective.Value(candidate);
    }
    theta = std::move(candidate);
    value = candidate_value;
    grad = objective.Gradient(theta);
    out.loss_curve.push_back(value);
    ++it;
    if (!std::isfinite(value) || !grad.allFinite()) {
      return absl::InternalError(absl::StrCat("oracle: non-finite value at iteration ", it));
    }
  }
  out.iterations = it;
  out.learning_rate = step;
  out.gradient_norm = grad.norm();
  out.converged = out.gradient_norm <= options.tolerance;
  out.objective_min = value;
  out.theta_star = {std::move(theta), std::numeric_limits<double>::infinity()};
  return out;
}

absl::Status CheckOracleOptions(const OracleOptions& options) {
  if (!(options.tolerance > 0.0)) return absl::InvalidArgumentError("oracle: tolerance must be > 0");
  if (options.max_iterations < 1) return absl::InvalidArgumentError("oracle: max_iterations must be >= 1");
  return absl::OkStatus();
}

absl::StatusOr<OracleResult> Finish(absl::StatusOr<OracleResult> result,
                                    const OracleOptions& options) {
  if (!result.ok()) return result;
  if (options.require_convergence && !result->converged) {
    return absl::DeadlineExceededError(absl::StrCat(
        "oracle: no convergence after ", result->iterations,
        " iterations; final gradient norm ", result->gradient_norm));
  }
  return result;
}

}  // namespace

absl::StatusOr<OracleResult> OracleOptimum(const Objective& objective, double smoothness,
                                           const OracleOptions& options) {
  RETURN_IF_ERROR(CheckOracleOptions(options));
  if (!(smoothness > 0.0)) return absl::InvalidArgumentError("oracle: smoothness must be > 0");
  return Finish(RunFixedStep(objective, 1.0 / smoothness,
                             Eigen::VectorXd::Zero(static_cast<Eigen::Index>(objective.dimension())),
                             options),
                options);
}

absl::StatusOr<OracleResult> OracleOptimum(const Dataset& train, const LossSpec& loss,
                                           const OracleOptions& options) {
  RETURN_IF_ERROR(CheckOracleOptions(options));
  ASSIGN_OR_RETURN(EmpiricalRisk objective, EmpiricalRisk::Create(train, loss));
  const double smoothness = loss.ObjectiveSmoothness(train.MaxRowNorm());
  absl::StatusOr<OracleResult> result;
  if (loss.is_convex()) {
    result = RunFixedStep(objective, 1.0 / smoothness,
                          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(objective.dimension())),
                          options);
  } else {
    TrainConfig init;
    init.init = InitKind::kGaussian;
    init.seed = options.seed;
    init.radius = std::numeric_limits<double>::infinity();
    result = RunBacktracking(objective, 1.0 / smoothness,
                             InitialTheta(init, objective.dimension(), train.dim()), options);
  }
  if (result.ok()) {
    if (const auto* sc = std::get_if<StronglyConvex>(&loss.convexity)) {
      result->certified_gap_bound =
          result->gradient_norm * result->gradient_norm / (2.0 * sc->delta);
    }
  }
  return Finish(std::move(result), options);
}

absl::StatusOr<OracleResult> MinimizeNewton(const EmpiricalRisk& objective,
                                            double tolerance, int64_t max_iterations) {
  if (!objective.spec().is_linear()) {
    return absl::UnimplementedError("newton: only available for linear families");
  }
  OracleResult out;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(objective.dimension()));
  double value = objective.Value(theta);
  out.loss_curve.push_back(value);
  Eigen::VectorXd grad = objective.Gradient(theta);
  int64_t it = 0;
  while (grad.norm() > tolerance && it < max_iterations) {
    ASSIGN_OR_RETURN(Eigen::MatrixXd hessian, objective.Hessian(theta));
    // Tiny ridge keeps the solve defined for plain logistic loss.
    hessian.diagonal().array() += 1e-12;
    const Eigen::VectorXd direction = hessian.ldlt().solve(grad);
    double step = 1.0;
    Eigen::VectorXd candidate = theta - direction;
    double candidate_value = objective.Value(candidate);
    const double decrease = grad.dot(direction);
    while (candidate_value > value - 0.25 * step * decrease && step > 1e-10) {
      step *= 0.5;
      candidate = theta - step * direction;
      candidate_value = objective.Value(candidate);
    }
    if (!(candidate_value <= value)) break;
    theta = std::move(candidate);
    value = candidate_value;
    grad = objective.Gradient(theta);
    out.loss_curve.push_back(value);
    ++it;
  }
  out.iterations = it;
  out.gradient_norm = grad.norm();
  out.converged = out.gradient_norm <= tolerance;
  out.objective_min = value;
  out.theta_star = {std::move(theta), std::numeric_limits<double>::infinity()};
  return out;
}

absl::StatusOr<double> Accuracy(const ModelParams& theta, const Dataset& test,
                                const LossSpec& loss) {
  if (test.size() == 0) return absl::InvalidArgumentError("evaluate: empty test set");
  ASSIGN_OR_RETURN(EmpiricalRisk scorer, EmpiricalRisk::Create(test, loss));
  if (static_cast<size_t>(theta.theta.size()) != scorer.dimension()) {
    return absl::InvalidArgumentError("evaluate: theta dimension mismatch");
  }
  const Eigen::VectorXd scores = scorer.Scores(theta.theta, test.features());
  size_t correct = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double predicted = scores[i] >= 0.0 ? 1.0 : -1.0;
    if (predicted == test.labels()[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

absl::StatusOr<Evaluation> Evaluate(const ModelParams& theta, const Dataset& test,
                                    const Dataset& train, const LossSpec& loss,
                                    double objective_min) {
  Evaluation out;
  ASSIGN_OR_RETURN(out.accuracy, Accuracy(theta, test, loss));
  ASSIGN_OR_RETURN(EmpiricalRisk objective, EmpiricalRisk::Create(train, loss));
  out.optimality_gap = objective.Value(theta.theta) - objective_min;
  return out;
}

absl::StatusOr<TrainConfig> SelectHyperparameters(const Dataset& train, const LossSpec& loss,
                                                  const TrainConfig& base,
                                                  const HyperparameterGrid& grid) {
  RETURN_IF_ERROR(base.Validate());
  if (grid.learning_rates.empty() || grid.steps.empty()) {
    return absl::InvalidArgumentError("grid search: empty grid");
  }
  ASSIGN_OR_RETURN(TrainTestSplit folds,
                   Split(train, SplitSpec{grid.validation_fraction,
                                          DeriveSeed(base.seed, {0x4753})}));
  ASSIGN_OR_RETURN(EmpiricalRisk fit, EmpiricalRisk::Create(folds.train, loss));
  ASSIGN_OR_RETURN(EmpiricalRisk held_out, EmpiricalRisk::Create(folds.test, loss));
  TrainConfig best = base;
  double best_loss = std::numeric_limits<double>::infinity();
  for (double alpha : grid.learning_rates) {
    for (int64_t steps : grid.steps) {
      TrainConfig candidate = base;
      candidate.learning_rate = alpha;
      candidate.steps = steps;
      absl::StatusOr<TrainResult> run = TrainGd(fit, candidate, train.dim());
      if (!run.ok()) continue;
      const double v = held_out.Value(run->params.theta);
      if (v < best_loss) {
        best_loss = v;
        best = candidate;
      }
    }
  }
  if (!std::isfinite(best_loss)) {
    return absl::InternalError("grid search: every candidate failed");
  }
  return best;
}

}  // namespace dperm
