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

#include "dperm/mechanisms.h"

#include <cmath>
#include <limits>
#include <random>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "dperm/rng.h"
#include "dperm/status_macros.h"

namespace dperm {

std::string Mechanism::Name() const {
  switch (kind) {
    case MechanismKind::kNone:
      return "none";
    case MechanismKind::kInput:
      return "input";
    case MechanismKind::kOutput:
      return "output";
    case MechanismKind::kObjective:
      return "objective";
    case MechanismKind::kGradient:
      return gradient_variant == GradientVariant::kComposed ? "gradient" : "gradient-n2";
  }
  return "unknown";
}

absl::StatusOr<Mechanism> Mechanism::Parse(absl::string_view name) {
  if (name == "none") return Mechanism{MechanismKind::kNone};
  if (name == "input") return Mechanism{MechanismKind::kInput};
  if (name == "output") return Mechanism{MechanismKind::kOutput};
  if (name == "objective") return Mechanism{MechanismKind::kObjective};
  if (name == "gradient") return Mechanism{MechanismKind::kGradient, GradientVariant::kComposed};
  if (name == "gradient-n2") {
    return Mechanism{MechanismKind::kGradient, GradientVariant::kSquaredN};
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown mechanism '", name, "'"));
}

namespace {

void FillGaussian(Engine& engine, double stddev, double* out, Eigen::Index count) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 0; k < count; ++k) out[k] = stddev * normal(engine);
}

constexpr uint64_t kSharedRowKey = std::numeric_limits<uint64_t>::max();

}  // namespace

NoiseDraw DrawGaussian(uint64_t seed, Eigen::Index rows, Eigen::Index cols, double variance) {
  NoiseDraw draw{seed, Eigen::MatrixXd::Zero(rows, cols)};
  if (variance > 0.0) {
    Engine engine(seed);
    // Row-major fill order so a row vector and a 1 x p matrix agree.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp(rows, cols);
    FillGaussian(engine, std::sqrt(variance), tmp.data(), tmp.size());
    draw.values = tmp;
  }
  return draw;
}

Dataset PerturbInputs(const Dataset& dataset, double sigma_sq, uint64_t seed,
                      NoiseLayout layout) {
  if (!(sigma_sq > 0.0)) return dataset;
  const auto d = static_cast<Eigen::Index>(dataset.dim());
  Eigen::MatrixXd features = dataset.features();
  if (layout == NoiseLayout::kShared) {
    const NoiseDraw z = DrawGaussian(
        DeriveSeed(seed, {static_cast<uint64_t>(SeedTag::kInputNoise), kSharedRowKey}), 1, d,
        sigma_sq);
    features.rowwise() += z.values.row(0);
  } else {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const uint64_t row_id = dataset.row_ids()[static_cast<size_t>(i)];
      const NoiseDraw z = DrawGaussian(
          DeriveSeed(seed, {static_cast<uint64_t>(SeedTag::kInputNoise), row_id}), 1, d,
          sigma_sq);
      features.row(i) += z.values.row(0);
    }
  }
  return dataset.WithFeatures(std::move(features));
}

ModelParams OutputPerturb(const ModelParams& theta_star, double variance, uint64_t seed) {
  ModelParams out = theta_star;
  if (variance > 0.0) {
    const NoiseDraw z = DrawGaussian(DeriveSeed(seed, SeedTag::kOutputNoise),
                                     theta_star.theta.size(), 1, variance);
    out.theta += z.values.col(0);
  }
  ProjectInPlace(out.theta, out.radius);
  return out;
}

absl::StatusOr<EmpiricalRisk> TrainingObjective(const Dataset& dataset, const LossSpec& loss) {
  EmpiricalRisk::Options options;
  if (!loss.is_linear()) options.clip_norm = loss.lipschitz;
  return EmpiricalRisk::Create(dataset, loss, std::move(options));
}

absl::StatusOr<EmpiricalRisk> PerturbedObjective(const Dataset& dataset, const LossSpec& loss,
                                                 double variance, uint64_t seed) {
  if (!loss.is_convex()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "objective perturbation requires a convex loss, got ", LossFamilyName(loss.family)));
  }
  EmpiricalRisk::Options options;
  if (variance > 0.0) {
    const auto p = static_cast<Eigen::Index>(loss.ParameterCount(dataset.dim()));
    options.linear_term =
        DrawGaussian(DeriveSeed(seed, SeedTag::kObjectiveNoise), p, 1, variance).values.col(0);
  }
  return EmpiricalRisk::Create(dataset, loss, std::move(options));
}

absl::StatusOr<TrainResult> ObjectivePerturb(const Dataset& dataset, const LossSpec& loss,
                                             double variance, uint64_t seed,
                                             const TrainConfig& config) {
  ASSIGN_OR_RETURN(EmpiricalRisk objective, PerturbedObjective(dataset, loss, variance, seed));
  return TrainGd(objective, config, dataset.dim());
}

ModelParams GradientPerturbStep(const ModelParams& theta_t, const Eigen::VectorXd& grad,
                                double variance, double learning_rate, uint64_t seed,
                                int64_t step_index) {
  if (!(variance > 0.0)) return GdStep(theta_t, grad, learning_rate);
  const NoiseDraw z = DrawGaussian(
      DeriveSeed(seed, {static_cast<uint64_t>(SeedTag::kGradientNoise),
                        static_cast<uint64_t>(step_index)}),
      grad.size(), 1, variance);
  return GdStep(theta_t, grad + z.values.col(0), learning_rate);
}

absl::StatusOr<TrainResult> TrainGradientPerturbed(const Objective& objective,
                                                   const TrainConfig& config, double variance,
                                                   uint64_t seed, size_t input_dim) {
  const double alpha = config.learning_rate;
  return TrainGd(objective, config, input_dim,
                 [=](const ModelParams& theta, const Eigen::VectorXd& grad, int64_t t) {
                   return GradientPerturbStep(theta, grad, variance, alpha, seed, t);
                 });
}

namespace {

double Sq(double v) { return v * v; }

}  // namespace

double OutputPerturbationVariance(const BaselineInputs& in) {
  const double eps = in.params.epsilon;
  const double n = static_cast<double>(in.n);
  return Sq(in.lipschitz) * Sq(1.0 + in.smoothness / in.strong_convexity) *
         std::log(2.0 / in.params.delta) / (n * n * Sq(in.smoothness) * eps * eps);
}

double ObjectivePerturbationVariance(const BaselineInputs& in) {
  const double eps = in.params.epsilon;
  return Sq(in.lipschitz) * (eps + std::log(4.0 / Sq(in.params.delta))) / (eps * eps);
}

double GradientPerturbationVariance(const BaselineInputs& in, GradientVariant variant) {
  const double eps = in.params.epsilon;
  const double n = static_cast<double>(in.n);
  const double log_inv_delta = -std::log(in.params.delta);
  if (variant == GradientVariant::kComposed) {
    return Sq(in.lipschitz) * static_cast<double>(in.steps) * log_inv_delta / (n * n * eps * eps);
  }
  return Sq(in.lipschitz) * n * n * std::log(n / in.params.delta) * log_inv_delta / (eps * eps);
}

}  // namespace dperm
