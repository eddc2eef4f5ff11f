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

#ifndef DPERM_LOSSES_H_
#define DPERM_LOSSES_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "dperm/data.h"

namespace dperm {

enum class LossFamily { kLogistic, kLogisticL2, kMlp };

const char* LossFamilyName(LossFamily family);

struct StronglyConvex {
  double delta = 0.0;
};
struct PolyakLojasiewicz {
  double mu = 0.0;
};
using Convexity = std::variant<std::monostate, StronglyConvex, PolyakLojasiewicz>;

// A margin loss l(y * f(x)) together with the analytic constants the privacy
// calibration consumes. `lipschitz` is G and `smoothness` is L, both for unit
// ball inputs.
struct LossSpec {
  LossFamily family = LossFamily::kLogistic;
  double lipschitz = 1.0;
  double smoothness = 0.25;
  Convexity convexity;
  double per_sample_inf = 0.0;
  double reg_lambda = 0.0;
  size_t hidden_width = 0;

  static LossSpec Logistic();
  static absl::StatusOr<LossSpec> LogisticL2(double reg_lambda);
  // G and L are declared, not certified; DP mechanisms clip per-sample
  // gradients to `lipschitz` for this family.
  static absl::StatusOr<LossSpec> Mlp(size_t hidden_width, double lipschitz,
                                      double smoothness, Convexity convexity = {});

  bool is_linear() const { return family != LossFamily::kMlp; }
  bool is_convex() const { return family != LossFamily::kMlp; }

  // Number of parameters for d input features.
  size_t ParameterCount(size_t d) const;

  // Strong convexity constant, or the PL constant (strong convexity implies
  // PL with the same constant). Empty when no curvature is asserted.
  std::optional<double> PlConstant() const;

  // Smoothness of the averaged objective when rows have norm <= max_row_norm.
  double ObjectiveSmoothness(double max_row_norm = 1.0) const;
};

// Parameter vector with its projection radius D.
struct ModelParams {
  Eigen::VectorXd theta;
  double radius = 1.0;
};

// Euclidean projection onto the ball of radius `radius`.
ModelParams ProjectToBall(const ModelParams& params);
void ProjectInPlace(Eigen::VectorXd& theta, double radius);

// log(1 + exp(-margin)), stable for any finite margin.
double LogisticLoss(double margin);
// Derivative of LogisticLoss with respect to the margin, in [-1, 0].
double LogisticLossDerivative(double margin);

// Model output f(x): theta.x for linear families, the network output for mlp.
absl::StatusOr<double> ModelScore(const LossSpec& spec, const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& x);

absl::StatusOr<double> LossValue(const LossSpec& spec, const ModelParams& params,
                                 const Eigen::VectorXd& x, double y);

absl::StatusOr<Eigen::VectorXd> LossGradient(const LossSpec& spec,
                                             const ModelParams& params,
                                             const Eigen::VectorXd& x, double y);

// A differentiable function of the parameter vector.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual size_t dimension() const = 0;
  virtual double Value(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd Gradient(const Eigen::VectorXd& theta) const = 0;
};

// (1/n) sum_i l(theta; x_i, y_i) [+ (1/n) b.theta].
class EmpiricalRisk final : public Objective {
 public:
  struct Options {
    // Linear term b of objective perturbation; empty for none.
    Eigen::VectorXd linear_term;
    // When set, each per-sample gradient is rescaled to at most this norm.
    std::optional<double> clip_norm;
  };

  static absl::StatusOr<EmpiricalRisk> Create(Dataset data, LossSpec spec,
                                              Options options);
  static absl::StatusOr<EmpiricalRisk> Create(Dataset data, LossSpec spec) {
    return Create(std::move(data), std::move(spec), Options{});
  }

  size_t dimension() const override { return dimension_; }
  double Value(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd Gradient(const Eigen::VectorXd& theta) const override;

  // Hessian of the unclipped objective; linear families only.
  absl::StatusOr<Eigen::MatrixXd> Hessian(const Eigen::VectorXd& theta) const;

  // Per-sample losses, in row order.
  Eigen::VectorXd SampleLosses(const Eigen::VectorXd& theta) const;
  // Model outputs f(x_i) for every row of `x`.
  Eigen::VectorXd Scores(const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) const;

  const Dataset& data() const { return data_; }
  const LossSpec& spec() const { return spec_; }

 private:
  EmpiricalRisk(Dataset data, LossSpec spec, Options options, size_t dimension)
      : data_(std::move(data)), spec_(std::move(spec)),
        options_(std::move(options)), dimension_(dimension) {}

  Eigen::VectorXd ClippedGradient(const Eigen::VectorXd& theta) const;

  Dataset data_;
  LossSpec spec_;
  Options options_;
  size_t dimension_;
};

// (delta/2) ||theta - center||^2. Test and calibration fixture.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(double delta, Eigen::VectorXd center)
      : delta_(delta), center_(std::move(center)) {}
  size_t dimension() const override { return static_cast<size_t>(center_.size()); }
  double Value(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd Gradient(const Eigen::VectorXd& theta) const override;

 private:
  double delta_;
  Eigen::VectorXd center_;
};

struct PlReport {
  double mu = 0.0;
  // ||grad L||^2 - 2 mu (L - L*) at each probe.
  std::vector<double> slacks;
  double min_slack = 0.0;
  bool pass = false;
};

inline constexpr double kPlSlackTolerance = 1e-9;

// Checks the Polyak-Lojasiewicz inequality at each probe using the curvature
// constant declared in `spec`. `objective_min` is L* for `objective`.
absl::StatusOr<PlReport> CheckPl(const LossSpec& spec, const Objective& objective,
                                 double objective_min,
                                 const std::vector<ModelParams>& probes);

// Central differences with step h, one coordinate at a time.
Eigen::VectorXd FiniteDifferenceGradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& theta, double h = 1e-6);

// ||a - b|| / max(||b||, floor).
double RelativeError(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                     double floor = 1e-4);

}  // namespace dperm

#endif  // DPERM_LOSSES_H_
