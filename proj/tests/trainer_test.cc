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
#include <random>

#include "dperm/data.h"
#include "dperm/losses.h"
#include "dperm/rng.h"
#include "gtest/gtest.h"

namespace dperm {
namespace {

Dataset OnePoint() {
  return *Dataset::CreateUnchecked(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1));
}

TEST(TrainGdTest, OneLogisticStep) {
  const EmpiricalRisk risk = *EmpiricalRisk::Create(OnePoint(), LossSpec::Logistic());
  TrainConfig config;
  config.steps = 1;
  config.learning_rate = 1.0;
  const TrainResult result = *TrainGd(risk, config, 1);
  EXPECT_DOUBLE_EQ(result.params.theta[0], 0.5);
  ASSERT_EQ(result.loss_curve.size(), 1u);
  EXPECT_DOUBLE_EQ(result.loss_curve[0], LogisticLoss(0.5));
}

TEST(TrainGdTest, TinyStepBarelyMoves) {
  const EmpiricalRisk risk = *EmpiricalRisk::Create(OnePoint(), LossSpec::Logistic());
  TrainConfig config;
  config.steps = 1;
  config.learning_rate = 1e-12;
  EXPECT_LT(std::abs(TrainGd(risk, config, 1)->params.theta[0]), 1e-10);
}

TEST(TrainGdTest, QuadraticConvergesInOneStep) {
  const double delta = 0.4;
  const Eigen::Vector3d center(1.0, -0.5, 2.0);
  const QuadraticObjective quad(delta, center);
  TrainConfig config;
  config.steps = 1;
  config.learning_rate = 1.0 / delta;
  const TrainResult result = *TrainGd(quad, config, 3);
  EXPECT_LT((result.params.theta - center).norm(), 1e-15);
}

TEST(TrainGdTest, ProjectsEveryStep) {
  const QuadraticObjective quad(1.0, Eigen::Vector2d(30.0, 40.0));
  TrainConfig config;
  config.steps = 5;
  config.learning_rate = 1.0;
  config.radius = 5.0;
  const TrainResult result = *TrainGd(quad, config, 2);
  EXPECT_NEAR(result.params.theta[0], 3.0, 1e-14);
  EXPECT_NEAR(result.params.theta[1], 4.0, 1e-14);
}

TEST(TrainGdTest, ConfigValidation) {
  TrainConfig config;
  config.steps = 0;
  EXPECT_FALSE(config.Validate().ok());
  config.steps = 1;
  config.learning_rate = 0.0;
  EXPECT_FALSE(config.Validate().ok());
  config.learning_rate = 0.1;
  config.radius = -1.0;
  EXPECT_FALSE(config.Validate().ok());
}

class NanAfter final : public Objective {
 public:
  size_t dimension() const override { return 1; }
  double Value(const Eigen::VectorXd& theta) const override { return theta[0]; }
  Eigen::VectorXd Gradient(const Eigen::VectorXd& theta) const override {
    return Eigen::VectorXd::Constant(1, theta[0] < -2.5 ? NAN : 1.0);
  }
};

TEST(TrainGdTest, NonFiniteGradientNamesIteration) {
  TrainConfig config;
  config.steps = 10;
  config.learning_rate = 1.0;
  absl::StatusOr<TrainResult> result = TrainGd(NanAfter(), config, 1);
  ASSERT_FALSE(result.ok());
  EXPECT_NE(result.status().message().find("iteration 3"), std::string::npos)
      << result.status().message();
}

TEST(TrainGdTest, MonotoneOnLogisticL2) {
  const double lambda = 0.01;
  const Dataset data = *MakeSeparableBlobs(300, 6, 2);
  const LossSpec spec = *LossSpec::LogisticL2(lambda);
  const EmpiricalRisk risk = *EmpiricalRisk::Create(data, spec);
  TrainConfig config;
  config.steps = 300;
  config.learning_rate = 1.0 / (spec.smoothness + lambda);
  config.radius = 1.0 / lambda;
  const TrainResult result = *TrainGd(risk, config, 6);
  // Once converged the value only moves by summation rounding.
  for (size_t t = 1; t < result.loss_curve.size(); ++t)
    EXPECT_LE(result.loss_curve[t], result.loss_curve[t - 1] * (1 + 1e-15));
}

TEST(OracleOptimumTest, Quadratic) {
  const Eigen::Vector2d center(0.3, -4.0);
  const OracleResult r = *OracleOptimum(QuadraticObjective(2.0, center), 2.0, {.tolerance = 1e-12});
  EXPECT_LT((r.theta_star.theta - center).norm(), 1e-12);
  EXPECT_LT(r.objective_min, 1e-20);
}

TEST(OracleOptimumTest, ToySetReachesTolerance) {
  Eigen::MatrixXd x(4, 2);
  x << 0.5, 0.5, 0.4, -0.2, -0.5, -0.3, -0.1, -0.6;
  const Dataset data = *Dataset::Create(x, Eigen::Vector4d(1, 1, -1, -1));
  const OracleResult r = *OracleOptimum(data, *LossSpec::LogisticL2(0.1), {.tolerance = 1e-9});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.gradient_norm, 1e-9);
}

TEST(OracleOptimumTest, CertifiedGapHoldsAgainstTighterRun) {
  const double lambda = 0.05;
  const Dataset data = *MakeSeparableBlobs(200, 5, 4);
  const LossSpec spec = *LossSpec::LogisticL2(lambda);
  const OracleResult loose = *OracleOptimum(data, spec, {.tolerance = 1e-5});
  const OracleResult tight = *OracleOptimum(data, spec, {.tolerance = 1e-6});
  ASSERT_TRUE(loose.certified_gap_bound.has_value());
  EXPECT_LE(*loose.certified_gap_bound, 1e-10 / (2 * lambda));
  EXPECT_DOUBLE_EQ(*loose.certified_gap_bound,
                   loose.gradient_norm * loose.gradient_norm / (2 * lambda));
  EXPECT_LE(loose.objective_min - tight.objective_min, *loose.certified_gap_bound);
  EXPECT_GE(loose.objective_min - tight.objective_min, -*tight.certified_gap_bound);
}

TEST(OracleOptimumTest, NewtonAgreesWithGd) {
  const Dataset data = *MakeNoisyMargin(300, 4, 6);
  const LossSpec spec = *LossSpec::LogisticL2(0.01);
  const OracleResult gd = *OracleOptimum(data, spec, {.tolerance = 1e-10});
  const OracleResult newton = *MinimizeNewton(*EmpiricalRisk::Create(data, spec));
  EXPECT_NEAR(gd.objective_min, newton.objective_min, 1e-14);
  EXPECT_LT((gd.theta_star.theta - newton.theta_star.theta).norm(), 1e-6);
}

TEST(OracleOptimumTest, MlpFindsStationaryPoint) {
  const Dataset data = *MakeSeparableBlobs(100, 3, 1);
  const LossSpec spec = *LossSpec::Mlp(3, 1.0, 1.0);
  const OracleResult r =
      *OracleOptimum(data, spec, {.tolerance = 1e-4, .require_convergence = false, .seed = 3});
  EXPECT_LT(r.objective_min, std::log(2.0));
  for (size_t t = 1; t < r.loss_curve.size(); ++t) EXPECT_LE(r.loss_curve[t], r.loss_curve[t - 1]);
}

TEST(EvaluateTest, OptimumAndPerfectClassifier) {
  const double lambda = 0.1;
  const Dataset data = *MakeSeparableBlobs(200, 4, 8);
  const TrainTestSplit split = *Split(data, {0.25, 1});
  const LossSpec spec = *LossSpec::LogisticL2(lambda);
  const OracleResult opt = *OracleOptimum(split.train, spec, {.tolerance = 1e-10});
  const Evaluation e = *Evaluate(opt.theta_star, split.test, split.train, spec, opt.objective_min);
  EXPECT_LE(std::abs(e.optimality_gap), *opt.certified_gap_bound + 1e-15);
  EXPECT_EQ(e.accuracy, 1.0);
  // Gap does not depend on the test set; accuracy does not depend on train.
  const Evaluation other =
      *Evaluate(opt.theta_star, split.train, split.train, spec, opt.objective_min);
  EXPECT_EQ(other.optimality_gap, e.optimality_gap);
  const TrainTestSplit split2 = *Split(data, {0.25, 2});
  EXPECT_EQ(*Accuracy(opt.theta_star, split.test, spec), e.accuracy);
  EXPECT_EQ(Evaluate(opt.theta_star, split.test, split2.train, spec, 0.0)->accuracy, e.accuracy);
}

TEST(EvaluateTest, TieCountsPositive) {
  const Dataset test = *Dataset::CreateUnchecked(Eigen::MatrixXd::Ones(2, 2), Eigen::Vector2d(1, -1));
  EXPECT_EQ(*Accuracy({Eigen::Vector2d::Zero(), 1.0}, test, LossSpec::Logistic()), 0.5);
}

TEST(EvaluateTest, RandomThetaOnRandomLabels) {
  Engine engine(17);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(200, 5);
  Eigen::VectorXd y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) x(i, j) = normal(engine);
    y[i] = i % 2 ? 1.0 : -1.0;
  }
  const Dataset test = Normalize(*Dataset::Create(x, y));
  Eigen::VectorXd theta(5);
  for (Eigen::Index j = 0; j < 5; ++j) theta[j] = normal(engine);
  const double acc = *Accuracy({theta, 10.0}, test, LossSpec::Logistic());
  EXPECT_NEAR(acc, 0.5, 0.12);
}

TEST(EvaluateTest, EmptyTestSetIsError) {
  const Dataset empty =
      *Dataset::CreateUnchecked(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0));
  EXPECT_FALSE(Accuracy({Eigen::Vector2d::Zero(), 1.0}, empty, LossSpec::Logistic()).ok());
}

TEST(SelectHyperparametersTest, DeterministicAndFromGrid) {
  const Dataset data = *MakeNoisyMargin(200, 4, 2);
  const LossSpec spec = *LossSpec::LogisticL2(0.01);
  TrainConfig base;
  base.seed = 9;
  const HyperparameterGrid grid{{0.1, 1.0}, {10, 100}, 0.2};
  const TrainConfig a = *SelectHyperparameters(data, spec, base, grid);
  const TrainConfig b = *SelectHyperparameters(data, spec, base, grid);
  EXPECT_EQ(a.learning_rate, b.learning_rate);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_TRUE(a.learning_rate == 0.1 || a.learning_rate == 1.0);
  EXPECT_TRUE(a.steps == 10 || a.steps == 100);
  // More steps at the larger rate fit this well-conditioned problem best.
  EXPECT_EQ(a.steps, 100);
}

}  // namespace
}  // namespace dperm
