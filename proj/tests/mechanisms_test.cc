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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dperm/data.h"
#include "dperm/losses.h"
#include "dperm/rng.h"
#include "dperm/trainer.h"
#include "gtest/gtest.h"

namespace dperm {
namespace {

bool BitEqual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

bool BitEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

TEST(MechanismTest, NamesRoundTrip) {
  for (const char* name : {"none", "input", "output", "objective", "gradient", "gradient-n2"}) {
    EXPECT_EQ(Mechanism::Parse(name)->Name(), name);
  }
  EXPECT_FALSE(Mechanism::Parse("laplace").ok());
}

TEST(DrawGaussianTest, Deterministic) {
  const NoiseDraw a = DrawGaussian(42, 3, 4, 2.0);
  const NoiseDraw b = DrawGaussian(42, 3, 4, 2.0);
  EXPECT_TRUE(BitEqual(a.values, b.values));
  EXPECT_FALSE(BitEqual(a.values, DrawGaussian(43, 3, 4, 2.0).values));
  EXPECT_TRUE(DrawGaussian(42, 3, 4, 0.0).values.isZero(0.0));
  // Row-major fill: a 1 x 4 row equals a 4 x 1 column read in order.
  EXPECT_TRUE(BitEqual(DrawGaussian(7, 1, 4, 1.0).values.transpose(),
                       DrawGaussian(7, 4, 1, 1.0).values));
}

TEST(PerturbInputsTest, ZeroNoiseAndDeterminism) {
  const Dataset data = *MakeSeparableBlobs(50, 3, 1);
  EXPECT_TRUE(BitEqual(PerturbInputs(data, 0.0, 5).features(), data.features()));
  const Dataset a = PerturbInputs(data, 0.3, 5);
  const Dataset b = PerturbInputs(data, 0.3, 5);
  EXPECT_TRUE(BitEqual(a.features(), b.features()));
  EXPECT_TRUE(BitEqual(a.labels(), data.labels()));
  EXPECT_FALSE(BitEqual(a.features(), PerturbInputs(data, 0.3, 6).features()));
}

TEST(PerturbInputsTest, MomentsMatch) {
  constexpr Eigen::Index kN = 10000;
  Eigen::VectorXd y(kN);
  for (Eigen::Index i = 0; i < kN; ++i) y[i] = i % 2 ? 1.0 : -1.0;
  const Dataset data = *Dataset::Create(Eigen::MatrixXd::Zero(kN, 1), y);
  const Eigen::VectorXd z = PerturbInputs(data, 1.0, 2024).features().col(0);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / (kN - 1);
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(PerturbInputsTest, CommutesWithRowPermutation) {
  const Dataset data = *MakeNoisyMargin(40, 3, 2);
  std::vector<size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), Engine(3));
  const Dataset perturbed_then_permuted = PerturbInputs(data, 0.5, 11).Select(order);
  const Dataset permuted_then_perturbed = PerturbInputs(data.Select(order), 0.5, 11);
  EXPECT_TRUE(BitEqual(perturbed_then_permuted.features(), permuted_then_perturbed.features()));
}

TEST(PerturbInputsTest, SharedLayoutAddsOneDraw) {
  const Dataset data = *MakeNoisyMargin(20, 3, 2);
  const Eigen::MatrixXd diff =
      PerturbInputs(data, 0.5, 11, NoiseLayout::kShared).features() - data.features();
  for (Eigen::Index i = 1; i < diff.rows(); ++i)
    EXPECT_LT((diff.row(i) - diff.row(0)).norm(), 1e-12);
  const Eigen::MatrixXd independent = PerturbInputs(data, 0.5, 11).features() - data.features();
  EXPECT_GT((independent.row(1) - independent.row(0)).norm(), 1e-3);
}

TEST(PerturbInputsTest, GradientIdentityOnPerturbedRows) {
  const Dataset data = *MakeSeparableBlobs(60, 4, 9);
  const Dataset noisy = PerturbInputs(data, 0.2, 4);
  const LossSpec spec = LossSpec::Logistic();
  const EmpiricalRisk risk = *EmpiricalRisk::Create(noisy, spec);
  Engine engine(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd theta(4);
    for (Eigen::Index j = 0; j < 4; ++j) theta[j] = normal(engine);
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(4);
    for (Eigen::Index i = 0; i < 60; ++i) {
      const Eigen::VectorXd x = noisy.features().row(i).transpose();
      const double y = noisy.labels()[i];
      manual += y * LogisticLossDerivative(y * theta.dot(x)) * x;
    }
    manual /= 60.0;
    const Eigen::VectorXd numeric = FiniteDifferenceGradient(
        [&](const Eigen::VectorXd& t) { return risk.Value(t); }, theta);
    EXPECT_LT(RelativeError(risk.Gradient(theta), manual), 1e-12);
    EXPECT_LT(RelativeError(risk.Gradient(theta), numeric), 1e-5);
  }
}

TEST(OutputPerturbTest, ZeroNoiseAndVariance) {
  const ModelParams theta{Eigen::Vector3d(0.1, 0.2, -0.3), 10.0};
  EXPECT_TRUE(BitEqual(OutputPerturb(theta, 0.0, 1).theta, theta.theta));
  EXPECT_TRUE(BitEqual(OutputPerturb(theta, 0.5, 1).theta, OutputPerturb(theta, 0.5, 1).theta));
  constexpr int kDraws = 10000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sum_sq = Eigen::Vector3d::Zero();
  for (int k = 0; k < kDraws; ++k) {
    const Eigen::VectorXd z = OutputPerturb(theta, 0.5, DeriveSeed(99, {uint64_t(k)})).theta - theta.theta;
    sum += z;
    sum_sq += z.cwiseProduct(z);
  }
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double mean = sum[j] / kDraws;
    const double var = (sum_sq[j] - kDraws * mean * mean) / (kDraws - 1);
    EXPECT_NEAR(var, 0.5, 0.025);
  }
}

TEST(ObjectivePerturbTest, GradientShiftsByNoiseOverN) {
  const Dataset data = *MakeSeparableBlobs(80, 3, 5);
  const LossSpec spec = *LossSpec::LogisticL2(0.1);
  const EmpiricalRisk plain = *EmpiricalRisk::Create(data, spec);
  const EmpiricalRisk noisy = *PerturbedObjective(data, spec, 2.0, 7);
  const Eigen::VectorXd z =
      DrawGaussian(DeriveSeed(7, SeedTag::kObjectiveNoise), 3, 1, 2.0).values.col(0);
  for (double s : {-1.0, 0.0, 2.0}) {
    const Eigen::VectorXd theta = Eigen::Vector3d(s, 1.0, -0.5 * s);
    EXPECT_LT((noisy.Gradient(theta) - plain.Gradient(theta) - z / 80.0).norm(), 1e-15);
  }
}

TEST(ObjectivePerturbTest, QuadraticMinimizer) {
  // Zero features turn logistic_l2 into ln 2 + (lambda/2) |theta|^2.
  const double lambda = 0.5;
  constexpr int kN = 10;
  Eigen::VectorXd y(kN);
  for (int i = 0; i < kN; ++i) y[i] = i % 2 ? 1.0 : -1.0;
  const Dataset data = *Dataset::Create(Eigen::MatrixXd::Zero(kN, 2), y);
  TrainConfig config;
  config.steps = 3;
  config.learning_rate = 1.0 / lambda;
  config.radius = 1e6;
  const LossSpec spec = *LossSpec::LogisticL2(lambda);
  const TrainResult result = *ObjectivePerturb(data, spec, 4.0, 12, config);
  const Eigen::VectorXd z =
      DrawGaussian(DeriveSeed(12, SeedTag::kObjectiveNoise), 2, 1, 4.0).values.col(0);
  EXPECT_LT((result.params.theta + z / (kN * lambda)).norm(), 1e-14);
}

TEST(ObjectivePerturbTest, RejectsMlp) {
  const Dataset data = *MakeSeparableBlobs(20, 2, 5);
  EXPECT_FALSE(PerturbedObjective(data, *LossSpec::Mlp(2, 1, 1), 1.0, 1).ok());
}

TEST(GradientPerturbTest, ZeroNoiseIsPlainStep) {
  const ModelParams theta{Eigen::Vector2d(1.0, 2.0), 10.0};
  const Eigen::Vector2d grad(0.3, -0.1);
  EXPECT_TRUE(BitEqual(GradientPerturbStep(theta, grad, 0.0, 0.5, 3, 0).theta,
                       GdStep(theta, grad, 0.5).theta));
  EXPECT_TRUE(BitEqual(GradientPerturbStep(theta, grad, 1.0, 0.5, 3, 4).theta,
                       GradientPerturbStep(theta, grad, 1.0, 0.5, 3, 4).theta));
  EXPECT_FALSE(BitEqual(GradientPerturbStep(theta, grad, 1.0, 0.5, 3, 4).theta,
                        GradientPerturbStep(theta, grad, 1.0, 0.5, 3, 5).theta));
}

TEST(GradientPerturbTest, ExpectedSquaredStep) {
  constexpr int kDraws = 10000;
  const double alpha = 0.3, variance = 0.8;
  const ModelParams theta{Eigen::VectorXd::Zero(5), 1e6};
  double sum = 0.0;
  for (int k = 0; k < kDraws; ++k) {
    sum += GradientPerturbStep(theta, Eigen::VectorXd::Zero(5), variance, alpha, 21, k)
               .theta.squaredNorm();
  }
  const double expected = alpha * alpha * 5 * variance;
  EXPECT_NEAR(sum / kDraws / expected, 1.0, 0.05);
}

TEST(ZeroNoiseTest, EveryMechanismMatchesNonPrivatePipeline) {
  const Dataset data = *MakeSeparableBlobs(100, 4, 3);
  const LossSpec spec = *LossSpec::LogisticL2(0.05);
  TrainConfig config;
  config.steps = 40;
  config.seed = 77;
  config.radius = 20.0;
  const EmpiricalRisk base_objective = *TrainingObjective(data, spec);
  const TrainResult reference = *TrainGd(base_objective, config, 4);

  const Dataset input = PerturbInputs(data, 0.0, 77);
  const TrainResult via_input = *TrainGd(*TrainingObjective(input, spec), config, 4);
  EXPECT_TRUE(BitEqual(via_input.params.theta, reference.params.theta));
  EXPECT_TRUE(BitEqual(via_input.loss_curve, reference.loss_curve));

  const TrainResult via_objective = *ObjectivePerturb(data, spec, 0.0, 77, config);
  EXPECT_TRUE(BitEqual(via_objective.params.theta, reference.params.theta));
  EXPECT_TRUE(BitEqual(via_objective.loss_curve, reference.loss_curve));

  const TrainResult via_gradient = *TrainGradientPerturbed(base_objective, config, 0.0, 77, 4);
  EXPECT_TRUE(BitEqual(via_gradient.params.theta, reference.params.theta));
  EXPECT_TRUE(BitEqual(via_gradient.loss_curve, reference.loss_curve));

  EXPECT_TRUE(BitEqual(OutputPerturb(reference.params, 0.0, 77).theta, reference.params.theta));
}

TEST(BaselineVarianceTest, HandValues) {
  BaselineInputs in;
  in.params = *PrivacyParams::Create(0.5, 0.01);
  in.lipschitz = 2.0;
  in.smoothness = 0.25;
  in.strong_convexity = 0.5;
  in.n = 10;
  in.steps = 20;
  // 4 * 1.5^2 * ln(200) / (100 * 0.0625 * 0.25)
  EXPECT_NEAR(OutputPerturbationVariance(in), 9.0 * std::log(200.0) / 1.5625, 1e-12);
  // 4 * (0.5 + ln(40000)) / 0.25
  EXPECT_NEAR(ObjectivePerturbationVariance(in), 16.0 * (0.5 + std::log(40000.0)), 1e-12);
  // 4 * 20 * ln(100) / (100 * 0.25)
  EXPECT_NEAR(GradientPerturbationVariance(in, GradientVariant::kComposed),
              3.2 * std::log(100.0), 1e-12);
  // 4 * 100 * ln(1000) * ln(100) / 0.25
  EXPECT_NEAR(GradientPerturbationVariance(in, GradientVariant::kSquaredN),
              1600.0 * std::log(1000.0) * std::log(100.0), 1e-8);
}

}  // namespace
}  // namespace dperm
