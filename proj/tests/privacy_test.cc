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

#include "dperm/privacy.h"

#include <cmath>

#include "grids.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace dperm {
namespace {

using testing::CalibrationGrid;
using testing::CalibrationPoint;

double Rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

NoiseScale Calibrate(const CalibrationPoint& p, const CalibrationRegime& regime,
                     double c = 1.0) {
  return *CalibrateSigma(*PrivacyParams::Create(p.epsilon, p.delta), p.steps, p.n,
                         p.lipschitz, regime, c);
}

TEST(CalibrateSigmaTest, WorkedValue) {
  const CalibrationPoint p{0.1, 1e-5, 100, 1000, 1.0, 0.01};
  // 100 ln(1e5) / (999000 * 0.1 * 0.01), evaluated independently.
  EXPECT_LT(Rel(Calibrate(p, StronglyConvexRegime{0.01}).sigma_sq, 1.1524449914885113), 1e-12);
  EXPECT_LT(Rel(Calibrate(p, PlRegime{}).sigma_sq, 0.11524449914885113), 1e-12);
}

TEST(CalibrateSigmaTest, MatchesReferenceOnGrid) {
  for (const CalibrationPoint& p : CalibrationGrid()) {
    const double sc = Calibrate(p, StronglyConvexRegime{p.strong_convexity}, 2.5).sigma_sq;
    const double pl = Calibrate(p, PlRegime{}, 2.5).sigma_sq;
    EXPECT_LT(Rel(sc, testing::SigmaSqReference(2.5, p.lipschitz, p.steps, p.delta, p.n,
                                                p.strong_convexity, p.epsilon)),
              1e-12);
    EXPECT_LT(Rel(pl, testing::SigmaSqReference(2.5, p.lipschitz, p.steps, p.delta, p.n, 1.0,
                                                p.epsilon)),
              1e-12);
  }
}

TEST(CalibrateSigmaTest, ScalingLaws) {
  const CalibrationPoint base{0.1, 1e-5, 100, 1000, 1.0, 0.04};
  const StronglyConvexRegime sc{0.04};
  const double s0 = Calibrate(base, sc).sigma_sq;
  CalibrationPoint p = base;
  p.epsilon *= 2;
  EXPECT_LT(Rel(Calibrate(p, sc).sigma_sq, s0 / 4), 1e-14);
  EXPECT_LT(Rel(Calibrate(p, PlRegime{}).sigma_sq, Calibrate(base, PlRegime{}).sigma_sq / 4),
            1e-14);
  p = base;
  p.steps *= 3;
  EXPECT_LT(Rel(Calibrate(p, sc).sigma_sq, 3 * s0), 1e-14);
  p = base;
  p.delta = 1e-10;
  EXPECT_LT(Rel(Calibrate(p, sc).sigma_sq, 2 * s0), 1e-14);
  p = base;
  p.n = 2000;
  EXPECT_LT(Rel(Calibrate(p, sc).sigma_sq, s0 * 1000.0 * 999.0 / (2000.0 * 1999.0)), 1e-14);
  EXPECT_LT(Rel(Calibrate(base, StronglyConvexRegime{0.16}).sigma_sq, s0 / 2), 1e-14);
}

TEST(CalibrateSigmaTest, Errors) {
  const PrivacyParams params = *PrivacyParams::Create(0.1, 1e-5);
  EXPECT_FALSE(CalibrateSigma(params, 10, 1, 1.0, PlRegime{}).ok());
  EXPECT_FALSE(CalibrateSigma(params, 10, 100, 1.0, StronglyConvexRegime{0.0}).ok());
  EXPECT_FALSE(CalibrateSigma(params, 0, 100, 1.0, PlRegime{}).ok());
  EXPECT_FALSE(CalibrateSigma(params, 10, 100, 0.0, PlRegime{}).ok());
  EXPECT_FALSE(CalibrateSigma(params, 10, 100, 1.0, PlRegime{}, 0.0).ok());
  EXPECT_FALSE(PrivacyParams::Create(0.0, 1e-5).ok());
  EXPECT_FALSE(PrivacyParams::Create(0.1, 1.0).ok());
  EXPECT_FALSE(PrivacyParams::Create(0.1, 0.0).ok());
}

TEST(GaussianRenyiTest, Values) {
  EXPECT_DOUBLE_EQ(*GaussianRenyi(2.0, 1.0, 1.0), 1.0);
  EXPECT_NEAR(testing::RenyiByQuadrature(2.0, 1.0, 1.0), 1.0, 1e-6);
  for (double order : testing::RenyiOrders()) EXPECT_EQ(*GaussianRenyi(order, 0.0, 0.7), 0.0);
  EXPECT_NEAR(*GaussianRenyi(3.0, 0.6, 0.5), 9.0 * *GaussianRenyi(3.0, 0.2, 0.5), 1e-14);
  EXPECT_FALSE(GaussianRenyi(1.0, 1.0, 1.0).ok());
  EXPECT_FALSE(GaussianRenyi(2.0, 1.0, 0.0).ok());
}

TEST(GaussianRenyiTest, MatchesQuadrature) {
  for (double order : testing::RenyiOrders())
    for (double gap : testing::RenyiGaps())
      for (double s2 : testing::RenyiVariances()) {
        const double closed = *GaussianRenyi(order, gap, s2);
        const double numeric = testing::RenyiByQuadrature(order, gap, s2);
        EXPECT_LT(std::abs(closed - numeric), 1e-6 * std::max(1.0, closed))
            << order << " " << gap << " " << s2;
      }
}

TEST(PerStepMomentBoundTest, Values) {
  EXPECT_DOUBLE_EQ(*PerStepMomentBound(1, 1.0, 1.0, 2, StronglyConvexRegime{1.0}, 1.0), 1.0);
  const StronglyConvexRegime sc{0.25};
  double last = 0.0;
  for (int64_t lambda = 1; lambda <= 64; ++lambda) {
    const double b = *PerStepMomentBound(lambda, 1.0, 0.3, 100, sc, 0.5);
    EXPECT_GT(b, last);
    last = b;
  }
  EXPECT_DOUBLE_EQ(*PerStepMomentBound(5, 1.0, 0.6, 100, sc, 0.5),
                   *PerStepMomentBound(5, 1.0, 0.3, 100, sc, 0.5) / 2);
  EXPECT_DOUBLE_EQ(*PerStepMomentBound(5, 1.0, 0.3, 100, PlRegime{}, 0.5),
                   *PerStepMomentBound(5, 1.0, 0.3, 100, sc, 0.5) * 0.5);
  EXPECT_FALSE(PerStepMomentBound(0, 1.0, 1.0, 2, PlRegime{}, 1.0).ok());
  EXPECT_FALSE(PerStepMomentBound(1, 1.0, 1.0, 1, PlRegime{}, 1.0).ok());
}

TEST(PerStepMomentBoundTest, AgreesWithGaussianMoment) {
  // lambda * D_{lambda+1} at the sensitivity 2G/n, with the variance scaled
  // by the aggregate coefficient C = ((n-1)/n) sqrt(Delta).
  const int64_t n = 50;
  const double g = 1.0, s2 = 0.2, delta = 0.09;
  for (int64_t lambda : {1, 3, 10}) {
    const double coefficient = (n - 1.0) / n * std::sqrt(delta);
    const double moment = lambda * *GaussianRenyi(lambda + 1.0, 2 * g / n, coefficient * s2);
    const double bound =
        *PerStepMomentBound(lambda, g, s2, n, StronglyConvexRegime{delta}, PerStepConstant());
    EXPECT_LT(Rel(bound, moment), 1e-12);
  }
}

TEST(ComposeAndConvertTest, Values) {
  MomentsLedger ledger = *MomentsLedger::Create({{2, 0.001}});
  const RealizedEpsilon r = *ComposeAndConvert(ledger, 100, 1e-5);
  EXPECT_NEAR(r.epsilon, (0.1 + std::log(1e5)) / 2, 1e-14);
  EXPECT_NEAR(r.epsilon, 5.806462732485114, 1e-12);
  EXPECT_EQ(r.best_lambda, 2);

  std::map<int64_t, double> zeros;
  for (int64_t l : LambdaGrid(16)) zeros[l] = 0.0;
  const RealizedEpsilon z = *ComposeAndConvert(*MomentsLedger::Create(zeros), 50, 1e-5);
  EXPECT_DOUBLE_EQ(z.epsilon, std::log(1e5) / 16);
  EXPECT_EQ(z.best_lambda, 16);

  EXPECT_FALSE(ComposeAndConvert(*MomentsLedger::Create({}), 1, 1e-5).ok());
  EXPECT_FALSE(MomentsLedger::Create({{1, -1.0}}).ok());
}

TEST(ComposeAndConvertTest, Monotone) {
  const std::vector<int64_t> grid = LambdaGrid(64);
  const MomentsLedger a =
      *MomentsLedger::ForInputPerturbation(grid, 1.0, 0.5, 200, StronglyConvexRegime{0.1}, 0.25);
  const MomentsLedger b =
      *MomentsLedger::ForInputPerturbation(grid, 1.0, 0.4, 200, StronglyConvexRegime{0.1}, 0.25);
  double last = 0.0;
  for (int64_t t : {1, 10, 100, 1000, 10000}) {
    const double ea = ComposeAndConvert(a, t, 1e-5)->epsilon;
    EXPECT_GE(ea, last);
    EXPECT_GE(ComposeAndConvert(b, t, 1e-5)->epsilon, ea);
    last = ea;
  }
  // A superset of orders never does worse.
  const MomentsLedger small =
      *MomentsLedger::ForInputPerturbation(LambdaGrid(8), 1.0, 0.5, 200, PlRegime{}, 0.25);
  const MomentsLedger large =
      *MomentsLedger::ForInputPerturbation(grid, 1.0, 0.5, 200, PlRegime{}, 0.25);
  EXPECT_LE(ComposeAndConvert(large, 5, 1e-5)->epsilon, ComposeAndConvert(small, 5, 1e-5)->epsilon);
}

TEST(MomentsLedgerTest, LinearComposition) {
  const MomentsLedger ledger = *MomentsLedger::Create({{1, 0.5}, {4, 2.0}});
  const MomentsLedger composed = ledger.Composed(7);
  EXPECT_EQ(ledger.steps_composed(), 0);
  EXPECT_EQ(composed.steps_composed(), 7);
  EXPECT_DOUBLE_EQ(composed.ComposedBound(4), 14.0);
  EXPECT_EQ(composed.lambda_grid(), (std::vector<int64_t>{1, 4}));
}

TEST(VerifyCalibrationTest, PassesOnGridWithConsistentConstants) {
  const double c1 = PerStepConstant();
  const double c = ConsistentCalibrationConstant(c1);
  for (const CalibrationPoint& p : CalibrationGrid()) {
    const PrivacyParams params = *PrivacyParams::Create(p.epsilon, p.delta);
    for (const CalibrationRegime& regime :
         {CalibrationRegime{StronglyConvexRegime{p.strong_convexity}}, CalibrationRegime{PlRegime{}}}) {
      const NoiseScale scale = Calibrate(p, regime, c);
      const CalibrationReport report = *VerifyCalibration(params, scale, {.c1 = c1});
      EXPECT_TRUE(report.pass) << p.epsilon << " " << p.delta << " " << p.steps << " " << p.n;
      EXPECT_LE(report.realized_epsilon, p.epsilon);
    }
  }
}

TEST(VerifyCalibrationTest, HalvedNoiseFailsSomewhere) {
  int failures = 0;
  for (const CalibrationPoint& p : CalibrationGrid()) {
    NoiseScale scale = Calibrate(p, StronglyConvexRegime{p.strong_convexity},
                                 ConsistentCalibrationConstant(PerStepConstant()));
    scale.sigma_sq /= 2;
    const PrivacyParams params = *PrivacyParams::Create(p.epsilon, p.delta);
    if (!VerifyCalibration(params, scale)->pass) ++failures;
  }
  EXPECT_GT(failures, 0);
}

TEST(VerifyCalibrationTest, ZeroStepsIgnoresSigma) {
  const PrivacyParams params = *PrivacyParams::Create(0.5, 1e-5);
  NoiseScale scale = *CalibrateSigma(params, 1, 100, 1.0, PlRegime{}, 8.0);
  scale.steps = 0;
  const int64_t max_lambda = RequiredMaxLambda(params);
  for (double s2 : {1e-9, 1.0, 1e9}) {
    scale.sigma_sq = s2;
    const CalibrationReport report = *VerifyCalibration(params, scale);
    EXPECT_DOUBLE_EQ(report.realized_epsilon, std::log(1e5) / static_cast<double>(max_lambda));
  }
}

TEST(VerifyCalibrationTest, DefaultOrderRangeCoversSmallEpsilon) {
  // With orders capped at 64 the tail term alone is ln(1/delta)/64, above a
  // target of 0.01; the default range extends far enough to certify it.
  const PrivacyParams params = *PrivacyParams::Create(0.01, 1e-5);
  const NoiseScale scale = *CalibrateSigma(params, 100, 1000, 1.0, PlRegime{}, 8.0);
  EXPECT_FALSE(VerifyCalibration(params, scale, {.max_lambda = 64})->pass);
  const CalibrationReport report = *VerifyCalibration(params, scale);
  EXPECT_TRUE(report.pass);
  EXPECT_GE(report.max_lambda, 2 * std::log(1e5) / 0.01);
  EXPECT_EQ(RequiredMaxLambda(*PrivacyParams::Create(1.0, 1e-3)), kDefaultMaxLambda);
}

}  // namespace
}  // namespace dperm
