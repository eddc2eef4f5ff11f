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

#ifndef DPERM_PRIVACY_H_
#define DPERM_PRIVACY_H_

#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"

namespace dperm {

// Target (epsilon, delta) over adjacent datasets differing in one record.
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;

  static absl::StatusOr<PrivacyParams> Create(double epsilon, double delta);
};

// Curvature regime the noise calibration assumes.
struct StronglyConvexRegime {
  double strong_convexity = 0.0;  // Delta
};
struct PlRegime {};
using CalibrationRegime = std::variant<StronglyConvexRegime, PlRegime>;

// Per-coordinate Gaussian variance for input perturbation, with every input
// of the closed form kept alongside so the value can be audited.
struct NoiseScale {
  double sigma_sq = 0.0;
  double c = 1.0;
  CalibrationRegime regime;
  int64_t steps = 0;  // T
  int64_t n = 0;
  double lipschitz = 0.0;  // G
  PrivacyParams params;

  bool strongly_convex() const {
    return std::holds_alternative<StronglyConvexRegime>(regime);
  }
};

//   sigma^2 = c G^2 T ln(1/delta) / (n (n-1) sqrt(Delta) epsilon^2)
// in the strongly convex regime; the PL regime drops sqrt(Delta).
absl::StatusOr<NoiseScale> CalibrateSigma(const PrivacyParams& params, int64_t steps,
                                          int64_t n, double lipschitz,
                                          const CalibrationRegime& regime,
                                          double c = 1.0);

// Renyi divergence of order `order` between two Gaussians with equal
// per-coordinate variance whose means are `mean_gap` apart (Euclidean):
// order * gap^2 / (2 sigma^2).
absl::StatusOr<double> GaussianRenyi(double order, double mean_gap, double sigma_sq);

// Upper bound on the lambda-th log moment of one gradient step computed on
// perturbed inputs:
//   c1 lambda (lambda+1) G^2 / (sqrt(Delta) sigma^2 n (n-1))
// (PL regime: without sqrt(Delta)).
absl::StatusOr<double> PerStepMomentBound(int64_t lambda, double lipschitz,
                                          double sigma_sq, int64_t n,
                                          const CalibrationRegime& regime,
                                          double c1);

// Per-step constant c1 implied by the Gaussian moment
// lambda(lambda+1) ||B - B'||^2 / (2 C sigma^2) with sensitivity
// ||B - B'|| <= 2G/n and the aggregate coefficient bounded below by
// C >= ((n-1)/n) sqrt(Delta) * curvature_factor. The factor stands in for
// sqrt(2 (l(theta_T) - l*)); 1 corresponds to a residual loss gap of 1/2.
double PerStepConstant(double curvature_factor = 1.0);

// Smallest c for which sigma^2 from CalibrateSigma(c) is certified by the
// accountant running with per-step constant c1, for every epsilon <= ln(1/delta):
// the two tail conditions alpha <= lambda eps / 2 and delta <= exp(-lambda eps / 2)
// hold together at lambda = 2 ln(1/delta)/eps iff c >= 4 c2 = 8 c1.
inline constexpr double kCalibrationToMomentRatio = 8.0;
inline double ConsistentCalibrationConstant(double c1) {
  return kCalibrationToMomentRatio * c1;
}

// Per-step log-moment bounds on a grid of integer orders, plus how many
// steps have been composed. A value; composing returns a new ledger.
class MomentsLedger {
 public:
  static absl::StatusOr<MomentsLedger> Create(std::map<int64_t, double> per_step_bounds);

  // Bounds for the Gaussian step of PerStepMomentBound at every lambda in `grid`.
  static absl::StatusOr<MomentsLedger> ForInputPerturbation(
      const std::vector<int64_t>& grid, double lipschitz, double sigma_sq, int64_t n,
      const CalibrationRegime& regime, double c1);

  MomentsLedger Composed(int64_t steps) const;

  const std::map<int64_t, double>& per_step_bounds() const { return per_step_bounds_; }
  int64_t steps_composed() const { return steps_composed_; }
  // steps_composed * per-step bound; linear composition.
  double ComposedBound(int64_t lambda) const;
  std::vector<int64_t> lambda_grid() const;

 private:
  explicit MomentsLedger(std::map<int64_t, double> bounds)
      : per_step_bounds_(std::move(bounds)) {}

  std::map<int64_t, double> per_step_bounds_;
  int64_t steps_composed_ = 0;
};

struct RealizedEpsilon {
  double epsilon = 0.0;
  int64_t best_lambda = 0;
};

// alpha(lambda) = T * per-step bound, then
//   eps = min_lambda (alpha(lambda) + ln(1/delta)) / lambda.
absl::StatusOr<RealizedEpsilon> ComposeAndConvert(const MomentsLedger& ledger,
                                                  int64_t steps, double delta);

// Integers 1..max_lambda.
std::vector<int64_t> LambdaGrid(int64_t max_lambda);

inline constexpr int64_t kDefaultMaxLambda = 64;

// Smallest order range that can certify `epsilon`: the tail bound forces
// eps(lambda) >= ln(1/delta)/lambda, so orders up to ceil(2 ln(1/delta)/eps)
// are needed. Never below kDefaultMaxLambda.
int64_t RequiredMaxLambda(const PrivacyParams& params);

struct VerifyOptions {
  // Per-step constant; defaults to scale.c / kCalibrationToMomentRatio.
  std::optional<double> c1;
  // Largest moment order; defaults to RequiredMaxLambda(params).
  std::optional<int64_t> max_lambda;
};

struct CalibrationReport {
  double target_epsilon = 0.0;
  double realized_epsilon = 0.0;
  int64_t best_lambda = 0;
  double c1 = 0.0;
  int64_t max_lambda = 0;
  bool pass = false;
};

// Runs the accountant on `scale` and reports whether it certifies
// `params.epsilon`.
absl::StatusOr<CalibrationReport> VerifyCalibration(const PrivacyParams& params,
                                                    const NoiseScale& scale,
                                                    const VerifyOptions& options = {});

// Reference curve for the expected excess empirical risk of input
// perturbation, leading constant 1:
//   alpha (2 L D + G) G^3 d log^2(n) log(1/delta) / (n (n-1) sqrt(Delta) eps^2)
// (PL regime: without sqrt(Delta)).
double ExcessRiskReference(double learning_rate, double smoothness, double radius,
                           double lipschitz, int64_t d, int64_t n,
                           const CalibrationRegime& regime, const PrivacyParams& params);

}  // namespace dperm

#endif  // DPERM_PRIVACY_H_
