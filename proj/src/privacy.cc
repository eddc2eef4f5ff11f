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

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace dperm {
namespace {

// sqrt(Delta) for the strongly convex regime, 1 for PL.
double CurvatureDivisor(const CalibrationRegime& regime) {
  if (const auto* sc = std::get_if<StronglyConvexRegime>(&regime)) {
    return std::sqrt(sc->strong_convexity);
  }
  return 1.0;
}

absl::Status CheckRegime(const CalibrationRegime& regime) {
  if (const auto* sc = std::get_if<StronglyConvexRegime>(&regime);
      sc && !(sc->strong_convexity > 0.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "strong convexity constant must be > 0, got ", sc->strong_convexity));
  }
  return absl::OkStatus();
}

double PairCount(int64_t n) {
  const auto nd = static_cast<double>(n);
  return nd * (nd - 1.0);
}

}  // namespace

absl::StatusOr<PrivacyParams> PrivacyParams::Create(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(absl::StrCat("epsilon must be > 0, got ", epsilon));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat("delta must be in (0,1), got ", delta));
  }
  return PrivacyParams{epsilon, delta};
}

absl::StatusOr<NoiseScale> CalibrateSigma(const PrivacyParams& params, int64_t steps,
                                          int64_t n, double lipschitz,
                                          const CalibrationRegime& regime, double c) {
  if (absl::StatusOr<PrivacyParams> p = PrivacyParams::Create(params.epsilon, params.delta);
      !p.ok()) {
    return p.status();
  }
  if (steps < 1) {
    return absl::InvalidArgumentError(absl::StrCat("T must be >= 1, got ", steps));
  }
  if (n < 2) {
    return absl::InvalidArgumentError(absl::StrCat("n must be >= 2, got ", n));
  }
  if (!(lipschitz > 0.0)) {
    return absl::InvalidArgumentError(absl::StrCat("G must be > 0, got ", lipschitz));
  }
  if (!(c > 0.0)) {
    return absl::InvalidArgumentError(absl::StrCat("c must be > 0, got ", c));
  }
  if (absl::Status s = CheckRegime(regime); !s.ok()) return s;

  NoiseScale scale;
  scale.c = c;
  scale.regime = regime;
  scale.steps = steps;
  scale.n = n;
  scale.lipschitz = lipschitz;
  scale.params = params;
  const double log_inv_delta = -std::log(params.delta);
  scale.sigma_sq = c * lipschitz * lipschitz * static_cast<double>(steps) * log_inv_delta /
                   (PairCount(n) * CurvatureDivisor(regime) * params.epsilon * params.epsilon);
  return scale;
}

absl::StatusOr<double> GaussianRenyi(double order, double mean_gap, double sigma_sq) {
  if (!(order > 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat("Renyi order must be > 1, got ", order));
  }
  if (!(mean_gap >= 0.0)) {
    return absl::InvalidArgumentError("mean gap must be >= 0");
  }
  if (!(sigma_sq > 0.0)) {
    return absl::InvalidArgumentError("sigma^2 must be > 0");
  }
  return order * mean_gap * mean_gap / (2.0 * sigma_sq);
}

absl::StatusOr<double> PerStepMomentBound(int64_t lambda, double lipschitz,
                                          double sigma_sq, int64_t n,
                                          const CalibrationRegime& regime, double c1) {
  if (lambda < 1) return absl::InvalidArgumentError("lambda must be >= 1");
  if (n < 2) return absl::InvalidArgumentError("n must be >= 2");
  if (!(lipschitz > 0.0)) return absl::InvalidArgumentError("G must be > 0");
  if (!(sigma_sq > 0.0)) return absl::InvalidArgumentError("sigma^2 must be > 0");
  if (!(c1 > 0.0)) return absl::InvalidArgumentError("c1 must be > 0");
  if (absl::Status s = CheckRegime(regime); !s.ok()) return s;
  const auto l = static_cast<double>(lambda);
  return c1 * l * (l + 1.0) * lipschitz * lipschitz /
         (CurvatureDivisor(regime) * sigma_sq * PairCount(n));
}

double PerStepConstant(double curvature_factor) {
  // (2G/n)^2 / (2 (n-1)/n sqrt(Delta) kappa) = 2 G^2 / (n (n-1) sqrt(Delta) kappa).
  return 2.0 / curvature_factor;
}

absl::StatusOr<MomentsLedger> MomentsLedger::Create(std::map<int64_t, double> per_step_bounds) {
  for (const auto& [lambda, bound] : per_step_bounds) {
    if (lambda < 1) return absl::InvalidArgumentError("moment order must be >= 1");
    if (!(bound >= 0.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("moment bound at lambda=", lambda, " must be >= 0"));
    }
  }
  return MomentsLedger(std::move(per_step_bounds));
}

absl::StatusOr<MomentsLedger> MomentsLedger::ForInputPerturbation(
    const std::vector<int64_t>& grid, double lipschitz, double sigma_sq, int64_t n,
    const CalibrationRegime& regime, double c1) {
  std::map<int64_t, double> bounds;
  for (int64_t lambda : grid) {
    absl::StatusOr<double> b = PerStepMomentBound(lambda, lipschitz, sigma_sq, n, regime, c1);
    if (!b.ok()) return b.status();
    bounds[lambda] = *b;
  }
  return Create(std::move(bounds));
}

MomentsLedger MomentsLedger::Composed(int64_t steps) const {
  MomentsLedger out = *this;
  out.steps_composed_ = steps;
  return out;
}

double MomentsLedger::ComposedBound(int64_t lambda) const {
  auto it = per_step_bounds_.find(lambda);
  if (it == per_step_bounds_.end()) return std::numeric_limits<double>::infinity();
  return static_cast<double>(steps_composed_) * it->second;
}

std::vector<int64_t> MomentsLedger::lambda_grid() const {
  std::vector<int64_t> out;
  out.reserve(per_step_bounds_.size());
  for (const auto& entry : per_step_bounds_) out.push_back(entry.first);
  return out;
}

absl::StatusOr<RealizedEpsilon> ComposeAndConvert(const MomentsLedger& ledger,
                                                  int64_t steps, double delta) {
  if (ledger.per_step_bounds().empty()) {
    return absl::InvalidArgumentError("compose: empty moment-order grid");
  }
  if (steps < 0) return absl::InvalidArgumentError("compose: T must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("compose: delta must be in (0,1)");
  }
  const MomentsLedger composed = ledger.Composed(steps);
  const double log_inv_delta = -std::log(delta);
  RealizedEpsilon best{std::numeric_limits<double>::infinity(), 0};
  for (const auto& [lambda, per_step] : composed.per_step_bounds()) {
    const double eps =
        (composed.ComposedBound(lambda) + log_inv_delta) / static_cast<double>(lambda);
    if (eps < best.epsilon) best = {eps, lambda};
  }
  return best;
}

std::vector<int64_t> LambdaGrid(int64_t max_lambda) {
  std::vector<int64_t> grid;
  for (int64_t l = 1; l <= max_lambda; ++l) grid.push_back(l);
  return grid;
}

int64_t RequiredMaxLambda(const PrivacyParams& params) {
  const double needed = std::ceil(2.0 * -std::log(params.delta) / params.epsilon);
  if (!(needed < 1e7)) return 10'000'000;
  return std::max(kDefaultMaxLambda, static_cast<int64_t>(needed));
}

absl::StatusOr<CalibrationReport> VerifyCalibration(const PrivacyParams& params,
                                                    const NoiseScale& scale,
                                                    const VerifyOptions& options) {
  if (absl::StatusOr<PrivacyParams> p = PrivacyParams::Create(params.epsilon, params.delta);
      !p.ok()) {
    return p.status();
  }
  CalibrationReport report;
  report.target_epsilon = params.epsilon;
  report.c1 = options.c1.value_or(scale.c / kCalibrationToMomentRatio);
  report.max_lambda = options.max_lambda.value_or(RequiredMaxLambda(params));
  const std::vector<int64_t> grid = LambdaGrid(report.max_lambda);

  RealizedEpsilon realized;
  if (scale.steps == 0) {
    // Nothing composed: every order contributes only the tail term.
    std::map<int64_t, double> zeros;
    for (int64_t l : grid) zeros[l] = 0.0;
    absl::StatusOr<MomentsLedger> ledger = MomentsLedger::Create(std::move(zeros));
    if (!ledger.ok()) return ledger.status();
    absl::StatusOr<RealizedEpsilon> r = ComposeAndConvert(*ledger, 0, params.delta);
    if (!r.ok()) return r.status();
    realized = *r;
  } else {
    absl::StatusOr<MomentsLedger> ledger = MomentsLedger::ForInputPerturbation(
        grid, scale.lipschitz, scale.sigma_sq, scale.n, scale.regime, report.c1);
    if (!ledger.ok()) return ledger.status();
    absl::StatusOr<RealizedEpsilon> r = ComposeAndConvert(*ledger, scale.steps, params.delta);
    if (!r.ok()) return r.status();
    realized = *r;
  }
  report.realized_epsilon = realized.epsilon;
  report.best_lambda = realized.best_lambda;
  report.pass = realized.epsilon <= params.epsilon;
  return report;
}

double ExcessRiskReference(double learning_rate, double smoothness, double radius,
                           double lipschitz, int64_t d, int64_t n,
                           const CalibrationRegime& regime, const PrivacyParams& params) {
  const double log_n = std::log(static_cast<double>(n));
  const double g3 = lipschitz * lipschitz * lipschitz;
  return learning_rate * (2.0 * smoothness * radius + lipschitz) * g3 *
         static_cast<double>(d) * log_n * log_n * -std::log(params.delta) /
         (PairCount(n) * CurvatureDivisor(regime) * params.epsilon * params.epsilon);
}

}  // namespace dperm
