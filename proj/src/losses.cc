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

#include "dperm/losses.h"

#include <algorithm>
#include <cmath>
#include <utility>
#include <limits>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace dperm {

const char* LossFamilyName(LossFamily family) {
  switch (family) {
    case LossFamily::kLogistic:
      return "logistic";
    case LossFamily::kLogisticL2:
      return "logistic_l2";
    case LossFamily::kMlp:
      return "mlp";
  }
  return "unknown";
}

LossSpec LossSpec::Logistic() { return LossSpec{}; }

absl::StatusOr<LossSpec> LossSpec::LogisticL2(double reg_lambda) {
  if (!(reg_lambda > 0.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("logistic_l2: reg_lambda must be > 0, got ", reg_lambda));
  }
  LossSpec spec;
  spec.family = LossFamily::kLogisticL2;
  spec.reg_lambda = reg_lambda;
  spec.convexity = StronglyConvex{reg_lambda};
  return spec;
}

absl::StatusOr<LossSpec> LossSpec::Mlp(size_t hidden_width, double lipschitz,
                                       double smoothness, Convexity convexity) {
  if (hidden_width == 0) {
    return absl::InvalidArgumentError("mlp: hidden_width must be positive");
  }
  if (!(lipschitz > 0.0) || !(smoothness > 0.0)) {
    return absl::InvalidArgumentError("mlp: G and L must be positive");
  }
  if (std::holds_alternative<StronglyConvex>(convexity)) {
    return absl::InvalidArgumentError("mlp: strong convexity cannot be asserted");
  }
  if (const auto* pl = std::get_if<PolyakLojasiewicz>(&convexity); pl && !(pl->mu > 0.0)) {
    return absl::InvalidArgumentError("mlp: PL constant must be positive");
  }
  LossSpec spec;
  spec.family = LossFamily::kMlp;
  spec.lipschitz = lipschitz;
  spec.smoothness = smoothness;
  spec.convexity = convexity;
  spec.hidden_width = hidden_width;
  return spec;
}

size_t LossSpec::ParameterCount(size_t d) const {
  if (family != LossFamily::kMlp) return d;
  // W1 (h x d), b1 (h), w2 (h), b2.
  return hidden_width * d + 2 * hidden_width + 1;
}

std::optional<double> LossSpec::PlConstant() const {
  if (const auto* sc = std::get_if<StronglyConvex>(&convexity)) return sc->delta;
  if (const auto* pl = std::get_if<PolyakLojasiewicz>(&convexity)) return pl->mu;
  return std::nullopt;
}

double LossSpec::ObjectiveSmoothness(double max_row_norm) const {
  const double r2 = std::max(1.0, max_row_norm * max_row_norm);
  return smoothness * r2 + reg_lambda;
}

ModelParams ProjectToBall(const ModelParams& params) {
  ModelParams out = params;
  ProjectInPlace(out.theta, out.radius);
  return out;
}

void ProjectInPlace(Eigen::VectorXd& theta, double radius) {
  const double norm = theta.norm();
  if (!(norm > radius)) return;
  // Rounding can leave the rescaled norm one ulp outside; shrink until it
  // lands inside so that projecting twice is a no-op.
  double scale = radius / norm;
  Eigen::VectorXd scaled = theta * scale;
  while (scaled.norm() > radius) {
    scale = std::nextafter(scale, 0.0);
    scaled = theta * scale;
  }
  theta = std::move(scaled);
}

double LogisticLoss(double margin) {
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double LogisticLossDerivative(double margin) {
  if (margin > 0.0) {
    const double e = std::exp(-margin);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(margin));
}

namespace {

// Views into the flat mlp parameter vector.
struct MlpLayout {
  Eigen::Index d;
  Eigen::Index h;

  Eigen::Index w1() const { return 0; }
  Eigen::Index b1() const { return h * d; }
  Eigen::Index w2() const { return h * d + h; }
  Eigen::Index b2() const { return h * d + 2 * h; }

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  W1(const Eigen::VectorXd& theta) const {
    return {theta.data() + w1(), h, d};
  }
};

struct MlpForward {
  Eigen::VectorXd hidden;
  double output = 0.0;
};

MlpForward MlpRun(const MlpLayout& m, const Eigen::VectorXd& theta,
                  const Eigen::Ref<const Eigen::VectorXd>& x) {
  MlpForward f;
  f.hidden = (m.W1(theta) * x + theta.segment(m.b1(), m.h)).array().tanh().matrix();
  f.output = theta.segment(m.w2(), m.h).dot(f.hidden) + theta[m.b2()];
  return f;
}

// Adds scale * d l / d theta for one sample into `grad`.
void MlpAccumulateGradient(const MlpLayout& m, const Eigen::VectorXd& theta,
                           const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                           double scale, Eigen::VectorXd& grad) {
  const MlpForward f = MlpRun(m, theta, x);
  const double dout = scale * y * LogisticLossDerivative(y * f.output);
  grad.segment(m.w2(), m.h) += dout * f.hidden;
  grad[m.b2()] += dout;
  const Eigen::VectorXd da =
      (dout * theta.segment(m.w2(), m.h)).cwiseProduct(
          (1.0 - f.hidden.array().square()).matrix());
  grad.segment(m.b1(), m.h) += da;
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      gw1(grad.data() + m.w1(), m.h, m.d);
  gw1.noalias() += da * x.transpose();
}

// Hidden activations for every row of `x`, n x h.
Eigen::MatrixXd MlpHidden(const MlpLayout& m, const Eigen::VectorXd& theta,
                          const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x * m.W1(theta).transpose();
  z.rowwise() += theta.segment(m.b1(), m.h).transpose();
  return z.array().tanh().matrix();
}

// Mean per-sample gradient over the rows of `x`. With `clip`, each sample's
// gradient is first scaled down to norm at most *clip. The per-sample norm
// has a closed form: with a = w2 .* (1 - h^2) and c = y l'(y f),
//   |g|^2 = c^2 (|a|^2 (|x|^2 + 1) + |h|^2 + 1).
Eigen::VectorXd MlpMeanGradient(const MlpLayout& m, const Eigen::VectorXd& theta,
                                const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                std::optional<double> clip) {
  const Eigen::MatrixXd hidden = MlpHidden(m, theta, x);
  const Eigen::VectorXd w2 = theta.segment(m.w2(), m.h);
  const Eigen::VectorXd out = (hidden * w2).array() + theta[m.b2()];
  const Eigen::MatrixXd slope =
      ((1.0 - hidden.array().square()).rowwise() * w2.transpose().array()).matrix();
  const double n = static_cast<double>(x.rows());
  Eigen::VectorXd coeff(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double c = y[i] * LogisticLossDerivative(y[i] * out[i]);
    double scale = 1.0;
    if (clip) {
      const double norm =
          std::abs(c) * std::sqrt(slope.row(i).squaredNorm() * (x.row(i).squaredNorm() + 1.0) +
                                  hidden.row(i).squaredNorm() + 1.0);
      if (norm > *clip) scale = *clip / norm;
    }
    coeff[i] = c * scale / n;
  }
  const Eigen::MatrixXd a = coeff.asDiagonal() * slope;
  Eigen::VectorXd g(theta.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw1(
      g.data() + m.w1(), m.h, m.d);
  gw1.noalias() = a.transpose() * x;
  g.segment(m.b1(), m.h) = a.colwise().sum().transpose();
  g.segment(m.w2(), m.h) = hidden.transpose() * coeff;
  g[m.b2()] = coeff.sum();
  return g;
}

absl::Status CheckDims(const LossSpec& spec, const Eigen::VectorXd& theta,
                       Eigen::Index d) {
  const auto want = static_cast<Eigen::Index>(spec.ParameterCount(static_cast<size_t>(d)));
  if (theta.size() != want) {
    return absl::InvalidArgumentError(absl::StrCat(
        LossFamilyName(spec.family), ": theta has ", theta.size(),
        " entries, expected ", want, " for ", d, " features"));
  }
  return absl::OkStatus();
}

MlpLayout LayoutFor(const LossSpec& spec, Eigen::Index d) {
  return MlpLayout{d, static_cast<Eigen::Index>(spec.hidden_width)};
}

}  // namespace

absl::StatusOr<double> ModelScore(const LossSpec& spec, const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& x) {
  if (absl::Status s = CheckDims(spec, theta, x.size()); !s.ok()) return s;
  if (spec.is_linear()) return theta.dot(x);
  return MlpRun(LayoutFor(spec, x.size()), theta, x).output;
}

absl::StatusOr<double> LossValue(const LossSpec& spec, const ModelParams& params,
                                 const Eigen::VectorXd& x, double y) {
  absl::StatusOr<double> score = ModelScore(spec, params.theta, x);
  if (!score.ok()) return score.status();
  double value = LogisticLoss(y * *score);
  if (spec.family == LossFamily::kLogisticL2) {
    value += 0.5 * spec.reg_lambda * params.theta.squaredNorm();
  }
  return value;
}

absl::StatusOr<Eigen::VectorXd> LossGradient(const LossSpec& spec,
                                             const ModelParams& params,
                                             const Eigen::VectorXd& x, double y) {
  if (absl::Status s = CheckDims(spec, params.theta, x.size()); !s.ok()) return s;
  const Eigen::VectorXd& theta = params.theta;
  if (spec.is_linear()) {
    Eigen::VectorXd g = (y * LogisticLossDerivative(y * theta.dot(x))) * x;
    if (spec.family == LossFamily::kLogisticL2) g += spec.reg_lambda * theta;
    return g;
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  MlpAccumulateGradient(LayoutFor(spec, x.size()), theta, x, y, 1.0, g);
  return g;
}

absl::StatusOr<EmpiricalRisk> EmpiricalRisk::Create(Dataset data, LossSpec spec,
                                                    Options options) {
  if (data.size() == 0) {
    return absl::InvalidArgumentError("empirical risk: empty dataset");
  }
  const size_t p = spec.ParameterCount(data.dim());
  if (options.linear_term.size() != 0 &&
      static_cast<size_t>(options.linear_term.size()) != p) {
    return absl::InvalidArgumentError(absl::StrCat(
        "empirical risk: linear term has ", options.linear_term.size(),
        " entries, expected ", p));
  }
  if (options.clip_norm && !(*options.clip_norm > 0.0)) {
    return absl::InvalidArgumentError("empirical risk: clip_norm must be positive");
  }
  return EmpiricalRisk(std::move(data), std::move(spec), std::move(options), p);
}

Eigen::VectorXd EmpiricalRisk::Scores(const Eigen::VectorXd& theta,
                                      const Eigen::MatrixXd& x) const {
  if (spec_.is_linear()) return x * theta;
  const MlpLayout m = LayoutFor(spec_, x.cols());
  return (MlpHidden(m, theta, x) * theta.segment(m.w2(), m.h)).array() + theta[m.b2()];
}

Eigen::VectorXd EmpiricalRisk::SampleLosses(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd scores = Scores(theta, data_.features());
  Eigen::VectorXd out(scores.size());
  const double reg = spec_.family == LossFamily::kLogisticL2
                         ? 0.5 * spec_.reg_lambda * theta.squaredNorm()
                         : 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    out[i] = LogisticLoss(data_.labels()[i] * scores[i]) + reg;
  }
  return out;
}

double EmpiricalRisk::Value(const Eigen::VectorXd& theta) const {
  const double n = static_cast<double>(data_.size());
  double value = SampleLosses(theta).sum() / n;
  if (options_.linear_term.size() != 0) value += options_.linear_term.dot(theta) / n;
  return value;
}

Eigen::VectorXd EmpiricalRisk::Gradient(const Eigen::VectorXd& theta) const {
  if (options_.clip_norm) return ClippedGradient(theta);
  const double n = static_cast<double>(data_.size());
  const Eigen::MatrixXd& x = data_.features();
  const Eigen::VectorXd& y = data_.labels();
  Eigen::VectorXd g;
  if (spec_.is_linear()) {
    const Eigen::VectorXd scores = x * theta;
    Eigen::VectorXd coeff(scores.size());
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      coeff[i] = y[i] * LogisticLossDerivative(y[i] * scores[i]);
    }
    g = x.transpose() * coeff / n;
    if (spec_.family == LossFamily::kLogisticL2) g += spec_.reg_lambda * theta;
  } else {
    g = MlpMeanGradient(LayoutFor(spec_, x.cols()), theta, x, y, std::nullopt);
  }
  if (options_.linear_term.size() != 0) g += options_.linear_term / n;
  return g;
}

absl::StatusOr<Eigen::MatrixXd> EmpiricalRisk::Hessian(const Eigen::VectorXd& theta) const {
  if (!spec_.is_linear()) {
    return absl::UnimplementedError("hessian: only available for linear families");
  }
  const Eigen::MatrixXd& x = data_.features();
  const Eigen::VectorXd scores = x * theta;
  Eigen::VectorXd curvature(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    // l''(m) = s(m) s(-m); y^2 = 1.
    const double s = -LogisticLossDerivative(scores[i]);
    curvature[i] = s * (1.0 - s);
  }
  const double n = static_cast<double>(data_.size());
  Eigen::MatrixXd h = x.transpose() * curvature.asDiagonal() * x / n;
  if (spec_.family == LossFamily::kLogisticL2) {
    h.diagonal().array() += spec_.reg_lambda;
  }
  return h;
}

Eigen::VectorXd EmpiricalRisk::ClippedGradient(const Eigen::VectorXd& theta) const {
  const double n = static_cast<double>(data_.size());
  const double clip = *options_.clip_norm;
  const Eigen::MatrixXd& x = data_.features();
  const Eigen::VectorXd& y = data_.labels();
  Eigen::VectorXd g;
  if (spec_.is_linear()) {
    g = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd sample(theta.size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::VectorXd xi = x.row(i).transpose();
      sample = (y[i] * LogisticLossDerivative(y[i] * theta.dot(xi))) * xi;
      if (spec_.family == LossFamily::kLogisticL2) sample += spec_.reg_lambda * theta;
      const double norm = sample.norm();
      if (norm > clip) sample *= clip / norm;
      g += sample / n;
    }
  } else {
    g = MlpMeanGradient(LayoutFor(spec_, x.cols()), theta, x, y, clip);
  }
  if (options_.linear_term.size() != 0) g += options_.linear_term / n;
  return g;
}

double QuadraticObjective::Value(const Eigen::VectorXd& theta) const {
  return 0.5 * delta_ * (theta - center_).squaredNorm();
}

Eigen::VectorXd QuadraticObjective::Gradient(const Eigen::VectorXd& theta) const {
  return delta_ * (theta - center_);
}

absl::StatusOr<PlReport> CheckPl(const LossSpec& spec, const Objective& objective,
                                 double objective_min,
                                 const std::vector<ModelParams>& probes) {
  const std::optional<double> mu = spec.PlConstant();
  if (!mu) {
    return absl::FailedPreconditionError(
        "check_pl: loss declares no strong convexity or PL constant");
  }
  PlReport report;
  report.mu = *mu;
  report.slacks.reserve(probes.size());
  report.min_slack = std::numeric_limits<double>::infinity();
  for (const ModelParams& probe : probes) {
    if (static_cast<size_t>(probe.theta.size()) != objective.dimension()) {
      return absl::InvalidArgumentError("check_pl: probe dimension mismatch");
    }
    const double g2 = objective.Gradient(probe.theta).squaredNorm();
    const double slack = g2 - 2.0 * report.mu * (objective.Value(probe.theta) - objective_min);
    report.slacks.push_back(slack);
    report.min_slack = std::min(report.min_slack, slack);
  }
  report.pass = report.min_slack >= -kPlSlackTolerance;
  return report;
}

Eigen::VectorXd FiniteDifferenceGradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& theta, double h) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    probe[j] = theta[j] + h;
    const double up = f(probe);
    probe[j] = theta[j] - h;
    const double down = f(probe);
    probe[j] = theta[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

double RelativeError(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace dperm
