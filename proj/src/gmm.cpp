#include "frsmon/gmm.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace frsmon {

namespace {

Mat2 symmetrize(const Mat2& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Eig2 eig2x2(const Mat2& cov) {
  if (!cov.allFinite()) {
    throw FrsError(ErrorCode::NonSpd, "covariance has non-finite entries");
  }
  const Mat2 s = symmetrize(cov);
  const double a = s(0, 0);
  const double b = s(0, 1);
  const double c = s(1, 1);
  const double mid = 0.5 * (a + c);
  const double half_gap = std::hypot(0.5 * (a - c), b);

  Eig2 e;
  e.lambda1 = mid + half_gap;
  // det / lambda1 keeps the small eigenvalue accurate when the spread is large.
  const double det = a * c - b * b;
  e.lambda2 = e.lambda1 > 0.0 ? det / e.lambda1 : mid - half_gap;
  if (!(e.lambda2 >= kEpsLambda)) {
    std::ostringstream os;
    os << "eigenvalue " << e.lambda2 << " below " << kEpsLambda;
    throw FrsError(ErrorCode::NonSpd, os.str());
  }
  const double angle = 0.5 * std::atan2(2.0 * b, a - c);
  e.axis1 = Vec2(std::cos(angle), std::sin(angle));
  e.axis2 = Vec2(-e.axis1.y(), e.axis1.x());
  return e;
}

GaussianMode::GaussianMode(const Vec2& mean, const Mat2& cov)
    : mean_(mean), cov_(symmetrize(cov)), eig_(eig2x2(cov)) {
  if (!mean.allFinite()) {
    throw FrsError(ErrorCode::InvalidArgument, "mode mean is not finite");
  }
  const double det = eig_.lambda1 * eig_.lambda2;
  inv_ << cov_(1, 1) / det, -cov_(0, 1) / det, -cov_(1, 0) / det, cov_(0, 0) / det;
}

GaussianMode GaussianMode::scaled(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw FrsError(ErrorCode::InvalidArgument, "covariance scale must be positive and finite");
  }
  return GaussianMode(mean_, alpha * cov_);
}

GmmPrediction::GmmPrediction(std::vector<GaussianMode> modes, std::vector<double> weights,
                             int horizon_step)
    : modes_(std::move(modes)), weights_(std::move(weights)), horizon_step_(horizon_step) {
  if (modes_.empty()) {
    throw FrsError(ErrorCode::InvalidArgument, "mixture needs at least one mode");
  }
  if (modes_.size() != weights_.size()) {
    throw FrsError(ErrorCode::InvalidArgument, "mode/weight count mismatch");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw FrsError(ErrorCode::InvalidArgument, "mixture weights must be nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "mixture weights sum to " << total;
    throw FrsError(ErrorCode::InvalidArgument, os.str());
  }
  if (horizon_step_ < 1) {
    throw FrsError(ErrorCode::InvalidArgument, "horizon step starts at 1");
  }
}

GmmPrediction GmmPrediction::scaled(double alpha) const {
  std::vector<GaussianMode> modes;
  modes.reserve(modes_.size());
  for (const auto& m : modes_) modes.push_back(m.scaled(alpha));
  return GmmPrediction(std::move(modes), weights_, horizon_step_);
}

double mahalanobis(const Vec2& x, const GaussianMode& mode) {
  const Vec2 d = x - mode.mean();
  return std::max(0.0, d.dot(mode.cov_inverse() * d));
}

double chi2_mass_2d(double c) {
  if (c <= 0.0) return 0.0;
  return -std::expm1(-0.5 * c);
}

double chi2_level_2d(double mass) {
  if (!(mass >= 0.0 && mass < 1.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "mass must lie in [0, 1)");
  }
  return -2.0 * std::log1p(-mass);
}

double ellipse_volume(const GaussianMode& mode, double c) {
  return std::numbers::pi * mode.eig().sqrt_det() * std::max(0.0, c);
}

double gmm_density(const Vec2& x, const GmmPrediction& gmm) {
  double total = 0.0;
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const auto& mode = gmm.modes()[i];
    const double norm = 1.0 / (2.0 * std::numbers::pi * mode.eig().sqrt_det());
    total += gmm.weights()[i] * norm * std::exp(-0.5 * mahalanobis(x, mode));
  }
  return total;
}

double log_gmm_density(const Vec2& x, const GmmPrediction& gmm, double cov_scale) {
  if (!(cov_scale > 0.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "covariance scale must be positive");
  }
  // With cov -> s*cov: log N = -log(2 pi) - log(s sqrt det) - V / (2 s).
  std::vector<double> terms;
  terms.reserve(gmm.size());
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double w = gmm.weights()[i];
    if (w <= 0.0) continue;
    const auto& mode = gmm.modes()[i];
    terms.push_back(std::log(w) - std::log(2.0 * std::numbers::pi) -
                    std::log(cov_scale * mode.eig().sqrt_det()) -
                    0.5 * mahalanobis(x, mode) / cov_scale);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

}  // namespace frsmon
