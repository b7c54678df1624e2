#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace frsmon {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Covariances with an eigenvalue below this (m^2) are rejected as degenerate.
inline constexpr double kEpsLambda = 1e-9;

/// Eigen-decomposition of a 2x2 SPD matrix, lambda1 >= lambda2 > 0.
struct Eig2 {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Vec2 axis1 = Vec2::UnitX();
  Vec2 axis2 = Vec2::UnitY();

  double sqrt_det() const { return std::sqrt(lambda1 * lambda2); }
};

/// Closed-form symmetric 2x2 eigendecomposition. The input is symmetrized
/// first; throws NonSpd if the smaller eigenvalue is below kEpsLambda.
Eig2 eig2x2(const Mat2& cov);

/// One Gaussian component. Construction symmetrizes and validates the
/// covariance and caches its inverse and eigenvalues.
class GaussianMode {
 public:
  GaussianMode(const Vec2& mean, const Mat2& cov);

  const Vec2& mean() const { return mean_; }
  const Mat2& cov() const { return cov_; }
  const Mat2& cov_inverse() const { return inv_; }
  const Eig2& eig() const { return eig_; }

  /// Same mean, covariance multiplied by alpha > 0.
  GaussianMode scaled(double alpha) const;

 private:
  Vec2 mean_;
  Mat2 cov_;
  Mat2 inv_;
  Eig2 eig_;
};

/// Per-step mixture output of a trajectory predictor.
class GmmPrediction {
 public:
  GmmPrediction(std::vector<GaussianMode> modes, std::vector<double> weights,
                int horizon_step = 1);

  std::size_t size() const { return modes_.size(); }
  const std::vector<GaussianMode>& modes() const { return modes_; }
  const std::vector<double>& weights() const { return weights_; }
  int horizon_step() const { return horizon_step_; }

  /// All covariances multiplied by alpha; weights and means unchanged.
  GmmPrediction scaled(double alpha) const;

 private:
  std::vector<GaussianMode> modes_;
  std::vector<double> weights_;
  int horizon_step_;
};

/// Mahalanobis energy (x - mean)^T cov^-1 (x - mean).
double mahalanobis(const Vec2& x, const GaussianMode& mode);

/// Probability mass of {V <= c} under a 2-D Gaussian: 1 - exp(-c/2).
double chi2_mass_2d(double c);

/// Inverse of chi2_mass_2d: the level c whose sublevel set holds `mass`.
double chi2_level_2d(double mass);

/// Area of {x : V(x) <= c}: pi * sqrt(lambda1 lambda2) * c.
double ellipse_volume(const GaussianMode& mode, double c);

/// Mixture density sum_i p_i N(x; mean_i, cov_i).
double gmm_density(const Vec2& x, const GmmPrediction& gmm);

/// log of gmm_density computed with log-sum-exp; finite even far in the tails.
/// Covariances are multiplied by cov_scale before evaluation.
double log_gmm_density(const Vec2& x, const GmmPrediction& gmm, double cov_scale = 1.0);

}  // namespace frsmon
