#pragma once

#include "frsmon/gmm.hpp"
#include "frsmon/level_solver.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace frsmon {

struct FrsComponent {
  GaussianMode mode;
  double level = 0.0;
};

/// Union of ellipses {x : V_i(x) / scale <= c_i}. Components with level 0 are
/// empty for membership and intersection purposes.
class FrsSet {
 public:
  FrsSet(std::vector<FrsComponent> components, double scale = 1.0);

  const std::vector<FrsComponent>& components() const { return components_; }
  double scale() const { return scale_; }

  bool contains(const Vec2& x) const;

  /// Semi-axis lengths sqrt(scale * lambda_j * c) of component i.
  Vec2 semi_axes(std::size_t i) const;

  /// Summed component areas (overlaps counted twice).
  double summed_area() const;

 private:
  std::vector<FrsComponent> components_;
  double scale_;
};

/// Materialise the reachable set for a solved mixture at a covariance scale.
/// Levels are reused unchanged; they do not depend on the scale.
FrsSet build_frs(const GmmPrediction& gmm, const LevelSolution& solution, double scale = 1.0);

/// Fixed level on every mode, e.g. the 99% confidence-ellipse baseline.
FrsSet build_uniform_level_frs(const GmmPrediction& gmm, double level, double scale = 1.0);

inline bool frs_contains(const FrsSet& frs, const Vec2& x) { return frs.contains(x); }

struct MassEstimate {
  double mass = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of the mixture mass inside the set (union, not the
/// per-mode constraint sum). Deterministic for a given seed.
MassEstimate frs_mass(const FrsSet& frs, const GmmPrediction& gmm, std::size_t n_samples,
                      std::uint64_t seed);

/// Draw one sample from the mixture.
template <class Rng>
Vec2 sample_gmm(const GmmPrediction& gmm, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double u = unit(rng);
  std::size_t pick = gmm.size() - 1;
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    if (u < gmm.weights()[i]) {
      pick = i;
      break;
    }
    u -= gmm.weights()[i];
  }
  const auto& mode = gmm.modes()[pick];
  const auto& e = mode.eig();
  const double z1 = normal(rng);
  const double z2 = normal(rng);
  return mode.mean() + std::sqrt(e.lambda1) * z1 * e.axis1 + std::sqrt(e.lambda2) * z2 * e.axis2;
}

}  // namespace frsmon
