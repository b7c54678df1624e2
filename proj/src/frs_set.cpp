#include "frsmon/frs_set.hpp"

#include "frsmon/error.hpp"

#include <cmath>
#include <random>

namespace frsmon {

FrsSet::FrsSet(std::vector<FrsComponent> components, double scale)
    : components_(std::move(components)), scale_(scale) {
  if (!(scale_ > 0.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "FRS scale must be positive");
  }
  for (const auto& c : components_) {
    if (!(c.level >= 0.0)) {
      throw FrsError(ErrorCode::InvalidArgument, "FRS levels must be nonnegative");
    }
  }
}

bool FrsSet::contains(const Vec2& x) const {
  for (const auto& c : components_) {
    if (c.level > 0.0 && mahalanobis(x, c.mode) <= scale_ * c.level) return true;
  }
  return false;
}

Vec2 FrsSet::semi_axes(std::size_t i) const {
  const auto& c = components_.at(i);
  const auto& e = c.mode.eig();
  return Vec2(std::sqrt(scale_ * e.lambda1 * c.level), std::sqrt(scale_ * e.lambda2 * c.level));
}

double FrsSet::summed_area() const {
  double total = 0.0;
  for (const auto& c : components_) total += ellipse_volume(c.mode, c.level) * scale_;
  return total;
}

FrsSet build_frs(const GmmPrediction& gmm, const LevelSolution& solution, double scale) {
  if (solution.levels.size() != gmm.size()) {
    throw FrsError(ErrorCode::InvalidArgument, "level count does not match mixture");
  }
  std::vector<FrsComponent> comps;
  comps.reserve(gmm.size());
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    comps.push_back({gmm.modes()[i], solution.levels[i]});
  }
  return FrsSet(std::move(comps), scale);
}

FrsSet build_uniform_level_frs(const GmmPrediction& gmm, double level, double scale) {
  std::vector<FrsComponent> comps;
  comps.reserve(gmm.size());
  for (const auto& m : gmm.modes()) comps.push_back({m, level});
  return FrsSet(std::move(comps), scale);
}

MassEstimate frs_mass(const FrsSet& frs, const GmmPrediction& gmm, std::size_t n_samples,
                      std::uint64_t seed) {
  if (n_samples < 1000) {
    throw FrsError(ErrorCode::InvalidArgument, "frs_mass needs at least 1000 samples");
  }
  std::mt19937_64 rng(seed);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    if (frs.contains(sample_gmm(gmm, rng))) ++hits;
  }
  const double n = static_cast<double>(n_samples);
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

}  // namespace frsmon
