#include "frsmon/level_solver.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace frsmon {

namespace {

double mode_area(const GaussianMode& m) { return std::numbers::pi * m.eig().sqrt_det(); }

double level_for(double dual, double weight, double area) {
  const double ratio = dual * weight / (2.0 * area);
  return ratio > 1.0 ? 2.0 * std::log(ratio) : 0.0;
}

}  // namespace

bool LevelSolution::any_positive() const {
  return std::any_of(levels.begin(), levels.end(), [](double c) { return c > 0.0; });
}

std::vector<double> levels_for_dual(const GmmPrediction& gmm, double dual, double p_floor) {
  std::vector<double> out(gmm.size(), 0.0);
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double p = gmm.weights()[i];
    if (p < p_floor) continue;
    out[i] = level_for(dual, p, mode_area(gmm.modes()[i]));
  }
  return out;
}

double level_constraint_value(const GmmPrediction& gmm, double dual, double p_floor) {
  // p_i (1 - exp(-c_i/2)) collapses to p_i - 2 a_i / nu on active modes.
  double g = 0.0;
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double p = gmm.weights()[i];
    if (p < p_floor) continue;
    const double a = mode_area(gmm.modes()[i]);
    if (dual * p > 2.0 * a) g += p - 2.0 * a / dual;
  }
  return g;
}

LevelSolution solve_levels(const GmmPrediction& gmm, double tau, const SolverOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw FrsError(ErrorCode::InvalidTau, "tau must lie in (0, 1)");
  }

  const std::size_t k = gmm.size();
  std::vector<double> area(k);
  double reachable = 0.0;
  double nu_lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    area[i] = mode_area(gmm.modes()[i]);
    const double p = gmm.weights()[i];
    if (p < options.p_floor) continue;
    reachable += p;
    nu_lo = std::min(nu_lo, 2.0 * area[i] / p);
  }
  if (!std::isfinite(nu_lo)) {
    throw FrsError(ErrorCode::DegenerateMixture, "every mode weight is below p_floor");
  }
  if (tau >= reachable) {
    throw FrsError(ErrorCode::DegenerateMixture, "tau exceeds the mass carried by usable modes");
  }

  auto g = [&](double nu) { return level_constraint_value(gmm, nu, options.p_floor); };

  double nu_hi = 2.0 * nu_lo;
  while (g(nu_hi) < tau) nu_hi *= 2.0;

  LevelSolution sol;
  for (; sol.iterations < options.max_iterations; ++sol.iterations) {
    const double gap = g(nu_hi) - tau;
    if (gap <= options.mass_tol) break;
    const double mid = 0.5 * (nu_lo + nu_hi);
    if (mid <= nu_lo || mid >= nu_hi) break;
    if (g(mid) >= tau) {
      nu_hi = mid;
    } else {
      nu_lo = mid;
    }
  }

  // Closed form on the active set found by bisection; kept only when it
  // reproduces that active set.
  double nu = nu_hi;
  double active_mass = 0.0;
  double active_area = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double p = gmm.weights()[i];
    if (p >= options.p_floor && nu_hi * p > 2.0 * area[i]) {
      active_mass += p;
      active_area += area[i];
    }
  }
  if (active_mass > tau) {
    const double exact = 2.0 * active_area / (active_mass - tau);
    bool consistent = true;
    for (std::size_t i = 0; i < k && consistent; ++i) {
      const double p = gmm.weights()[i];
      if (p < options.p_floor) continue;
      consistent = (nu_hi * p > 2.0 * area[i]) == (exact * p > 2.0 * area[i]);
    }
    if (consistent && std::isfinite(exact)) nu = exact;
  }

  sol.dual = nu;
  sol.levels = levels_for_dual(gmm, nu, options.p_floor);
  for (std::size_t i = 0; i < k; ++i) {
    sol.objective += area[i] * sol.levels[i];
    sol.achieved_mass += gmm.weights()[i] * chi2_mass_2d(sol.levels[i]);
  }
  return sol;
}

}  // namespace frsmon
