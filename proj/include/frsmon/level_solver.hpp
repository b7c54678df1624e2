#pragma once

#include "frsmon/gmm.hpp"

#include <vector>

namespace frsmon {

/// Default mass requirement tau (0.95 coverage).
inline constexpr double kDefaultTau = 0.95;

struct SolverOptions {
  /// Accepted slack above tau on the per-mode mass constraint.
  double mass_tol = 1e-10;
  int max_iterations = 200;
  /// Modes lighter than this get level 0 and stay out of the dual.
  double p_floor = 1e-12;
};

/// Optimal sublevel thresholds for each mode of one mixture.
struct LevelSolution {
  std::vector<double> levels;
  double dual = 0.0;
  /// sum_i pi sqrt(lambda_i1 lambda_i2) c_i
  double objective = 0.0;
  /// sum_i p_i (1 - exp(-c_i / 2))
  double achieved_mass = 0.0;
  int iterations = 0;

  bool any_positive() const;
};

/// Minimise the summed ellipse area sum_i a_i c_i subject to
/// sum_i p_i (1 - exp(-c_i/2)) >= tau, c_i >= 0, with a_i = pi sqrt(det Sigma_i).
///
/// Stationarity gives c_i(nu) = max(0, 2 ln(nu p_i / (2 a_i))), so the problem
/// reduces to finding the scalar dual nu where the (nondecreasing) constraint
/// value g(nu) reaches tau. nu is bracketed and bisected, then polished with
/// the closed form nu = 2 A_S / (P_S - tau) on the final active set S.
///
/// Throws InvalidTau for tau outside (0, 1) and DegenerateMixture when no mode
/// carries weight above p_floor or tau exceeds the reachable mass.
LevelSolution solve_levels(const GmmPrediction& gmm, double tau,
                           const SolverOptions& options = {});

/// The constraint value g(nu) for a given dual; exposed for property tests.
double level_constraint_value(const GmmPrediction& gmm, double dual, double p_floor = 1e-12);

/// Per-mode levels c_i(nu) for a given dual.
std::vector<double> levels_for_dual(const GmmPrediction& gmm, double dual, double p_floor = 1e-12);

}  // namespace frsmon
