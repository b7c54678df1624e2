#pragma once

#include "frsmon/frs_set.hpp"
#include "frsmon/gmm.hpp"
#include "frsmon/level_solver.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace frsmon {

/// Default miscoverage target for calibration (0.95 coverage).
inline constexpr double kDefaultGamma = 0.05;

/// A prediction paired with the position the agent actually reached.
struct CalibrationRecord {
  GmmPrediction prediction;
  Vec2 ground_truth;
  int horizon_step = 1;
};

struct StepCalibration {
  double eta = 1.0;
  std::size_t n = 0;
};

/// Per-horizon-step covariance scale from split conformal calibration.
struct CalibrationModel {
  double gamma = kDefaultGamma;
  /// Mass requirement the scores were computed against.
  double tau = kDefaultTau;
  std::map<int, StepCalibration> per_step;
  /// Content hashes of the scenes that produced the records.
  std::vector<std::uint64_t> source_hashes;

  /// eta for step t; throws MissingStep when t was never calibrated.
  double eta(int t) const;
  bool has_step(int t) const { return per_step.count(t) != 0; }
};

/// Smallest covariance scale that puts x inside the reachable set:
/// min over modes with c_i > 0 of V_i(x) / c_i. Throws AllLevelsZero.
double nonconformity(const GmmPrediction& prediction, const LevelSolution& levels, const Vec2& x);

/// Index (1-based) of the order statistic used as the conformal quantile:
/// ceil((n + 1)(1 - gamma)). Throws InsufficientData when it exceeds n.
std::size_t conformal_rank(std::size_t n, double gamma);

/// Split-conformal calibration, one eta per horizon step. `levels[j]` must be
/// the solution for `records[j].prediction`.
CalibrationModel calibrate(std::span<const CalibrationRecord> records,
                           std::span<const LevelSolution> levels, double gamma, double tau);

/// Convenience overload solving levels at tau for every record.
CalibrationModel calibrate(std::span<const CalibrationRecord> records, double gamma,
                           double tau = kDefaultTau);

/// E*({eta_t Sigma_i}); levels are reused unchanged.
FrsSet conformalized_frs(const GmmPrediction& prediction, const LevelSolution& levels,
                         const CalibrationModel& model);

struct CoverageReport {
  std::map<int, double> miscoverage_per_step;
  std::map<int, std::size_t> count_per_step;
  double pooled_miscoverage = 0.0;
  std::size_t total = 0;
};

/// Fraction of held-out ground truths outside C(s, eta_t), per step and pooled.
CoverageReport empirical_coverage(std::span<const CalibrationRecord> records,
                                  std::span<const LevelSolution> levels,
                                  const CalibrationModel& model);

/// Same, with one fixed eta for all steps. eta may be +infinity.
CoverageReport empirical_coverage(std::span<const CalibrationRecord> records,
                                  std::span<const LevelSolution> levels, double eta);

}  // namespace frsmon
