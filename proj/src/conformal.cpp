#include "frsmon/conformal.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace frsmon {

double CalibrationModel::eta(int t) const {
  const auto it = per_step.find(t);
  if (it == per_step.end()) {
    throw FrsError(ErrorCode::MissingStep, "no calibration for horizon step " + std::to_string(t));
  }
  return it->second.eta;
}

double nonconformity(const GmmPrediction& prediction, const LevelSolution& levels, const Vec2& x) {
  if (levels.levels.size() != prediction.size()) {
    throw FrsError(ErrorCode::InvalidArgument, "level count does not match mixture");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double c = levels.levels[i];
    if (c <= 0.0) continue;
    best = std::min(best, mahalanobis(x, prediction.modes()[i]) / c);
  }
  if (!std::isfinite(best)) {
    throw FrsError(ErrorCode::AllLevelsZero, "every level is zero");
  }
  return best;
}

std::size_t conformal_rank(std::size_t n, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
  }
  // The epsilon absorbs products like 20 * 0.95 landing a hair above 19.
  const double raw = (static_cast<double>(n) + 1.0) * (1.0 - gamma);
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(raw - 1e-9)));
  if (n == 0 || rank > n) {
    std::ostringstream os;
    os << n << " scores cannot support gamma = " << gamma;
    throw FrsError(ErrorCode::InsufficientData, os.str());
  }
  return rank;
}

CalibrationModel calibrate(std::span<const CalibrationRecord> records,
                           std::span<const LevelSolution> levels, double gamma, double tau) {
  if (records.size() != levels.size()) {
    throw FrsError(ErrorCode::InvalidArgument, "one level solution per record is required");
  }
  std::map<int, std::vector<double>> scores;
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto& r = records[j];
    if (r.prediction.horizon_step() != r.horizon_step) {
      throw FrsError(ErrorCode::InvalidArgument, "record horizon step mismatch");
    }
    scores[r.horizon_step].push_back(nonconformity(r.prediction, levels[j], r.ground_truth));
  }

  CalibrationModel model;
  model.gamma = gamma;
  model.tau = tau;
  for (auto& [t, s] : scores) {
    const std::size_t rank = conformal_rank(s.size(), gamma);
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(rank - 1), s.end());
    double eta = s[rank - 1];
    // A zero quantile would collapse the set; fall back to the smallest positive scale.
    if (!(eta > 0.0)) eta = std::numeric_limits<double>::min();
    model.per_step[t] = {eta, s.size()};
  }
  return model;
}

CalibrationModel calibrate(std::span<const CalibrationRecord> records, double gamma, double tau) {
  std::vector<LevelSolution> levels;
  levels.reserve(records.size());
  for (const auto& r : records) levels.push_back(solve_levels(r.prediction, tau));
  return calibrate(records, levels, gamma, tau);
}

FrsSet conformalized_frs(const GmmPrediction& prediction, const LevelSolution& levels,
                         const CalibrationModel& model) {
  return build_frs(prediction, levels, model.eta(prediction.horizon_step()));
}

namespace {

template <class EtaFor>
CoverageReport coverage_impl(std::span<const CalibrationRecord> records,
                             std::span<const LevelSolution> levels, EtaFor eta_for) {
  if (records.size() != levels.size()) {
    throw FrsError(ErrorCode::InvalidArgument, "one level solution per record is required");
  }
  CoverageReport rep;
  std::map<int, std::size_t> misses;
  std::size_t pooled_misses = 0;
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto& r = records[j];
    const double eta = eta_for(r.horizon_step);
    bool covered = true;
    if (std::isfinite(eta)) {
      covered = build_frs(r.prediction, levels[j], eta).contains(r.ground_truth);
    }
    ++rep.count_per_step[r.horizon_step];
    if (!covered) {
      ++misses[r.horizon_step];
      ++pooled_misses;
    }
  }
  for (const auto& [t, n] : rep.count_per_step) {
    rep.miscoverage_per_step[t] = static_cast<double>(misses[t]) / static_cast<double>(n);
  }
  rep.total = records.size();
  rep.pooled_miscoverage =
      rep.total ? static_cast<double>(pooled_misses) / static_cast<double>(rep.total) : 0.0;
  return rep;
}

}  // namespace

CoverageReport empirical_coverage(std::span<const CalibrationRecord> records,
                                  std::span<const LevelSolution> levels,
                                  const CalibrationModel& model) {
  return coverage_impl(records, levels, [&](int t) { return model.eta(t); });
}

CoverageReport empirical_coverage(std::span<const CalibrationRecord> records,
                                  std::span<const LevelSolution> levels, double eta) {
  if (!(eta > 0.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "eta must be positive");
  }
  return coverage_impl(records, levels, [&](int) { return eta; });
}

}  // namespace frsmon
