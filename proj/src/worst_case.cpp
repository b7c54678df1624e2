#include "frsmon/worst_case.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>

namespace frsmon {

namespace {

double max_eigenvalue(const Mat2& m) {
  const Mat2 s = 0.5 * (m + m.transpose());
  const double mid = 0.5 * (s(0, 0) + s(1, 1));
  return mid + std::hypot(0.5 * (s(0, 0) - s(1, 1)), s(0, 1));
}

}  // namespace

double worst_case_radius(double v0, double t, double a_max, double v_max) {
  if (!(t >= 0.0)) throw FrsError(ErrorCode::InvalidArgument, "time must be nonnegative");
  if (!(v0 >= 0.0)) throw FrsError(ErrorCode::InvalidArgument, "speed must be nonnegative");
  if (!(a_max >= 0.0)) throw FrsError(ErrorCode::InvalidArgument, "a_max must be nonnegative");
  const double cap = std::max(v_max, v0);
  if (a_max == 0.0) return v0 * t;
  const double t_sat = (cap - v0) / a_max;
  if (t <= t_sat) return v0 * t + 0.5 * a_max * t * t;
  return v0 * t_sat + 0.5 * a_max * t_sat * t_sat + cap * (t - t_sat);
}

DiscSet worst_case_frs(const AgentKinematicState& state, double t, const WorstCaseLimits& limits) {
  return {state.position, worst_case_radius(state.speed, t, limits.a_max, limits.v_max)};
}

std::vector<DiscSet> parametric_wc_frs(std::span<const GmmPrediction> steps,
                                       const AgentKinematicState& state, int step, double dt) {
  if (step < 1) throw FrsError(ErrorCode::InvalidArgument, "horizon step starts at 1");
  if (!(dt > 0.0)) throw FrsError(ErrorCode::InvalidArgument, "dt must be positive");
  if (static_cast<int>(steps.size()) < step) {
    throw FrsError(ErrorCode::MissingSteps, "need predictions for steps 1.." + std::to_string(step));
  }
  const std::size_t k_modes = steps.front().size();
  std::vector<double> speed_bound(k_modes, 0.0);
  for (int k = 0; k < step; ++k) {
    const auto& cur = steps[static_cast<std::size_t>(k)];
    if (cur.size() != k_modes) {
      throw FrsError(ErrorCode::InvalidArgument, "mode count changes across horizon steps");
    }
    for (std::size_t i = 0; i < k_modes; ++i) {
      const auto& m = cur.modes()[i];
      Vec2 prev_mean = state.position;
      Mat2 prev_cov = Mat2::Zero();
      if (k > 0) {
        const auto& pm = steps[static_cast<std::size_t>(k - 1)].modes()[i];
        prev_mean = pm.mean();
        prev_cov = pm.cov();
      }
      const double growth = std::max(0.0, max_eigenvalue(m.cov() - prev_cov));
      const double v = ((m.mean() - prev_mean).norm() + 3.0 * std::sqrt(growth)) / dt;
      speed_bound[i] = std::max(speed_bound[i], v);
    }
  }
  const double t = step * dt;
  std::vector<DiscSet> out;
  out.reserve(k_modes);
  for (double v : speed_bound) out.push_back({state.position, v * t});
  return out;
}

bool discs_contain(std::span<const DiscSet> discs, const Vec2& x) {
  return std::any_of(discs.begin(), discs.end(), [&](const DiscSet& d) { return d.contains(x); });
}

}  // namespace frsmon
