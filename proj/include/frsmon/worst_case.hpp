#pragma once

#include "frsmon/gmm.hpp"

#include <span>
#include <vector>

namespace frsmon {

/// Planar vehicle state (x, y, heading, speed).
struct AgentKinematicState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
};

struct DiscSet {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;

  bool contains(const Vec2& x) const { return (x - center).norm() <= radius; }
};

struct WorstCaseLimits {
  double a_max = 4.0;   // m/s^2
  double v_max = 15.0;  // m/s
};

/// Largest distance travelled in t seconds when speed starts at v0 and grows
/// at most a_max until it saturates at max(v_max, v0). Heading is free.
double worst_case_radius(double v0, double t, double a_max, double v_max);

/// Disc over-approximation of the Dubins-car reachable set after t seconds.
DiscSet worst_case_frs(const AgentKinematicState& state, double t,
                       const WorstCaseLimits& limits = {});

/// Predictor-parameterised worst case: each mode gets a speed bound from its
/// largest per-step mean displacement plus 3 sigma of the covariance growth,
/// and contributes a disc of radius v_i * t around the current position.
/// `steps[k]` is the prediction for horizon step k + 1; the first `step`
/// entries are used. Throws MissingSteps if fewer are supplied.
std::vector<DiscSet> parametric_wc_frs(std::span<const GmmPrediction> steps,
                                       const AgentKinematicState& state, int step, double dt);

/// Union membership over discs.
bool discs_contain(std::span<const DiscSet> discs, const Vec2& x);

}  // namespace frsmon
