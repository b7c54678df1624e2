#pragma once

#include "frsmon/predictor.hpp"
#include "frsmon/scenario.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace frsmon {

/// Synthetic traffic: an ego driving straight along +x and 1-4 contenders
/// whose paths come near the ego's but are separated from it in time.
struct WorldConfig {
  int n_scenes = 100;
  int steps = 24;
  double dt = 0.5;
  int min_contenders = 1;
  int max_contenders = 4;
  /// Relative frequency of each maneuver, indexed like kAllManeuvers.
  std::array<double, 5> maneuver_mix = {0.2, 0.2, 0.2, 0.2, 0.2};
  /// Scenes without a crossing road only get keep-lane and brake contenders.
  double intersection_fraction = 0.8;
  /// Fraction of scenes flagged out-of-distribution for the predictor.
  double ood_fraction = 0.0;
  /// Minimum time-aligned ego/contender distance (m) in generated scenes.
  double min_separation = 11.0;
  double lane_width = 3.5;
  ProcessNoise noise;
  BicycleParams bicycle;
  std::string id_prefix = "scene";
};

/// Deterministic for a given seed; scene i depends only on (seed, i).
std::vector<Scene> gen_world(const WorldConfig& config, std::uint64_t seed);

/// One contender behaviour: nominal controls plus process noise.
struct ManeuverProfile {
  Maneuver maneuver = Maneuver::KeepLane;
  int start_step = 0;
  /// Signed yaw rate for turns (rad/s, positive = left).
  double yaw_rate = 0.0;
  double decel = 0.0;
};

/// Roll a contender forward under its profile. `noise_seed` drives the noise.
std::vector<AgentKinematicState> simulate_contender(const AgentKinematicState& start,
                                                    const ManeuverProfile& profile, int steps,
                                                    double dt, const ProcessNoise& noise,
                                                    const BicycleParams& params,
                                                    std::uint64_t noise_seed);

}  // namespace frsmon
