#pragma once

#include "frsmon/gmm.hpp"
#include "frsmon/worst_case.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace frsmon {

enum class Role { Ego, Contender };
enum class SceneLabel { Safe, SynthUnsafe };
enum class Maneuver { KeepLane, TurnLeft, TurnRight, Brake, Cross };

inline constexpr Maneuver kAllManeuvers[] = {Maneuver::KeepLane, Maneuver::TurnLeft,
                                             Maneuver::TurnRight, Maneuver::Brake,
                                             Maneuver::Cross};

std::string_view to_string(Role r);
std::string_view to_string(SceneLabel l);
std::string_view to_string(Maneuver m);
Role role_from_string(std::string_view s);
SceneLabel label_from_string(std::string_view s);
Maneuver maneuver_from_string(std::string_view s);

/// States sampled at the scene's fixed dt; index 0 is the scene start.
struct AgentTrack {
  int id = 0;
  Role role = Role::Contender;
  std::vector<AgentKinematicState> states;
  std::optional<Maneuver> maneuver;

  bool operator==(const AgentTrack& other) const;
};

/// Where a synthesized unsafe ego meets its contender.
struct ConflictInfo {
  int agent = 0;
  int t_e = 0;
  int t_o = 0;
  Vec2 p_c = Vec2::Zero();
  double d_min = 0.0;

  bool operator==(const ConflictInfo& other) const;
};

struct Scene {
  std::string id;
  double dt = 0.5;
  SceneLabel label = SceneLabel::Safe;
  std::vector<AgentTrack> tracks;
  /// Lane centre polylines (map context).
  std::vector<std::vector<Vec2>> lanes;
  /// Predictions for this scene get the out-of-distribution mean offset.
  bool ood = false;
  std::optional<ConflictInfo> conflict;
  /// Id of the safe scene an unsafe scene was synthesized from.
  std::string source_id;

  const AgentTrack& ego() const;
  AgentTrack& ego();
  const AgentTrack* find_track(int id) const;
  std::size_t length() const;

  bool operator==(const Scene& other) const;
};

/// Stable 64-bit content hash of the scene's contender tracks and dt. An
/// unsafe scene hashes identically to its source, so calibration/evaluation
/// overlap checks see through synthesis.
std::uint64_t scene_content_hash(const Scene& scene);

struct BicycleParams {
  double wheelbase = 2.7;     // m
  double a_max = 4.0;         // m/s^2
  double delta_max = 0.6;     // rad
  double v_max = 15.0;        // m/s
};

struct BicycleControl {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad
};

using BicycleState = AgentKinematicState;

/// Forward-Euler kinematic bicycle; speed is clamped to [0, v_max].
/// Throws ControlOutOfBounds when |accel| > a_max or |steer| > delta_max.
BicycleState bicycle_step(const BicycleState& state, const BicycleControl& control, double dt,
                          const BicycleParams& params = {});

/// Clamp a control into the admissible box.
BicycleControl clamp_control(const BicycleControl& control, const BicycleParams& params);

/// Steering angle producing yaw rate `omega` at `speed` (speed floored at 1 m/s).
double steer_for_yaw_rate(double omega, double speed, const BicycleParams& params);

}  // namespace frsmon
