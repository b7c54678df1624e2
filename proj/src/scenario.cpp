#include "frsmon/scenario.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace frsmon {

std::string_view to_string(Role r) { return r == Role::Ego ? "ego" : "contender"; }

std::string_view to_string(SceneLabel l) {
  return l == SceneLabel::Safe ? "safe" : "synth_unsafe";
}

std::string_view to_string(Maneuver m) {
  switch (m) {
    case Maneuver::KeepLane: return "keep_lane";
    case Maneuver::TurnLeft: return "turn_left";
    case Maneuver::TurnRight: return "turn_right";
    case Maneuver::Brake: return "brake";
    case Maneuver::Cross: return "cross";
  }
  return "keep_lane";
}

Role role_from_string(std::string_view s) {
  if (s == "ego") return Role::Ego;
  if (s == "contender") return Role::Contender;
  throw FrsError(ErrorCode::Format, "unknown role '" + std::string(s) + "'");
}

SceneLabel label_from_string(std::string_view s) {
  if (s == "safe") return SceneLabel::Safe;
  if (s == "synth_unsafe") return SceneLabel::SynthUnsafe;
  throw FrsError(ErrorCode::Format, "unknown scene label '" + std::string(s) + "'");
}

Maneuver maneuver_from_string(std::string_view s) {
  for (Maneuver m : kAllManeuvers) {
    if (to_string(m) == s) return m;
  }
  throw FrsError(ErrorCode::Format, "unknown maneuver '" + std::string(s) + "'");
}

namespace {

bool same_state(const AgentKinematicState& a, const AgentKinematicState& b) {
  return a.position == b.position && a.heading == b.heading && a.speed == b.speed;
}

class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xffu;
      hash_ *= 0x100000001b3ull;
    }
  }
  void add(double d) { add(std::bit_cast<std::uint64_t>(d)); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace

bool AgentTrack::operator==(const AgentTrack& other) const {
  return id == other.id && role == other.role && maneuver == other.maneuver &&
         std::equal(states.begin(), states.end(), other.states.begin(), other.states.end(),
                    same_state);
}

bool ConflictInfo::operator==(const ConflictInfo& other) const {
  return agent == other.agent && t_e == other.t_e && t_o == other.t_o && p_c == other.p_c &&
         d_min == other.d_min;
}

bool Scene::operator==(const Scene& other) const {
  return id == other.id && dt == other.dt && label == other.label && tracks == other.tracks &&
         lanes == other.lanes && ood == other.ood && conflict == other.conflict &&
         source_id == other.source_id;
}

const AgentTrack& Scene::ego() const {
  for (const auto& t : tracks) {
    if (t.role == Role::Ego) return t;
  }
  throw FrsError(ErrorCode::Format, "scene " + id + " has no ego track");
}

AgentTrack& Scene::ego() {
  return const_cast<AgentTrack&>(static_cast<const Scene&>(*this).ego());
}

const AgentTrack* Scene::find_track(int track_id) const {
  for (const auto& t : tracks) {
    if (t.id == track_id) return &t;
  }
  return nullptr;
}

std::size_t Scene::length() const { return tracks.empty() ? 0 : tracks.front().states.size(); }

std::uint64_t scene_content_hash(const Scene& scene) {
  Fnv1a h;
  h.add(scene.dt);
  for (const auto& t : scene.tracks) {
    if (t.role != Role::Contender) continue;
    h.add(static_cast<std::uint64_t>(t.id));
    for (const auto& s : t.states) {
      h.add(s.position.x());
      h.add(s.position.y());
      h.add(s.heading);
      h.add(s.speed);
    }
  }
  return h.value();
}

BicycleState bicycle_step(const BicycleState& state, const BicycleControl& control, double dt,
                          const BicycleParams& params) {
  constexpr double slack = 1e-12;
  if (std::abs(control.accel) > params.a_max + slack ||
      std::abs(control.steer) > params.delta_max + slack) {
    throw FrsError(ErrorCode::ControlOutOfBounds, "control outside admissible box");
  }
  BicycleState next = state;
  next.position.x() += state.speed * std::cos(state.heading) * dt;
  next.position.y() += state.speed * std::sin(state.heading) * dt;
  next.heading += state.speed * std::tan(control.steer) / params.wheelbase * dt;
  next.speed = std::clamp(state.speed + control.accel * dt, 0.0, params.v_max);
  return next;
}

BicycleControl clamp_control(const BicycleControl& control, const BicycleParams& params) {
  return {std::clamp(control.accel, -params.a_max, params.a_max),
          std::clamp(control.steer, -params.delta_max, params.delta_max)};
}

double steer_for_yaw_rate(double omega, double speed, const BicycleParams& params) {
  const double v = std::max(speed, 1.0);
  return std::clamp(std::atan(omega * params.wheelbase / v), -params.delta_max, params.delta_max);
}

}  // namespace frsmon
