#include "frsmon/world.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace frsmon {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPlacementAttempts = 40;

std::mt19937_64 scene_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng) { return std::bernoulli_distribution(0.5)(rng); }

struct Placement {
  AgentKinematicState start;
  ManeuverProfile profile;
};

/// Start state and profile for a contender whose path meets the ego's
/// corridor around time `ego_cross_time` at x = cross_x.
Placement place_contender(Maneuver m, std::mt19937_64& rng, const WorldConfig& cfg,
                          double cross_x, double ego_cross_time) {
  Placement p;
  p.profile.maneuver = m;
  const double w = cfg.lane_width;
  const int last_start = std::max(2, cfg.steps - 8);

  switch (m) {
    case Maneuver::KeepLane:
    case Maneuver::Brake: {
      const double speed = uniform(rng, 6.0, 13.0);
      if (coin(rng)) {
        p.start.position = Vec2(uniform(rng, -25.0, 40.0), -w);
        p.start.heading = 0.0;
      } else {
        p.start.position = Vec2(uniform(rng, 40.0, 160.0), w);
        p.start.heading = kPi;
      }
      p.start.speed = speed;
      if (m == Maneuver::Brake) {
        p.profile.start_step = std::uniform_int_distribution<int>(2, last_start)(rng);
        p.profile.decel = uniform(rng, 1.5, 3.5);
      }
      break;
    }
    case Maneuver::Cross:
    case Maneuver::TurnLeft:
    case Maneuver::TurnRight: {
      const double speed = uniform(rng, 5.0, 12.0);
      const double gap = uniform(rng, 2.0, 5.0) * (coin(rng) ? 1.0 : -1.0);
      const double arrive = std::max(1.0, ego_cross_time + gap);
      const bool northbound = coin(rng);
      const double dir = northbound ? 1.0 : -1.0;
      p.start.position = Vec2(cross_x + (northbound ? 0.5 * w : -0.5 * w), -dir * speed * arrive);
      p.start.heading = dir * 0.5 * kPi;
      p.start.speed = speed;
      if (m != Maneuver::Cross) {
        p.profile.start_step = std::max(1, static_cast<int>(std::lround((arrive - 1.5) / cfg.dt)));
        const double rate = uniform(rng, 0.3, 0.5);
        p.profile.yaw_rate = m == Maneuver::TurnLeft ? rate : -rate;
      }
      break;
    }
  }
  return p;
}

std::vector<std::vector<Vec2>> lane_map(bool intersection, double cross_x, double w) {
  std::vector<std::vector<Vec2>> lanes;
  for (double y : {-w, 0.0, w}) lanes.push_back({Vec2(-50.0, y), Vec2(250.0, y)});
  if (intersection) {
    lanes.push_back({Vec2(cross_x + 0.5 * w, -150.0), Vec2(cross_x + 0.5 * w, 150.0)});
    lanes.push_back({Vec2(cross_x - 0.5 * w, 150.0), Vec2(cross_x - 0.5 * w, -150.0)});
  }
  return lanes;
}

double min_aligned_distance(const std::vector<AgentKinematicState>& a,
                            const std::vector<AgentKinematicState>& b) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
    best = std::min(best, (a[k].position - b[k].position).norm());
  }
  return best;
}

}  // namespace

std::vector<AgentKinematicState> simulate_contender(const AgentKinematicState& start,
                                                    const ManeuverProfile& profile, int steps,
                                                    double dt, const ProcessNoise& noise,
                                                    const BicycleParams& params,
                                                    std::uint64_t noise_seed) {
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<AgentKinematicState> states;
  states.reserve(static_cast<std::size_t>(steps));
  states.push_back(start);
  double turn_heading = 0.0;
  bool turn_done = false;
  for (int k = 0; k + 1 < steps; ++k) {
    const auto& s = states.back();
    double accel = 0.0;
    double yaw_rate = 0.0;
    const bool active = k >= profile.start_step;
    switch (profile.maneuver) {
      case Maneuver::Brake:
        if (active) accel = -profile.decel;
        break;
      case Maneuver::TurnLeft:
      case Maneuver::TurnRight:
        if (active && !turn_done) {
          if (k == profile.start_step) turn_heading = s.heading;
          if (std::abs(s.heading - turn_heading) >= 0.5 * kPi) {
            turn_done = true;
          } else {
            yaw_rate = profile.yaw_rate;
          }
        }
        break;
      case Maneuver::KeepLane:
      case Maneuver::Cross:
        break;
    }
    const double z0 = normal(rng);
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double z3 = normal(rng);
    BicycleControl u{accel + noise.sigma_accel * z0,
                     steer_for_yaw_rate(yaw_rate, s.speed, params) + noise.sigma_steer * z1};
    auto next = bicycle_step(s, clamp_control(u, params), dt, params);
    next.position += noise.sigma_pos * Vec2(z2, z3);
    states.push_back(next);
  }
  return states;
}

std::vector<Scene> gen_world(const WorldConfig& cfg, std::uint64_t seed) {
  if (cfg.n_scenes < 0 || cfg.steps < 2 || !(cfg.dt > 0.0) || cfg.min_contenders < 1 ||
      cfg.max_contenders < cfg.min_contenders) {
    throw FrsError(ErrorCode::InvalidArgument, "invalid world configuration");
  }
  double mix_total = 0.0;
  for (double w : cfg.maneuver_mix) {
    if (w < 0.0) throw FrsError(ErrorCode::InvalidArgument, "negative maneuver weight");
    mix_total += w;
  }
  if (!(mix_total > 0.0)) throw FrsError(ErrorCode::InvalidArgument, "empty maneuver mix");

  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.n_scenes));
  for (int i = 0; i < cfg.n_scenes; ++i) {
    auto rng = scene_rng(seed, static_cast<std::uint64_t>(i));
    Scene scene;
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05d", cfg.id_prefix.c_str(), i);
    scene.id = id;
    scene.dt = cfg.dt;
    scene.ood = std::bernoulli_distribution(std::clamp(cfg.ood_fraction, 0.0, 1.0))(rng);

    const bool intersection = std::bernoulli_distribution(cfg.intersection_fraction)(rng);
    const double ego_speed = uniform(rng, 8.0, 12.0);
    const double cross_time = uniform(rng, 4.5, 7.5);
    const double cross_x = ego_speed * cross_time;

    AgentTrack ego;
    ego.id = 0;
    ego.role = Role::Ego;
    ego.maneuver = Maneuver::KeepLane;
    for (int k = 0; k < cfg.steps; ++k) {
      ego.states.push_back({Vec2(ego_speed * k * cfg.dt, 0.0), 0.0, ego_speed});
    }
    scene.lanes = lane_map(intersection, cross_x, cfg.lane_width);

    // Without a crossing road only lane-following maneuvers are possible.
    auto mix = cfg.maneuver_mix;
    if (!intersection) {
      for (std::size_t j = 0; j < mix.size(); ++j) {
        const Maneuver m = kAllManeuvers[j];
        if (m != Maneuver::KeepLane && m != Maneuver::Brake) mix[j] = 0.0;
      }
      if (mix[0] + mix[1] + mix[2] + mix[3] + mix[4] <= 0.0) mix = cfg.maneuver_mix;
    }
    std::discrete_distribution<int> pick_maneuver(mix.begin(), mix.end());
    const int n_contenders =
        std::uniform_int_distribution<int>(cfg.min_contenders, cfg.max_contenders)(rng);
    std::vector<AgentTrack> contenders;
    int next_id = 1;
    // Keep drawing until at least one contender is placed safely.
    while (contenders.empty()) {
      for (int c = 0; c < n_contenders; ++c) {
        const Maneuver m = kAllManeuvers[pick_maneuver(rng)];
        for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
          const auto placement = place_contender(m, rng, cfg, cross_x, cross_time);
          auto states = simulate_contender(placement.start, placement.profile, cfg.steps, cfg.dt,
                                           cfg.noise, cfg.bicycle, rng());
          if (min_aligned_distance(ego.states, states) < cfg.min_separation) continue;
          AgentTrack t;
          t.id = next_id++;
          t.role = Role::Contender;
          t.maneuver = m;
          t.states = std::move(states);
          contenders.push_back(std::move(t));
          break;
        }
      }
    }
    scene.tracks.push_back(std::move(ego));
    for (auto& t : contenders) scene.tracks.push_back(std::move(t));
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace frsmon
