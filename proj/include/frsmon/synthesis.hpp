#pragma once

#include "frsmon/scenario.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace frsmon {

struct ClosestApproach {
  Vec2 p_c = Vec2::Zero();
  int t_e = 0;
  int t_o = 0;
  double d_min = 0.0;
};

/// Exhaustive scan over step pairs (ego step t_e, contender step t_o >= t_o_min).
/// p_c is the contender position at t_o. Ties go to the smallest t_o, then t_e.
/// Contender steps rejected by `admissible` are skipped; d_min is infinite
/// when nothing is left.
ClosestApproach closest_approach(
    const AgentTrack& ego, const AgentTrack& contender, int t_o_min = 0,
    const std::function<bool(int t_o, const Vec2& p)>& admissible = {});

struct SynthesisConfig {
  BicycleParams bicycle;
  /// Contenders farther than this from the ego path are not paired (m).
  double pair_threshold = 10.0;
  /// Earliest admissible conflict step; earlier conflicts have no history to monitor.
  int min_t_o = 5;
  double pos_tol = 0.5;
  /// Stop once the terminal error is below this (m).
  double target_tol = 0.1;
  int max_iterations = 500;
  /// Weight of the normalised control effort term.
  double effort_weight = 1e-3;
};

/// Contender and approach chosen for synthesis, or nullopt when none is close
/// enough. Only conflict points the ego could cover by t_o under its speed
/// envelope (a_max, v_max) are considered.
std::optional<ConflictInfo> find_pairing(const Scene& scene, const SynthesisConfig& config = {});

struct SynthesisResult {
  Scene scene;
  /// Ego controls for steps 0 .. length - 2; zero after t_o.
  std::vector<BicycleControl> controls;
  int iterations = 0;
  double terminal_error = 0.0;
  /// Largest per-step gap between the emitted ego track and a bicycle_step replay.
  double max_residual = 0.0;
};

/// Replace the ego with a bicycle-feasible trajectory that reaches the
/// contender's closest-approach point at step t_o. The contender tracks are
/// kept. Throws Infeasible when no pairing exists, the point is out of range,
/// or the optimiser ends farther than pos_tol from it.
SynthesisResult synthesize_unsafe(const Scene& scene, const SynthesisConfig& config = {});

/// Largest per-step position gap between `track` and the replay of its own
/// inferred controls, i.e. how far the track is from the bicycle model.
double replay_residual(const AgentTrack& track, const std::vector<BicycleControl>& controls,
                       double dt, const BicycleParams& params);

}  // namespace frsmon
