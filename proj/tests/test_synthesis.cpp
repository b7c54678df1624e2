#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "frsmon/error.hpp"
#include "frsmon/synthesis.hpp"
#include "frsmon/world.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>

using namespace frsmon;
using doctest::Approx;

namespace {

constexpr int kSteps = 24;
constexpr double kDt = 0.5;

/// Ego driving along +x at 10 m/s; one contender heading north that passes
/// x = cross_x at step `at`.
Scene crossing_scene(double cross_x, int at) {
  Scene s;
  s.id = "crossing";
  s.dt = kDt;
  AgentTrack ego;
  ego.id = 0;
  ego.role = Role::Ego;
  for (int k = 0; k < kSteps; ++k) ego.states.push_back({Vec2(10.0 * k * kDt, 0), 0.0, 10.0});
  AgentTrack c;
  c.id = 1;
  c.maneuver = Maneuver::Cross;
  for (int k = 0; k < kSteps; ++k) {
    c.states.push_back({Vec2(cross_x, 8.0 * (k - at) * kDt), 0.5 * std::numbers::pi, 8.0});
  }
  s.tracks = {ego, c};
  return s;
}

double replay_gap(const SynthesisResult& r) {
  const auto& ego = r.scene.ego().states;
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < ego.size(); ++k) {
    const auto n = oracle::bicycle_euler({ego[k].position.x(), ego[k].position.y(), ego[k].heading, ego[k].speed},
                                         r.controls[k].accel, r.controls[k].steer, kDt);
    worst = std::max(worst, std::hypot(n.x - ego[k + 1].position.x(), n.y - ego[k + 1].position.y()));
  }
  return worst;
}

}  // namespace

TEST_CASE("ego co-arrives with a contender crossing ahead") {
  // The contender passes x = 36 after 3 s; the unchanged ego would be at x = 30.
  const auto scene = crossing_scene(36.0, 6);
  const auto r = synthesize_unsafe(scene);
  const auto& c = *r.scene.conflict;
  CHECK(c.agent == 1);
  CHECK(c.t_o >= 5);
  const auto& ego = r.scene.ego().states;
  const Vec2 contender_at = scene.tracks[1].states[static_cast<std::size_t>(c.t_o)].position;
  CHECK((ego[static_cast<std::size_t>(c.t_o)].position - contender_at).norm() <= 0.5);
  CHECK(r.terminal_error <= 0.5);
  CHECK(ego.front().position == scene.ego().states.front().position);
  CHECK(ego.front().speed == scene.ego().states.front().speed);
  CHECK(ego.size() == scene.ego().states.size());
  CHECK(r.scene.label == SceneLabel::SynthUnsafe);
  CHECK(r.scene.source_id == "crossing");
  CHECK(r.scene.tracks[1] == scene.tracks[1]);
  CHECK(r.max_residual <= 1e-6);
  CHECK(replay_gap(r) <= 1e-6);
  for (const auto& u : r.controls) {
    CHECK(std::abs(u.accel) <= 4.0);
    CHECK(std::abs(u.steer) <= 0.6);
  }
}

TEST_CASE("an already-colliding ego needs almost no correction") {
  // Contender crosses x = 50 at step 10, exactly where the ego is then.
  const auto scene = crossing_scene(50.0, 10);
  const auto r = synthesize_unsafe(scene);
  CHECK(r.iterations <= 2);
  CHECK(r.terminal_error <= 0.1);
  CHECK(r.scene.conflict->t_o == 10);
  CHECK(r.scene.conflict->d_min == Approx(0.0).scale(1.0));
}

TEST_CASE("an unreachable conflict point is infeasible") {
  // The ego path reaches the crossing at x = 180, but not from a 10 m/s start
  // within the contender's passage (about 3 s).
  auto scene = crossing_scene(180.0, 6);
  for (int k = 0; k < kSteps; ++k) scene.ego().states[static_cast<std::size_t>(k)].position.x() = 180.0 * k / (kSteps - 1);
  try {
    synthesize_unsafe(scene);
    FAIL("expected Infeasible");
  } catch (const FrsError& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
  }
  CHECK_FALSE(find_pairing(crossing_scene(400.0, 6)).has_value());
}

TEST_CASE("pairing respects the threshold and the earliest step") {
  // A contender driving alongside the ego, 15 m to its left.
  auto scene = crossing_scene(50.0, 10);
  for (std::size_t k = 0; k < scene.length(); ++k) {
    scene.tracks[1].states[k] = {Vec2(10.0 * static_cast<double>(k) * kDt, 15.0), 0.0, 10.0};
  }
  SynthesisConfig cfg;
  CHECK_FALSE(find_pairing(scene, cfg).has_value());
  cfg.pair_threshold = 20.0;
  const auto p = find_pairing(scene, cfg);
  REQUIRE(p.has_value());
  CHECK(p->t_o == cfg.min_t_o);
  CHECK(p->d_min == Approx(15.0));
}

TEST_CASE("replay residual measures distance from the bicycle model") {
  const auto r = synthesize_unsafe(crossing_scene(40.0, 8));
  CHECK(replay_residual(r.scene.ego(), r.controls, kDt, BicycleParams{}) <= 1e-9);
  AgentTrack bent = r.scene.ego();
  bent.states[5].position.y() += 0.3;
  CHECK(replay_residual(bent, r.controls, kDt, BicycleParams{}) == Approx(0.3).epsilon(1e-6));
}

TEST_CASE("synthesized scenes from the world are genuinely unsafe") {
  WorldConfig cfg;
  cfg.n_scenes = 60;
  int attempted = 0;
  int converged = 0;
  for (const auto& s : gen_world(cfg, 70)) {
    if (!find_pairing(s)) continue;
    ++attempted;
    try {
      const auto r = synthesize_unsafe(s);
      ++converged;
      const auto& c = *r.scene.conflict;
      const auto* contender = r.scene.find_track(c.agent);
      const double d = (r.scene.ego().states[static_cast<std::size_t>(c.t_o)].position -
                        contender->states[static_cast<std::size_t>(c.t_o)].position)
                           .norm();
      CHECK(d <= 0.5);
      CHECK(replay_gap(r) <= 1e-6);
      CHECK(scene_content_hash(r.scene) == scene_content_hash(s));
    } catch (const FrsError& e) {
      CHECK(e.code() == ErrorCode::Infeasible);
    }
  }
  CHECK(attempted > 20);
  CHECK(converged >= 0.85 * attempted);
}
