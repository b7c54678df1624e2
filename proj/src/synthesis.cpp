#include "frsmon/synthesis.hpp"

#include "frsmon/error.hpp"
#include "frsmon/worst_case.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace frsmon {

ClosestApproach closest_approach(const AgentTrack& ego, const AgentTrack& contender,
                                 int t_o_min,
                                 const std::function<bool(int, const Vec2&)>& admissible) {
  ClosestApproach best;
  best.d_min = std::numeric_limits<double>::infinity();
  const int ne = static_cast<int>(ego.states.size());
  const int nc = static_cast<int>(contender.states.size());
  for (int t_o = std::max(0, t_o_min); t_o < nc; ++t_o) {
    const Vec2& pc = contender.states[static_cast<std::size_t>(t_o)].position;
    if (admissible && !admissible(t_o, pc)) continue;
    for (int t_e = 0; t_e < ne; ++t_e) {
      const double d = (ego.states[static_cast<std::size_t>(t_e)].position - pc).norm();
      if (d < best.d_min) {
        best = {pc, t_e, t_o, d};
      }
    }
  }
  return best;
}

std::optional<ConflictInfo> find_pairing(const Scene& scene, const SynthesisConfig& config) {
  const AgentTrack& ego = scene.ego();
  const auto& start = ego.states.front();
  const auto reachable = [&](int t_o, const Vec2& p) {
    return (p - start.position).norm() <=
           worst_case_radius(start.speed, t_o * scene.dt, config.bicycle.a_max,
                             config.bicycle.v_max);
  };
  std::optional<ConflictInfo> out;
  for (const auto& t : scene.tracks) {
    if (t.role != Role::Contender) continue;
    const auto ca = closest_approach(ego, t, config.min_t_o, reachable);
    if (!(ca.d_min <= config.pair_threshold)) continue;
    if (!out || ca.d_min < out->d_min) out = ConflictInfo{t.id, ca.t_e, ca.t_o, ca.p_c, ca.d_min};
  }
  return out;
}

namespace {

class Rollout {
 public:
  Rollout(const BicycleState& start, int steps, double dt, const BicycleParams& params)
      : start_(start), steps_(steps), dt_(dt), params_(params) {}

  int size() const { return 2 * steps_; }

  BicycleControl control(const Eigen::VectorXd& u, int k) const {
    return {u[2 * k], u[2 * k + 1]};
  }

  Vec2 terminal(const Eigen::VectorXd& u) const {
    BicycleState s = start_;
    for (int k = 0; k < steps_; ++k) s = bicycle_step(s, control(u, k), dt_, params_);
    return s.position;
  }

  void project(Eigen::VectorXd& u) const {
    for (int k = 0; k < steps_; ++k) {
      u[2 * k] = std::clamp(u[2 * k], -params_.a_max, params_.a_max);
      u[2 * k + 1] = std::clamp(u[2 * k + 1], -params_.delta_max, params_.delta_max);
    }
  }

  /// Diagonal of the effort normalisation D.
  Eigen::VectorXd effort_scale() const {
    Eigen::VectorXd d(size());
    for (int k = 0; k < steps_; ++k) {
      d[2 * k] = 1.0 / params_.a_max;
      d[2 * k + 1] = 1.0 / params_.delta_max;
    }
    return d;
  }

  Eigen::Matrix<double, 2, Eigen::Dynamic> jacobian(const Eigen::VectorXd& u) const {
    Eigen::Matrix<double, 2, Eigen::Dynamic> j(2, size());
    const double h = 1e-6;
    for (int i = 0; i < size(); ++i) {
      const double bound = (i % 2 == 0) ? params_.a_max : params_.delta_max;
      Eigen::VectorXd up = u;
      Eigen::VectorXd dn = u;
      up[i] = std::min(u[i] + h, bound);
      dn[i] = std::max(u[i] - h, -bound);
      j.col(i) = (terminal(up) - terminal(dn)) / (up[i] - dn[i]);
    }
    return j;
  }

 private:
  BicycleState start_;
  int steps_;
  double dt_;
  BicycleParams params_;
};

/// Controls that reproduce a track under the bicycle model as closely as the box allows.
Eigen::VectorXd invert_controls(const AgentTrack& track, int steps, double dt,
                                const BicycleParams& params) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * steps);
  for (int k = 0; k < steps && k + 1 < static_cast<int>(track.states.size()); ++k) {
    const auto& a = track.states[static_cast<std::size_t>(k)];
    const auto& b = track.states[static_cast<std::size_t>(k + 1)];
    u[2 * k] = (b.speed - a.speed) / dt;
    if (a.speed > 1e-6) {
      u[2 * k + 1] = std::atan((b.heading - a.heading) * params.wheelbase / (a.speed * dt));
    }
  }
  return u;
}

}  // namespace

double replay_residual(const AgentTrack& track, const std::vector<BicycleControl>& controls,
                       double dt, const BicycleParams& params) {
  double worst = 0.0;
  for (std::size_t k = 0; k < controls.size() && k + 1 < track.states.size(); ++k) {
    const auto next = bicycle_step(track.states[k], controls[k], dt, params);
    worst = std::max(worst, (next.position - track.states[k + 1].position).norm());
  }
  return worst;
}

SynthesisResult synthesize_unsafe(const Scene& scene, const SynthesisConfig& config) {
  const auto pairing = find_pairing(scene, config);
  if (!pairing) {
    throw FrsError(ErrorCode::Infeasible, "scene " + scene.id + " has no contender to pair with");
  }
  const AgentTrack& ego = scene.ego();
  const BicycleState start = ego.states.front();
  const int t_o = pairing->t_o;
  const double reach = config.bicycle.v_max * t_o * scene.dt;
  if ((pairing->p_c - start.position).norm() > reach) {
    throw FrsError(ErrorCode::Infeasible, "conflict point out of reach in scene " + scene.id);
  }

  const Rollout rollout(start, t_o, scene.dt, config.bicycle);
  const Eigen::VectorXd d = rollout.effort_scale();
  const Eigen::VectorXd d2 = d.cwiseProduct(d);
  const double rho = config.effort_weight;

  auto cost = [&](const Eigen::VectorXd& v, double& err) {
    const Vec2 e = rollout.terminal(v) - pairing->p_c;
    err = e.norm();
    return 0.5 * e.squaredNorm() + 0.5 * rho * v.cwiseProduct(d).squaredNorm();
  };

  // Projected Levenberg-Marquardt; returns the terminal error.
  auto solve = [&](Eigen::VectorXd& u, int& iter) {
    rollout.project(u);
    double err = 0.0;
    double f = cost(u, err);
    double lambda = 1e-3;
    while (iter < config.max_iterations && err > config.target_tol) {
      ++iter;
      const Vec2 e = rollout.terminal(u) - pairing->p_c;
      const auto j = rollout.jacobian(u);
      Eigen::MatrixXd h = j.transpose() * j;
      h.diagonal() += rho * d2;
      const Eigen::VectorXd g = j.transpose() * e + rho * d2.cwiseProduct(u);
      bool accepted = false;
      while (!accepted && lambda < 1e12) {
        Eigen::MatrixXd damped = h;
        damped.diagonal() += lambda * (h.diagonal().array() + 1e-9).matrix();
        Eigen::VectorXd trial = u + damped.ldlt().solve(-g);
        rollout.project(trial);
        double trial_err = 0.0;
        const double trial_f = cost(trial, trial_err);
        if (trial_f < f) {
          u = trial;
          f = trial_f;
          err = trial_err;
          lambda = std::max(lambda / 3.0, 1e-9);
          accepted = true;
        } else {
          lambda *= 4.0;
        }
      }
      if (!accepted) break;
    }
    return err;
  };

  Eigen::VectorXd u = invert_controls(ego, t_o, scene.dt, config.bicycle);
  int iter = 0;
  const double err = solve(u, iter);
  if (!(err <= config.pos_tol)) {
    throw FrsError(ErrorCode::Infeasible, "optimiser ended " + std::to_string(err) +
                                              " m from the conflict point in scene " + scene.id);
  }

  SynthesisResult out;
  out.scene = scene;
  out.scene.id = scene.id + "_unsafe";
  out.scene.label = SceneLabel::SynthUnsafe;
  out.scene.source_id = scene.id;
  out.scene.conflict = *pairing;
  out.iterations = iter;
  out.terminal_error = err;

  const std::size_t len = ego.states.size();
  std::vector<BicycleControl> controls(len > 0 ? len - 1 : 0);
  for (int k = 0; k < t_o && k < static_cast<int>(controls.size()); ++k) {
    controls[static_cast<std::size_t>(k)] = rollout.control(u, k);
  }
  AgentTrack& new_ego = out.scene.ego();
  new_ego.states.assign(1, start);
  for (std::size_t k = 0; k + 1 < len; ++k) {
    new_ego.states.push_back(
        bicycle_step(new_ego.states.back(), controls[k], scene.dt, config.bicycle));
  }
  out.max_residual = replay_residual(new_ego, controls, scene.dt, config.bicycle);
  out.controls = std::move(controls);
  return out;
}

}  // namespace frsmon
