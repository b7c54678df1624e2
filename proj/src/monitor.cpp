#include "frsmon/monitor.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace frsmon {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::CI99: return "ci99";
    case Method::ParametricWC: return "pwc";
    case Method::ForceOpt: return "force_opt";
    case Method::ForceOptBelief: return "force_opt_belief";
    case Method::ForceOptPwc: return "force_opt_pwc";
    case Method::ForceOptWc: return "force_opt_wc";
    case Method::WorstCase: return "wc";
  }
  return "force_opt";
}

Method method_from_string(std::string_view s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw FrsError(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

bool needs_calibration(Method m) {
  return m == Method::ForceOpt || m == Method::ForceOptBelief || m == Method::ForceOptPwc ||
         m == Method::ForceOptWc;
}

bool uses_belief(Method m) {
  return m == Method::ForceOptBelief || m == Method::ForceOptPwc || m == Method::ForceOptWc;
}

Fallback fallback_of(Method m) {
  if (m == Method::ForceOptPwc) return Fallback::ParametricWC;
  if (m == Method::ForceOptWc) return Fallback::WorstCase;
  return Fallback::None;
}

bool step_conflict(const FrsSet& frs, const Vec2& ego_pos, double footprint_radius) {
  const auto& comps = frs.components();
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (!(comps[i].level > 0.0)) continue;
    const auto& e = comps[i].mode.eig();
    const Vec2 d = ego_pos - comps[i].mode.mean();
    const Vec2 axes = frs.semi_axes(i);
    const double u1 = d.dot(e.axis1) / (axes.x() + footprint_radius);
    const double u2 = d.dot(e.axis2) / (axes.y() + footprint_radius);
    if (u1 * u1 + u2 * u2 <= 1.0) return true;
  }
  return false;
}

bool step_conflict(const DiscSet& disc, const Vec2& ego_pos, double footprint_radius) {
  return (ego_pos - disc.center).norm() <= disc.radius + footprint_radius;
}

bool MonitoredSet::contains(const Vec2& x) const {
  if (const auto* f = frs()) return f->contains(x);
  return discs_contain(*discs(), x);
}

bool MonitoredSet::conflicts(const Vec2& ego_pos, double footprint_radius) const {
  if (const auto* f = frs()) return step_conflict(*f, ego_pos, footprint_radius);
  for (const auto& d : *discs()) {
    if (step_conflict(d, ego_pos, footprint_radius)) return true;
  }
  return false;
}

MonitoredSet build_monitored_set(Method method, const AgentForecast& forecast, int step,
                                 const AgentKinematicState& state, double dt, double tau,
                                 double scale, const WorstCaseLimits& limits) {
  const GmmPrediction& pred = forecast.at(static_cast<std::size_t>(step - 1));
  switch (method) {
    case Method::CI99:
      return build_uniform_level_frs(pred, kCi99Level, 1.0);
    case Method::ParametricWC:
      return parametric_wc_frs(forecast, state, step, dt);
    case Method::WorstCase:
      return std::vector<DiscSet>{worst_case_frs(state, step * dt, limits)};
    case Method::ForceOpt:
    case Method::ForceOptBelief:
    case Method::ForceOptPwc:
    case Method::ForceOptWc:
      return build_frs(pred, solve_levels(pred, tau), scale);
  }
  throw FrsError(ErrorCode::InvalidArgument, "unhandled method");
}

SceneMonitor::SceneMonitor(MethodConfig config, const CalibrationModel* calibration)
    : config_(std::move(config)), calibration_(calibration) {
  if (needs_calibration(config_.method) && calibration_ == nullptr) {
    throw FrsError(ErrorCode::MissingCalibration,
                   std::string(to_string(config_.method)) + " needs a calibration model");
  }
  if (!(config_.footprint_radius >= 0.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "footprint radius must be nonnegative");
  }
  if (uses_belief(config_.method)) init_belief(config_.beta_low, config_.beta_high);
}

double SceneMonitor::eta(int step) const {
  return calibration_ == nullptr ? 1.0 : calibration_->eta(step);
}

const BeliefState* SceneMonitor::belief(int agent) const {
  const auto it = beliefs_.find(agent);
  return it == beliefs_.end() ? nullptr : &it->second;
}

FrameVerdict SceneMonitor::evaluate_frame(const EgoPlan& plan,
                                          const std::vector<AgentFrameInput>& agents,
                                          bool keep_sets) {
  FrameVerdict verdict;
  const Method method = config_.method;
  const bool belief_on = uses_belief(method);
  const Fallback fallback = fallback_of(method);

  std::vector<const AgentFrameInput*> order;
  order.reserve(agents.size());
  for (const auto& a : agents) order.push_back(&a);
  std::sort(order.begin(), order.end(),
            [](const AgentFrameInput* a, const AgentFrameInput* b) { return a->agent < b->agent; });

  for (const AgentFrameInput* in : order) {
    if (in->forecast == nullptr || in->forecast->empty()) {
      if (config_.strict_predictions) {
        throw FrsError(ErrorCode::MissingPrediction,
                       "no forecast for agent " + std::to_string(in->agent));
      }
      verdict.skipped_agents.push_back(in->agent);
      previous_step1_.erase(in->agent);
      continue;
    }
    const AgentForecast& forecast = *in->forecast;

    AgentVerdict av;
    av.agent = in->agent;
    double dilation = 1.0;
    if (belief_on) {
      auto it = beliefs_.find(in->agent);
      if (it == beliefs_.end()) {
        it = beliefs_.emplace(in->agent, init_belief(config_.beta_low, config_.beta_high)).first;
      }
      const auto prev = previous_step1_.find(in->agent);
      if (prev != previous_step1_.end()) {
        it->second = update_belief(it->second, in->state.position, prev->second, eta(1));
      }
      previous_step1_.insert_or_assign(in->agent, forecast.front());
      const double bh = beta_hat(it->second);
      av.beta_hat = bh;
      av.method_used = select_method(bh, config_.beta_threshold, fallback);
      dilation = 1.0 / bh;
    }

    Method effective = method;
    if (av.method_used == MethodChoice::Fallback) {
      effective = fallback == Fallback::ParametricWC ? Method::ParametricWC : Method::WorstCase;
    }

    int steps = std::min<int>(static_cast<int>(plan.positions.size()),
                              static_cast<int>(forecast.size()));
    if (config_.check_steps > 0) steps = std::min(steps, config_.check_steps);
    for (int t = 1; t <= steps; ++t) {
      const double scale = needs_calibration(effective) ? eta(t) * dilation : 1.0;
      MonitoredSet set = build_monitored_set(effective, forecast, t, in->state, plan.dt,
                                             config_.tau, scale, config_.limits);
      if (set.conflicts(plan.positions[static_cast<std::size_t>(t - 1)],
                        plan.footprint_radius)) {
        av.conflict_steps |= (1u << (t - 1));
        if (!verdict.first_conflict || t < verdict.first_conflict->second) {
          verdict.first_conflict = std::make_pair(in->agent, t);
        }
      }
      if (keep_sets) av.sets.push_back(std::move(set));
    }
    if (av.conflict_steps != 0) verdict.unsafe = true;
    verdict.agents.push_back(std::move(av));
  }
  return verdict;
}

}  // namespace frsmon
