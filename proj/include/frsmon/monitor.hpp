#pragma once

#include "frsmon/belief.hpp"
#include "frsmon/conformal.hpp"
#include "frsmon/frs_set.hpp"
#include "frsmon/predictor.hpp"
#include "frsmon/worst_case.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace frsmon {

/// Per-mode level of the 99% confidence-ellipse baseline (chi-square, 2 dof).
inline constexpr double kCi99Level = 9.21034037197618;
inline constexpr double kDefaultFootprint = 2.0;

enum class Method { CI99, ParametricWC, ForceOpt, ForceOptBelief, ForceOptPwc, ForceOptWc, WorstCase };

inline constexpr Method kAllMethods[] = {Method::CI99,          Method::ParametricWC,
                                         Method::ForceOpt,      Method::ForceOptBelief,
                                         Method::ForceOptPwc,   Method::ForceOptWc,
                                         Method::WorstCase};

std::string_view to_string(Method m);
/// Accepts the names printed by to_string ("ci99", "force_opt", ...).
Method method_from_string(std::string_view s);

bool needs_calibration(Method m);
bool uses_belief(Method m);
Fallback fallback_of(Method m);

struct MethodConfig {
  Method method = Method::ForceOpt;
  double tau = kDefaultTau;
  double gamma = kDefaultGamma;
  double beta_low = kDefaultBetaLow;
  double beta_high = kDefaultBetaHigh;
  double beta_threshold = kDefaultBetaThreshold;
  double footprint_radius = kDefaultFootprint;
  WorstCaseLimits limits;
  /// Horizon steps checked per frame; 0 checks every available step.
  int check_steps = 0;
  /// Throw MissingPrediction instead of skipping agents without forecasts.
  bool strict_predictions = false;
};

/// Planned ego positions at steps 1..T after the current frame.
struct EgoPlan {
  std::vector<Vec2> positions;
  std::vector<double> headings;
  double dt = 0.5;
  double footprint_radius = kDefaultFootprint;
};

/// Conflict when ego_pos lies in some positive-level ellipse whose semi-axes
/// are enlarged by footprint_radius.
bool step_conflict(const FrsSet& frs, const Vec2& ego_pos, double footprint_radius);
/// Conflict when |ego_pos - center| <= radius + footprint_radius.
bool step_conflict(const DiscSet& disc, const Vec2& ego_pos, double footprint_radius);

/// The set monitored for one agent at one horizon step.
class MonitoredSet {
 public:
  MonitoredSet(FrsSet frs) : set_(std::move(frs)) {}
  MonitoredSet(std::vector<DiscSet> discs) : set_(std::move(discs)) {}

  bool contains(const Vec2& x) const;
  bool conflicts(const Vec2& ego_pos, double footprint_radius) const;
  bool is_frs() const { return std::holds_alternative<FrsSet>(set_); }
  const FrsSet* frs() const { return std::get_if<FrsSet>(&set_); }
  const std::vector<DiscSet>* discs() const { return std::get_if<std::vector<DiscSet>>(&set_); }

 private:
  std::variant<FrsSet, std::vector<DiscSet>> set_;
};

/// Method-specific set for horizon step `step` (1-based) of a forecast.
/// `scale` is the covariance scale used by calibrated methods.
MonitoredSet build_monitored_set(Method method, const AgentForecast& forecast, int step,
                                 const AgentKinematicState& state, double dt, double tau,
                                 double scale, const WorstCaseLimits& limits);

struct AgentFrameInput {
  int agent = 0;
  AgentKinematicState state;
  /// nullptr when the predictor produced nothing for this agent.
  const AgentForecast* forecast = nullptr;
};

struct AgentVerdict {
  int agent = 0;
  /// Bit t - 1 is set when horizon step t conflicts.
  std::uint32_t conflict_steps = 0;
  MethodChoice method_used = MethodChoice::Learned;
  std::optional<double> beta_hat;
  /// Filled when the monitor keeps sets (for coverage).
  std::vector<MonitoredSet> sets;
};

struct FrameVerdict {
  bool unsafe = false;
  /// (agent id, horizon step) of the earliest conflict, lowest agent id first.
  std::optional<std::pair<int, int>> first_conflict;
  std::vector<AgentVerdict> agents;
  std::vector<int> skipped_agents;
};

/// Sequential monitor for one scene: keeps a belief per agent and the
/// forecasts of the previous frame so each new observation updates it.
class SceneMonitor {
 public:
  SceneMonitor(MethodConfig config, const CalibrationModel* calibration);

  FrameVerdict evaluate_frame(const EgoPlan& plan, const std::vector<AgentFrameInput>& agents,
                              bool keep_sets = false);

  const BeliefState* belief(int agent) const;

 private:
  double eta(int step) const;

  MethodConfig config_;
  const CalibrationModel* calibration_;
  std::map<int, BeliefState> beliefs_;
  std::map<int, GmmPrediction> previous_step1_;
};

}  // namespace frsmon
