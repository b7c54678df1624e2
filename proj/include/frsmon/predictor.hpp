#pragma once

#include "frsmon/gmm.hpp"
#include "frsmon/scenario.hpp"

#include <array>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace frsmon {

/// Per-step process noise shared by the world simulator and the predictor's
/// rollouts.
struct ProcessNoise {
  double sigma_accel = 0.3;   // m/s^2
  double sigma_steer = 0.01;  // rad
  double sigma_pos = 0.05;    // m, position random walk per step
};

/// Behaviour hypotheses the synthetic predictor scores against history.
enum class Hypothesis { Straight, TurnLeft, TurnRight, Brake, Accelerate };
inline constexpr int kHypothesisCount = 5;

struct PredictorConfig {
  int history = 4;
  int horizon = 6;
  /// Number of hypotheses kept, highest weight first (1..5).
  int modes = 5;
  /// Multiplies every covariance; < 1 simulates an overconfident predictor.
  double shrink = 1.0;
  /// Mean offset (m, to the left of the agent heading) on scenes flagged ood.
  double ood_bias = 0.0;
  /// Frame from which the ood offset applies.
  int ood_start_frame = 0;
  int particles = 128;
  ProcessNoise noise;
  BicycleParams bicycle;
  /// Hypothesis yaw rates / accelerations.
  double turn_rate = 0.4;      // rad/s
  double brake_decel = 2.5;    // m/s^2
  double accel = 1.5;          // m/s^2
  /// Turn hypotheses start this long before the next intersection centre
  /// on the map, or immediately when there is none ahead.
  double turn_lead = 1.5;      // s
  /// Steps back along the track used to pick the lane an agent is turning from.
  int turn_lookback = 10;
  /// Softmax temperature of the history fit.
  double fit_sigma_yaw = 0.3;    // rad/s
  double fit_sigma_accel = 1.5;  // m/s^2
  std::array<double, kHypothesisCount> prior = {0.4, 0.15, 0.15, 0.15, 0.15};
};

/// Mixture forecasts for one agent at one frame; element k is horizon step k + 1.
using AgentForecast = std::vector<GmmPrediction>;

/// Forecast the agent from the history ending at `frame`. Throws
/// InsufficientHistory when frame < config.history.
AgentForecast predict_agent(const Scene& scene, const AgentTrack& track, int frame,
                            const PredictorConfig& config);

/// Forecasts for every contender at `frame`, keyed by agent id.
std::map<int, AgentForecast> synthetic_predictor(const Scene& scene, int frame,
                                                 const PredictorConfig& config);

/// Forecasts keyed by (scene id, frame, agent id).
class PredictionTable {
 public:
  using Key = std::tuple<std::string, int, int>;

  void insert(const std::string& scene, int frame, int agent, AgentForecast forecast);
  /// nullptr when absent.
  const AgentForecast* find(const std::string& scene, int frame, int agent) const;
  std::size_t size() const { return table_.size(); }
  const std::map<Key, AgentForecast>& entries() const { return table_; }
  void merge(PredictionTable other);

 private:
  std::map<Key, AgentForecast> table_;
};

/// Forecasts for every contender and every frame with enough history.
PredictionTable predict_scenes(const std::vector<Scene>& scenes, const PredictorConfig& config);

}  // namespace frsmon
