#pragma once

#include "frsmon/gmm.hpp"

#include <string_view>

namespace frsmon {

inline constexpr double kDefaultBetaLow = 0.3;
inline constexpr double kDefaultBetaHigh = 1.0;
inline constexpr double kDefaultBetaThreshold = 0.75;
/// Masses are clamped to at least this after each update so the filter can recover.
inline constexpr double kBeliefFloor = 1e-6;

/// Two-point posterior over predictor confidence beta in {beta_low, beta_high}.
struct BeliefState {
  double mass_low = 0.5;
  double mass_high = 0.5;
  double beta_low = kDefaultBetaLow;
  double beta_high = kDefaultBetaHigh;
  std::size_t history_len = 0;
};

enum class Fallback { None, ParametricWC, WorstCase };
enum class MethodChoice { Learned, Fallback };

std::string_view to_string(Fallback f);
Fallback fallback_from_string(std::string_view s);
std::string_view to_string(MethodChoice m);

/// Uniform prior. Throws InvalidRange unless 0 < beta_low < beta_high.
BeliefState init_belief(double beta_low = kDefaultBetaLow, double beta_high = kDefaultBetaHigh);

/// Bayes update with the likelihood of x_obs under the mixture whose
/// covariances are scaled by eta / beta for each hypothesis. Log-domain, so
/// extreme outliers never underflow.
BeliefState update_belief(const BeliefState& state, const Vec2& x_obs,
                          const GmmPrediction& prediction, double eta);

/// Posterior mean of beta.
double beta_hat(const BeliefState& state);

MethodChoice select_method(double beta_hat, double threshold, Fallback fallback);

}  // namespace frsmon
