#include "frsmon/belief.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace frsmon {

std::string_view to_string(Fallback f) {
  switch (f) {
    case Fallback::None: return "none";
    case Fallback::ParametricWC: return "pwc";
    case Fallback::WorstCase: return "wc";
  }
  return "none";
}

Fallback fallback_from_string(std::string_view s) {
  if (s == "none") return Fallback::None;
  if (s == "pwc") return Fallback::ParametricWC;
  if (s == "wc") return Fallback::WorstCase;
  throw FrsError(ErrorCode::InvalidArgument, "unknown fallback '" + std::string(s) + "'");
}

std::string_view to_string(MethodChoice m) {
  return m == MethodChoice::Learned ? "learned" : "fallback";
}

BeliefState init_belief(double beta_low, double beta_high) {
  if (!(beta_low > 0.0 && beta_low < beta_high) || !std::isfinite(beta_high)) {
    throw FrsError(ErrorCode::InvalidRange, "require 0 < beta_low < beta_high");
  }
  BeliefState s;
  s.beta_low = beta_low;
  s.beta_high = beta_high;
  return s;
}

BeliefState update_belief(const BeliefState& state, const Vec2& x_obs,
                          const GmmPrediction& prediction, double eta) {
  if (!(eta > 0.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "eta must be positive");
  }
  const double ll_low = log_gmm_density(x_obs, prediction, eta / state.beta_low);
  const double ll_high = log_gmm_density(x_obs, prediction, eta / state.beta_high);
  const double lp_low = std::log(state.mass_low) + ll_low;
  const double lp_high = std::log(state.mass_high) + ll_high;
  const double peak = std::max(lp_low, lp_high);
  double low = std::exp(lp_low - peak);
  double high = std::exp(lp_high - peak);
  const double norm = low + high;
  low /= norm;
  high /= norm;

  low = std::max(low, kBeliefFloor);
  high = std::max(high, kBeliefFloor);
  const double renorm = low + high;

  BeliefState next = state;
  next.mass_low = low / renorm;
  next.mass_high = 1.0 - next.mass_low;
  ++next.history_len;
  return next;
}

double beta_hat(const BeliefState& state) {
  return state.mass_low * state.beta_low + state.mass_high * state.beta_high;
}

MethodChoice select_method(double beta_hat, double threshold, Fallback fallback) {
  if (fallback != Fallback::None && beta_hat < threshold) return MethodChoice::Fallback;
  return MethodChoice::Learned;
}

}  // namespace frsmon
