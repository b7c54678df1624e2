#include "frsmon/predictor.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

namespace frsmon {

namespace {

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

struct HypothesisControl {
  double yaw_rate;
  double accel;
};

HypothesisControl hypothesis_control(Hypothesis h, const PredictorConfig& c) {
  switch (h) {
    case Hypothesis::Straight: return {0.0, 0.0};
    case Hypothesis::TurnLeft: return {c.turn_rate, 0.0};
    case Hypothesis::TurnRight: return {-c.turn_rate, 0.0};
    case Hypothesis::Brake: return {0.0, -c.brake_decel};
    case Hypothesis::Accelerate: return {0.0, c.accel};
  }
  return {0.0, 0.0};
}

bool is_turn(Hypothesis h) { return h == Hypothesis::TurnLeft || h == Hypothesis::TurnRight; }

/// Where an agent sits relative to the lane map.
struct MapContext {
  /// Lane direction the agent was travelling along turn_lookback steps ago.
  double base_heading = 0.0;
  Vec2 origin = Vec2::Zero();
  /// Distance from origin along base_heading to the next intersection centre.
  std::optional<double> center;
};

MapContext map_context(const Scene& scene, const AgentKinematicState& earlier,
                       const AgentKinematicState& now) {
  constexpr double kLookahead = 120.0;
  constexpr double kCluster = 12.0;
  MapContext ctx;
  ctx.base_heading = earlier.heading;
  ctx.origin = now.position;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& lane : scene.lanes) {
    for (std::size_t i = 0; i + 1 < lane.size(); ++i) {
      const Vec2 d = lane[i + 1] - lane[i];
      if (d.norm() < 1e-9) continue;
      for (double h : {std::atan2(d.y(), d.x()), std::atan2(-d.y(), -d.x())}) {
        const double gap = std::abs(wrap_angle(h - earlier.heading));
        if (gap < best_gap) {
          best_gap = gap;
          ctx.base_heading = h;
        }
      }
    }
  }
  if (!(best_gap < 0.25 * std::numbers::pi)) return ctx;

  const Vec2 dir(std::cos(ctx.base_heading), std::sin(ctx.base_heading));
  std::vector<double> hits;
  for (const auto& lane : scene.lanes) {
    for (std::size_t i = 0; i + 1 < lane.size(); ++i) {
      const Vec2 a = lane[i];
      const Vec2 d = lane[i + 1] - a;
      const double len = d.norm();
      if (len < 1e-9 || std::abs(dir.dot(d / len)) > 0.5) continue;
      // origin + s dir = a + r d
      const double det = -dir.x() * d.y() + dir.y() * d.x();
      const Vec2 rhs = a - ctx.origin;
      const double s = (-rhs.x() * d.y() + rhs.y() * d.x()) / det;
      const double r = (dir.x() * rhs.y() - dir.y() * rhs.x()) / det;
      if (r < 0.0 || r > 1.0 || s < -kCluster || s > kLookahead) continue;
      hits.push_back(s);
    }
  }
  if (hits.empty()) return ctx;
  std::sort(hits.begin(), hits.end());
  // Centre of the first cluster of crossings.
  double sum = 0.0;
  int n = 0;
  for (double s : hits) {
    if (s > hits.front() + kCluster) break;
    sum += s;
    ++n;
  }
  const double center = sum / n;
  if (center > 0.0) ctx.center = center;
  return ctx;
}

/// Yaw rate a hypothesis commands at state s.
double commanded_yaw(Hypothesis h, const BicycleState& s, const MapContext& ctx,
                     const PredictorConfig& c) {
  if (!is_turn(h)) return hypothesis_control(h, c).yaw_rate;
  const double sign = h == Hypothesis::TurnLeft ? 1.0 : -1.0;
  const double turned = sign * wrap_angle(s.heading - ctx.base_heading);
  if (turned >= 0.5 * std::numbers::pi) return 0.0;
  if (ctx.center && turned < 0.05) {
    const Vec2 dir(std::cos(ctx.base_heading), std::sin(ctx.base_heading));
    const double to_center = *ctx.center - dir.dot(s.position - ctx.origin);
    if (to_center > c.turn_lead * s.speed) return 0.0;
  }
  return sign * c.turn_rate;
}

/// Common random numbers for the particle rollouts, so a forecast is a pure
/// function of the agent state.
class NoiseBank {
 public:
  NoiseBank(int particles, int horizon) : particles_(particles), horizon_(horizon) {
    std::mt19937_64 rng(0x5eedf00dULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    draws_.resize(static_cast<std::size_t>(particles * horizon * 4));
    for (auto& d : draws_) d = normal(rng);
  }

  const double* at(int particle, int step) const {
    return &draws_[static_cast<std::size_t>((particle * horizon_ + step) * 4)];
  }
  int particles() const { return particles_; }
  int horizon() const { return horizon_; }

 private:
  int particles_;
  int horizon_;
  std::vector<double> draws_;
};

AgentForecast forecast_with_bank(const Scene& scene, const AgentTrack& track, int frame,
                                 const PredictorConfig& config, const NoiseBank& bank) {
  if (frame < config.history || frame >= static_cast<int>(track.states.size())) {
    throw FrsError(ErrorCode::InsufficientHistory,
                   "frame " + std::to_string(frame) + " lacks " +
                       std::to_string(config.history) + " history steps");
  }
  if (config.modes < 1 || config.modes > kHypothesisCount) {
    throw FrsError(ErrorCode::InvalidArgument, "modes must lie in 1..5");
  }
  if (!(config.shrink > 0.0 && config.shrink <= 1.0)) {
    throw FrsError(ErrorCode::InvalidArgument, "shrink must lie in (0, 1]");
  }
  const double dt = scene.dt;
  const auto& now = track.states[static_cast<std::size_t>(frame)];
  const auto& past = track.states[static_cast<std::size_t>(frame - config.history)];
  const double span = config.history * dt;
  const double yaw_obs = wrap_angle(now.heading - past.heading) / span;
  const double accel_obs = (now.speed - past.speed) / span;

  const MapContext ctx = map_context(
      scene, track.states[static_cast<std::size_t>(std::max(0, frame - config.turn_lookback))], now);

  std::array<double, kHypothesisCount> weight{};
  double log_max = -std::numeric_limits<double>::infinity();
  std::array<double, kHypothesisCount> log_w{};
  for (int h = 0; h < kHypothesisCount; ++h) {
    const auto hyp = static_cast<Hypothesis>(h);
    const auto ctl = hypothesis_control(hyp, config);
    // A turn that has not started yet looks like driving straight.
    const double yaw_expected = is_turn(hyp) ? commanded_yaw(hyp, past, ctx, config) : ctl.yaw_rate;
    const double ey = (yaw_obs - yaw_expected) / config.fit_sigma_yaw;
    const double ea = (accel_obs - ctl.accel) / config.fit_sigma_accel;
    log_w[h] = std::log(config.prior[static_cast<std::size_t>(h)]) - 0.5 * (ey * ey + ea * ea);
    log_max = std::max(log_max, log_w[h]);
  }
  for (int h = 0; h < kHypothesisCount; ++h) weight[h] = std::exp(log_w[h] - log_max);

  std::array<int, kHypothesisCount> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weight[a] > weight[b]; });
  const int kept = config.modes;
  double kept_total = 0.0;
  for (int i = 0; i < kept; ++i) kept_total += weight[order[i]];

  Vec2 offset = Vec2::Zero();
  if (scene.ood && frame >= config.ood_start_frame) {
    offset = config.ood_bias * Vec2(-std::sin(now.heading), std::cos(now.heading));
  }

  const int horizon = config.horizon;
  const int n = bank.particles();
  std::vector<std::vector<Vec2>> means(static_cast<std::size_t>(kept),
                                       std::vector<Vec2>(horizon, Vec2::Zero()));
  std::vector<std::vector<Mat2>> covs(static_cast<std::size_t>(kept),
                                      std::vector<Mat2>(horizon, Mat2::Zero()));
  std::vector<Vec2> samples(static_cast<std::size_t>(n * horizon));

  for (int m = 0; m < kept; ++m) {
    const auto hyp = static_cast<Hypothesis>(order[m]);
    const auto ctl = hypothesis_control(hyp, config);
    for (int p = 0; p < n; ++p) {
      BicycleState s = now;
      for (int k = 0; k < horizon; ++k) {
        const double* z = bank.at(p, k);
        const double yaw = commanded_yaw(hyp, s, ctx, config);
        BicycleControl u{ctl.accel + config.noise.sigma_accel * z[0],
                         steer_for_yaw_rate(yaw, s.speed, config.bicycle) +
                             config.noise.sigma_steer * z[1]};
        s = bicycle_step(s, clamp_control(u, config.bicycle), dt, config.bicycle);
        s.position += config.noise.sigma_pos * Vec2(z[2], z[3]);
        samples[static_cast<std::size_t>(p * horizon + k)] = s.position;
      }
    }
    for (int k = 0; k < horizon; ++k) {
      Vec2 mean = Vec2::Zero();
      for (int p = 0; p < n; ++p) mean += samples[static_cast<std::size_t>(p * horizon + k)];
      mean /= n;
      Mat2 cov = Mat2::Zero();
      for (int p = 0; p < n; ++p) {
        const Vec2 d = samples[static_cast<std::size_t>(p * horizon + k)] - mean;
        cov += d * d.transpose();
      }
      cov /= (n - 1);
      cov += 1e-6 * Mat2::Identity();
      means[m][k] = mean + offset;
      covs[m][k] = config.shrink * cov;
    }
  }

  AgentForecast out;
  out.reserve(static_cast<std::size_t>(horizon));
  std::vector<double> w(static_cast<std::size_t>(kept));
  for (int m = 0; m < kept; ++m) w[m] = weight[order[m]] / kept_total;
  // Renormalise against rounding so the mixture validates exactly.
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= wsum;
  for (int k = 0; k < horizon; ++k) {
    std::vector<GaussianMode> modes;
    modes.reserve(static_cast<std::size_t>(kept));
    for (int m = 0; m < kept; ++m) modes.emplace_back(means[m][k], covs[m][k]);
    out.emplace_back(std::move(modes), w, k + 1);
  }
  return out;
}

}  // namespace

AgentForecast predict_agent(const Scene& scene, const AgentTrack& track, int frame,
                            const PredictorConfig& config) {
  const NoiseBank bank(config.particles, config.horizon);
  return forecast_with_bank(scene, track, frame, config, bank);
}

std::map<int, AgentForecast> synthetic_predictor(const Scene& scene, int frame,
                                                 const PredictorConfig& config) {
  const NoiseBank bank(config.particles, config.horizon);
  std::map<int, AgentForecast> out;
  for (const auto& t : scene.tracks) {
    if (t.role != Role::Contender) continue;
    out.emplace(t.id, forecast_with_bank(scene, t, frame, config, bank));
  }
  return out;
}

void PredictionTable::insert(const std::string& scene, int frame, int agent,
                             AgentForecast forecast) {
  table_.insert_or_assign(Key{scene, frame, agent}, std::move(forecast));
}

const AgentForecast* PredictionTable::find(const std::string& scene, int frame, int agent) const {
  const auto it = table_.find(Key{scene, frame, agent});
  return it == table_.end() ? nullptr : &it->second;
}

void PredictionTable::merge(PredictionTable other) {
  for (auto& [k, v] : other.table_) table_.insert_or_assign(k, std::move(v));
}

PredictionTable predict_scenes(const std::vector<Scene>& scenes, const PredictorConfig& config) {
  const NoiseBank bank(config.particles, config.horizon);
  PredictionTable table;
  for (const auto& scene : scenes) {
    const int len = static_cast<int>(scene.length());
    for (const auto& t : scene.tracks) {
      if (t.role != Role::Contender) continue;
      for (int f = config.history; f < len; ++f) {
        table.insert(scene.id, f, t.id, forecast_with_bank(scene, t, f, config, bank));
      }
    }
  }
  return table;
}

}  // namespace frsmon
