#pragma once

#include "frsmon/conformal.hpp"
#include "frsmon/monitor.hpp"
#include "frsmon/predictor.hpp"
#include "frsmon/scenario.hpp"
#include "frsmon/synthesis.hpp"
#include "frsmon/world.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace frsmon {

/// Frames of a scene that are evaluated. Safe scenes: every frame with full
/// history and a full horizon of ground truth. Unsafe scenes: the frames
/// before t_o whose horizon reaches t_o.
std::vector<int> eval_frames(const Scene& scene, int history, int horizon);

/// Ego plan at `frame`: the ego's own track over steps frame+1 .. frame+horizon
/// (truncated at the end of the scene).
EgoPlan ego_plan(const Scene& scene, int frame, int horizon, double footprint_radius);

/// Calibration records for every contender, frame in eval_frames and horizon step.
std::vector<CalibrationRecord> calibration_records(const std::vector<Scene>& scenes,
                                                   const PredictionTable& predictions,
                                                   int history, int horizon);

/// Calibrate on scenes; records the content hashes of the scenes used.
CalibrationModel calibrate_scenes(const std::vector<Scene>& scenes,
                                  const PredictionTable& predictions, int history, int horizon,
                                  double gamma, double tau);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct Rates {
  double fpr = 0.0;
  double fnr = 0.0;
  double ber = 0.0;
};

/// FPR = FP/(FP+TN), FNR = FN/(FN+TP), BER = (FPR+FNR)/2. An empty class
/// yields NaN rates, or DegenerateDenominator when `strict`.
Rates compute_rates(const ConfusionCounts& counts, bool strict = false);

struct CoverageCounts {
  std::size_t states = 0;
  std::size_t states_inside = 0;
  std::size_t trajectories = 0;
  std::size_t trajectories_inside = 0;
  std::map<int, std::size_t> per_step;
  std::map<int, std::size_t> per_step_inside;

  double per_state() const;
  double per_trajectory() const;
};

/// Coverage over (frame, agent) entries: `inside[k]` is whether step k + 1's
/// ground truth lies in its set. Entries shorter than `horizon` count toward
/// per-state coverage only.
void accumulate_coverage(CoverageCounts& counts, const std::vector<bool>& inside, int horizon);

struct MetricsReport {
  std::string method;
  double coverage_state = 0.0;
  double coverage_trajectory = 0.0;
  std::map<int, double> coverage_per_step;
  Rates rates;
  ConfusionCounts counts;
  std::size_t frames = 0;
  std::size_t safe_frames = 0;
  std::size_t unsafe_frames = 0;
  std::size_t skipped_agents = 0;
  double time_mean = 0.0;
  double time_median = 0.0;
  double time_p99 = 0.0;
};

/// One JSONL record per (scene, frame).
struct VerdictRecord {
  std::string scene;
  int frame = 0;
  SceneLabel label = SceneLabel::Safe;
  std::string method;
  bool unsafe = false;
  std::optional<std::pair<int, int>> first_conflict;
  std::map<int, double> beta_hat;
  std::map<int, std::string> method_used;
  double seconds = 0.0;
};

nlohmann::json verdict_to_json(const VerdictRecord& v);
VerdictRecord verdict_from_json(const nlohmann::json& j);

struct EvalOptions {
  int history = 4;
  int horizon = 6;
  /// Worker threads; 0 uses the hardware concurrency.
  int threads = 0;
  /// Record wall-clock time per frame.
  bool timing = true;
};

struct EvalResult {
  MetricsReport report;
  std::vector<VerdictRecord> verdicts;
};

/// Evaluate every scene frame by frame. Scenes run in parallel and are
/// reduced in scene-id order. Throws MissingCalibration when the method needs
/// one and DatasetOverlap when an evaluated scene was used for calibration.
EvalResult run_eval(const std::vector<Scene>& scenes, const PredictionTable& predictions,
                    const MethodConfig& config, const CalibrationModel* calibration,
                    const EvalOptions& options = {});

/// Rebuild confusion counts and rates from verdict records (coverage and
/// timing are not recoverable and are left at zero).
MetricsReport report_from_verdicts(const std::vector<VerdictRecord>& verdicts);

std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);

struct BenchmarkConfig {
  WorldConfig world;
  /// Overconfident (shrink 0.25) by default.
  PredictorConfig predictor = [] {
    PredictorConfig p;
    p.shrink = 0.25;
    return p;
  }();
  SynthesisConfig synthesis;
  int calibration_scenes = 200;
  int eval_scenes = 300;
};

struct Benchmark {
  std::vector<Scene> calibration;
  /// Safe scenes followed by the unsafe scenes synthesized from them.
  std::vector<Scene> eval;
  PredictionTable predictions;
  std::size_t synthesis_attempts = 0;
  std::size_t synthesis_converged = 0;
  std::vector<SynthesisResult> syntheses;
};

/// Calibration and evaluation worlds come from different seeds derived from `seed`.
Benchmark build_benchmark(const BenchmarkConfig& config, std::uint64_t seed);

/// Predictions for every scene; unsafe scenes reuse their source's forecasts
/// when the source is in `scenes`.
PredictionTable predict_all(const std::vector<Scene>& scenes, const PredictorConfig& config);

struct AblationRow {
  int modes = 0;
  MetricsReport report;
  CalibrationModel calibration;
};

/// Re-predict, re-calibrate and re-evaluate for each mode count.
std::vector<AblationRow> mode_ablation(const Benchmark& bench, const PredictorConfig& predictor,
                                       const std::vector<int>& modes,
                                       const std::vector<Method>& methods,
                                       const MethodConfig& base, const EvalOptions& options = {});

struct TimingRow {
  std::string name;
  std::size_t samples = 0;
  double mean = 0.0;
  double median = 0.0;
  double p99 = 0.0;
};

/// Wall-clock latency per frame for each method (agents x horizon sets plus
/// intersection checks), and of solve_levels alone.
std::vector<TimingRow> bench_timing(const std::vector<Method>& methods, int n_frames,
                                    int agents, int modes, std::uint64_t seed);

/// Summary statistics of a sample of durations (seconds).
TimingRow summarize_timing(std::string name, std::vector<double> seconds);

/// Run fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace frsmon
