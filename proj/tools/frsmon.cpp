#include <CLI11.hpp>
#include <json.hpp>

#include "frsmon/error.hpp"
#include "frsmon/harness.hpp"
#include "frsmon/io.hpp"
#include "frsmon/synthesis.hpp"
#include "frsmon/world.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace frsmon;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Option bound to a variable that a config file may also set.
struct Knob {
  std::string key;
  CLI::Option* option = nullptr;
  std::function<void(const json&)> assign;
};

class Knobs {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& key, T& target, const std::string& help) {
    auto* opt = app->add_option("--" + key, target, help)->capture_default_str();
    knobs_.push_back({key, opt, [&target](const json& j) { target = j.get<T>(); }});
    owners_.push_back(app);
    return opt;
  }

  /// Fill options not given on the command line from `config`: top-level keys
  /// first, then the section named after the active subcommand.
  void apply(const json& config, const std::string& section) const {
    for (std::size_t i = 0; i < knobs_.size(); ++i) {
      const auto& k = knobs_[i];
      if (owners_[i]->get_parent() != nullptr && owners_[i]->get_name() != section) continue;
      if (k.option->count() != 0) continue;
      const json* value = nullptr;
      if (config.contains(k.key)) value = &config[k.key];
      if (config.contains(section) && config[section].is_object() && config[section].contains(k.key)) {
        value = &config[section][k.key];
      }
      if (value == nullptr) continue;
      try {
        k.assign(*value);
      } catch (const json::exception& e) {
        throw FrsError(ErrorCode::Format, "config key " + k.key + ": " + e.what());
      }
    }
  }

 private:
  std::vector<Knob> knobs_;
  std::vector<CLI::App*> owners_;
};

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  if (names.empty() || (names.size() == 1 && names[0] == "all")) {
    out.assign(std::begin(kAllMethods), std::end(kAllMethods));
    return out;
  }
  for (const auto& n : names) out.push_back(method_from_string(n));
  return out;
}

Method resolve_method(const std::string& name, const std::string& fallback) {
  const Method m = method_from_string(name);
  if (m != Method::ForceOptBelief || fallback == "none") return m;
  switch (fallback_from_string(fallback)) {
    case Fallback::ParametricWC: return Method::ForceOptPwc;
    case Fallback::WorstCase: return Method::ForceOptWc;
    case Fallback::None: break;
  }
  return m;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FrsError(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::vector<Scene> load_all(const std::vector<std::string>& paths) {
  std::vector<Scene> scenes;
  for (const auto& p : paths) {
    auto part = load_scenes(p);
    scenes.insert(scenes.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return scenes;
}

struct Settings {
  std::uint64_t seed = 1;
  std::string config;
  std::string out_dir = "out";

  WorldConfig world;
  PredictorConfig predictor;
  PredictorConfig ablation_predictor = BenchmarkConfig{}.predictor;
  SynthesisConfig synthesis;
  MethodConfig method;
  EvalOptions eval;

  std::vector<std::string> scene_paths;
  std::string predictions;
  std::string calibration;
  std::string method_name = "force_opt";
  std::string fallback = "none";
  std::vector<std::string> methods;
  std::vector<int> mode_counts = {1, 2, 3, 4, 5};
  int calibration_scenes = 200;
  int eval_scenes = 300;
  int bench_frames = 200;
  int bench_agents = 4;
  bool timing = false;
};

void run_gen_scenes(const Settings& s) {
  const auto scenes = gen_world(s.world, s.seed);
  const fs::path dir = fs::path(s.out_dir) / "scenes";
  save_scenes(scenes, dir);
  std::cout << "wrote " << scenes.size() << " scenes to " << dir.string() << '\n';
}

void run_predict(const Settings& s) {
  const auto scenes = load_all(s.scene_paths);
  const auto table = predict_all(scenes, s.predictor);
  const fs::path path = s.predictions.empty() ? fs::path(s.out_dir) / "predictions.jsonl" : fs::path(s.predictions);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_predictions(table, path);
  std::cout << "wrote " << table.size() << " forecasts to " << path.string() << '\n';
}

void run_synth_unsafe(const Settings& s) {
  const auto scenes = load_all(s.scene_paths);
  const fs::path dir = fs::path(s.out_dir) / "unsafe";
  fs::create_directories(dir);
  auto log = open_out(fs::path(s.out_dir) / "synthesis.csv");
  log << "scene,status,agent,t_o,d_min,iterations,terminal_error\n";
  std::size_t attempted = 0;
  std::size_t converged = 0;
  for (const auto& scene : scenes) {
    if (scene.label != SceneLabel::Safe) continue;
    const auto pairing = find_pairing(scene, s.synthesis);
    if (!pairing) {
      log << scene.id << ",unpaired,,,,,\n";
      continue;
    }
    ++attempted;
    try {
      const auto r = synthesize_unsafe(scene, s.synthesis);
      ++converged;
      save_scene(r.scene, dir / (r.scene.id + ".json"));
      const auto& c = *r.scene.conflict;
      log << scene.id << ",converged," << c.agent << ',' << c.t_o << ',' << c.d_min << ','
          << r.iterations << ',' << r.terminal_error << '\n';
    } catch (const FrsError& e) {
      if (e.code() != ErrorCode::Infeasible) throw;
      log << scene.id << ",infeasible," << pairing->agent << ',' << pairing->t_o << ','
          << pairing->d_min << ",,\n";
    }
  }
  std::cout << "synthesized " << converged << " of " << attempted << " paired scenes into "
            << dir.string() << '\n';
}

void run_calibrate(const Settings& s) {
  const auto scenes = load_all(s.scene_paths);
  const auto table = load_predictions(s.predictions);
  const auto model = calibrate_scenes(scenes, table, s.eval.history, s.eval.horizon,
                                      s.method.gamma, s.method.tau);
  const fs::path path = s.calibration.empty() ? fs::path(s.out_dir) / "calibration.json" : fs::path(s.calibration);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_calibration(model, path);
  std::cout << "calibrated on " << scenes.size() << " scenes:";
  for (const auto& [t, step] : model.per_step) std::cout << " eta" << t << '=' << step.eta;
  std::cout << '\n';
}

std::optional<CalibrationModel> maybe_calibration(const Settings& s) {
  if (s.calibration.empty()) return std::nullopt;
  return load_calibration(s.calibration);
}

void run_monitor(const Settings& s) {
  const auto scenes = load_all(s.scene_paths);
  const auto table = load_predictions(s.predictions);
  const auto calibration = maybe_calibration(s);
  MethodConfig config = s.method;
  config.method = resolve_method(s.method_name, s.fallback);
  if (needs_calibration(config.method) && !calibration) {
    throw FrsError(ErrorCode::MissingCalibration, std::string(to_string(config.method)) + " needs --calibration");
  }
  const CalibrationModel* cal = calibration ? &*calibration : nullptr;

  const fs::path dir(s.out_dir);
  auto verdicts = open_out(dir / "verdicts.jsonl");
  auto trace = open_out(dir / "belief_trace.csv");
  trace << "scene,frame,agent,mass_low,beta_hat,method\n";
  std::size_t flagged = 0;
  std::size_t total = 0;
  for (const auto& scene : scenes) {
    const auto frames = eval_frames(scene, s.eval.history, s.eval.horizon);
    if (frames.empty()) continue;
    const std::set<int> scored(frames.begin(), frames.end());
    SceneMonitor monitor(config, cal);
    for (int f = s.eval.history; f <= frames.back(); ++f) {
      std::vector<AgentFrameInput> inputs;
      for (const auto& t : scene.tracks) {
        if (t.role != Role::Contender) continue;
        inputs.push_back({t.id, t.states[static_cast<std::size_t>(f)], table.find(scene.id, f, t.id)});
      }
      const auto verdict = monitor.evaluate_frame(
          ego_plan(scene, f, s.eval.horizon, config.footprint_radius), inputs);
      for (const auto& av : verdict.agents) {
        if (const auto* b = monitor.belief(av.agent)) {
          trace << scene.id << ',' << f << ',' << av.agent << ',' << b->mass_low << ','
                << beta_hat(*b) << ',' << to_string(av.method_used) << '\n';
        }
      }
      if (scored.count(f) == 0) continue;
      VerdictRecord rec;
      rec.scene = scene.id;
      rec.frame = f;
      rec.label = scene.label;
      rec.method = std::string(to_string(config.method));
      rec.unsafe = verdict.unsafe;
      rec.first_conflict = verdict.first_conflict;
      for (const auto& av : verdict.agents) {
        if (av.beta_hat) rec.beta_hat[av.agent] = *av.beta_hat;
        rec.method_used[av.agent] = std::string(to_string(av.method_used));
      }
      verdicts << verdict_to_json(rec).dump() << '\n';
      ++total;
      flagged += verdict.unsafe ? 1 : 0;
    }
  }
  std::cout << to_string(config.method) << ": " << flagged << " of " << total
            << " frames flagged unsafe\n";
}

void write_report(std::ostream& out, const MetricsReport& r) {
  out << report_csv_row(r) << '\n';
}

void run_eval_cmd(const Settings& s) {
  const auto scenes = load_all(s.scene_paths);
  const auto table = load_predictions(s.predictions);
  const auto calibration = maybe_calibration(s);
  EvalOptions options = s.eval;
  options.timing = s.timing;
  const fs::path dir(s.out_dir);
  auto metrics = open_out(dir / "metrics.csv");
  metrics << report_csv_header() << '\n';
  for (Method m : parse_methods(s.methods)) {
    MethodConfig config = s.method;
    config.method = m;
    if (needs_calibration(m) && !calibration) {
      std::cerr << "skipping " << to_string(m) << ": no --calibration given\n";
      continue;
    }
    const auto result = run_eval(scenes, table, config, calibration ? &*calibration : nullptr, options);
    write_report(metrics, result.report);
    auto verdicts = open_out(dir / ("verdicts_" + std::string(to_string(m)) + ".jsonl"));
    for (const auto& v : result.verdicts) verdicts << verdict_to_json(v).dump() << '\n';
    std::cout << report_csv_row(result.report) << '\n';
  }
}

void run_ablate(const Settings& s) {
  BenchmarkConfig bc;
  bc.world = s.world;
  bc.predictor = s.ablation_predictor;
  bc.synthesis = s.synthesis;
  bc.calibration_scenes = s.calibration_scenes;
  bc.eval_scenes = s.eval_scenes;
  const auto bench = build_benchmark(bc, s.seed);
  EvalOptions options = s.eval;
  options.timing = s.timing;
  auto methods = s.methods;
  if (methods.empty()) methods = {"force_opt"};
  const auto rows = mode_ablation(bench, s.ablation_predictor, s.mode_counts, parse_methods(methods), s.method, options);

  const fs::path dir(s.out_dir);
  auto metrics = open_out(dir / "ablation_metrics.csv");
  auto eta = open_out(dir / "ablation_eta.csv");
  metrics << "K,method,coverage_state,fpr,fnr,ber\n";
  eta << "K,t,eta\n";
  std::set<int> eta_written;
  metrics << std::setprecision(10);
  eta << std::setprecision(10);
  for (const auto& row : rows) {
    metrics << row.modes << ',' << row.report.method << ',' << row.report.coverage_state << ','
            << row.report.rates.fpr << ',' << row.report.rates.fnr << ',' << row.report.rates.ber << '\n';
    if (!eta_written.insert(row.modes).second) continue;
    for (const auto& [t, step] : row.calibration.per_step) eta << row.modes << ',' << t << ',' << step.eta << '\n';
  }
  std::cout << "ablation over " << s.mode_counts.size() << " mode counts written to " << dir.string() << '\n';
}

void run_bench(const Settings& s) {
  auto methods = s.methods;
  if (methods.empty()) methods = {"ci99", "pwc", "force_opt", "force_opt_belief", "wc"};
  const auto rows = bench_timing(parse_methods(methods), s.bench_frames, s.bench_agents,
                                 s.predictor.modes, s.seed);
  auto out = open_out(fs::path(s.out_dir) / "bench.csv");
  out << "name,samples,mean_s,median_s,p99_s\n" << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.name << ',' << r.samples << ',' << r.mean << ',' << r.median << ',' << r.p99 << '\n';
    std::cout << r.name << ": median " << r.median * 1e6 << " us, p99 " << r.p99 * 1e6 << " us\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated reachable-set safety monitor"};
  app.require_subcommand(1);
  Settings s;
  Knobs knobs;

  app.add_option("--seed", s.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--config", s.config, "JSON file of option values (top level or per subcommand)")
      ->check(CLI::ExistingFile);
  app.add_option("--out-dir,--out", s.out_dir, "Output directory")->capture_default_str();

  const auto add_scene_input = [&](CLI::App* cmd) {
    cmd->add_option("--scenes-dir,--input", s.scene_paths, "Scene directories or files")->required();
  };
  const auto add_method_knobs = [&](CLI::App* cmd) {
    knobs.add(cmd, "gamma", s.method.gamma, "Miscoverage level");
    knobs.add(cmd, "tau", s.method.tau, "Mixture coverage target");
    knobs.add(cmd, "beta-low", s.method.beta_low, "Low-confidence hypothesis");
    knobs.add(cmd, "beta-high", s.method.beta_high, "High-confidence hypothesis");
    knobs.add(cmd, "beta-threshold", s.method.beta_threshold, "Fallback below this belief-weighted beta");
    knobs.add(cmd, "a-max", s.method.limits.a_max, "Worst-case acceleration bound (m/s^2)");
    knobs.add(cmd, "v-max", s.method.limits.v_max, "Worst-case speed bound (m/s)");
    knobs.add(cmd, "footprint", s.method.footprint_radius, "Ego footprint radius (m)");
    knobs.add(cmd, "check-steps", s.method.check_steps, "Horizon steps checked per frame, 0 for all");
    knobs.add(cmd, "history", s.eval.history, "History frames before monitoring starts");
    knobs.add(cmd, "horizon", s.eval.horizon, "Forecast horizon (steps)");
    cmd->add_flag("--strict-predictions", s.method.strict_predictions, "Fail on missing forecasts");
  };
  const auto add_world_knobs = [&](CLI::App* cmd) {
    knobs.add(cmd, "scenes", s.world.n_scenes, "Number of scenes");
    knobs.add(cmd, "steps", s.world.steps, "Steps per scene");
    knobs.add(cmd, "min-contenders", s.world.min_contenders, "Fewest contenders per scene");
    knobs.add(cmd, "max-contenders", s.world.max_contenders, "Most contenders per scene");
    knobs.add(cmd, "intersection-fraction", s.world.intersection_fraction, "Share of scenes with an intersection");
    knobs.add(cmd, "ood-fraction", s.world.ood_fraction, "Share of scenes flagged out-of-distribution");
    knobs.add(cmd, "min-separation", s.world.min_separation, "Minimum ego-contender distance (m)");
  };
  const auto add_predictor_knobs = [&](CLI::App* cmd, PredictorConfig& p) {
    knobs.add(cmd, "modes", p.modes, "Mixture components kept (1-5)");
    knobs.add(cmd, "shrink", p.shrink, "Covariance multiplier");
    knobs.add(cmd, "ood-bias", p.ood_bias, "Mean offset on out-of-distribution scenes (m)");
    knobs.add(cmd, "ood-start", p.ood_start_frame, "First frame of the offset");
    knobs.add(cmd, "particles", p.particles, "Rollouts per hypothesis");
  };
  const auto add_synthesis_knobs = [&](CLI::App* cmd) {
    knobs.add(cmd, "pair-threshold", s.synthesis.pair_threshold, "Largest pairing distance (m)");
    knobs.add(cmd, "min-t-o", s.synthesis.min_t_o, "Earliest conflict step");
    knobs.add(cmd, "pos-tol", s.synthesis.pos_tol, "Largest accepted terminal error (m)");
    knobs.add(cmd, "max-iterations", s.synthesis.max_iterations, "Optimiser iteration cap");
  };

  auto* gen = app.add_subcommand("gen-scenes", "Generate synthetic safe scenes");
  add_world_knobs(gen);
  knobs.add(gen, "prefix", s.world.id_prefix, "Scene id prefix");

  auto* predict = app.add_subcommand("predict", "Run the synthetic predictor over scenes");
  add_scene_input(predict);
  add_predictor_knobs(predict, s.predictor);
  predict->add_option("--predictions", s.predictions, "Output JSONL (default <out-dir>/predictions.jsonl)");

  auto* synth = app.add_subcommand("synth-unsafe", "Synthesize unsafe variants of safe scenes");
  add_scene_input(synth);
  add_synthesis_knobs(synth);

  auto* calibrate = app.add_subcommand("calibrate", "Fit conformal inflation factors");
  add_scene_input(calibrate);
  calibrate->add_option("--predictions", s.predictions, "Prediction JSONL")->required();
  calibrate->add_option("--calibration", s.calibration, "Output JSON (default <out-dir>/calibration.json)");
  knobs.add(calibrate, "gamma", s.method.gamma, "Miscoverage level");
  knobs.add(calibrate, "tau", s.method.tau, "Mixture coverage target");
  knobs.add(calibrate, "history", s.eval.history, "History frames");
  knobs.add(calibrate, "horizon", s.eval.horizon, "Forecast horizon (steps)");

  auto* monitor = app.add_subcommand("monitor", "Monitor scenes with one method");
  add_scene_input(monitor);
  monitor->add_option("--predictions", s.predictions, "Prediction JSONL")->required();
  monitor->add_option("--calibration", s.calibration, "Calibration JSON");
  knobs.add(monitor, "method", s.method_name, "Method name");
  knobs.add(monitor, "fallback", s.fallback, "Fallback for force_opt_belief: none, pwc or wc")
      ->check(CLI::IsMember({"none", "pwc", "wc"}));
  add_method_knobs(monitor);

  auto* eval = app.add_subcommand("eval", "Evaluate methods and write metrics");
  add_scene_input(eval);
  eval->add_option("--predictions", s.predictions, "Prediction JSONL")->required();
  eval->add_option("--calibration", s.calibration, "Calibration JSON");
  knobs.add(eval, "method", s.methods, "Methods to run (default all)");
  knobs.add(eval, "threads", s.eval.threads, "Worker threads, 0 for all cores");
  eval->add_flag("--timing", s.timing, "Record per-frame latency");
  add_method_knobs(eval);

  auto* ablate = app.add_subcommand("ablate-modes", "Re-run the pipeline for several mode counts");
  add_world_knobs(ablate);
  add_predictor_knobs(ablate, s.ablation_predictor);
  add_synthesis_knobs(ablate);
  add_method_knobs(ablate);
  knobs.add(ablate, "mode-counts", s.mode_counts, "Mode counts to compare");
  knobs.add(ablate, "method", s.methods, "Methods to run (default force_opt)");
  knobs.add(ablate, "calibration-scenes", s.calibration_scenes, "Calibration world size");
  knobs.add(ablate, "eval-scenes", s.eval_scenes, "Evaluation world size");
  knobs.add(ablate, "threads", s.eval.threads, "Worker threads, 0 for all cores");

  auto* bench = app.add_subcommand("bench", "Per-frame latency of each method");
  knobs.add(bench, "frames", s.bench_frames, "Frames timed per method");
  knobs.add(bench, "agents", s.bench_agents, "Contenders per frame");
  knobs.add(bench, "modes", s.predictor.modes, "Mixture components");
  knobs.add(bench, "method", s.methods, "Methods to time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto* cmd = app.get_subcommands().front();
    if (!s.config.empty()) knobs.apply(read_json_file(s.config), cmd->get_name());

    if (cmd == gen) run_gen_scenes(s);
    else if (cmd == predict) run_predict(s);
    else if (cmd == synth) run_synth_unsafe(s);
    else if (cmd == calibrate) run_calibrate(s);
    else if (cmd == monitor) run_monitor(s);
    else if (cmd == eval) run_eval_cmd(s);
    else if (cmd == ablate) run_ablate(s);
    else if (cmd == bench) run_bench(s);
  } catch (const FrsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
