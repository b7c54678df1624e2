#include "frsmon/harness.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace frsmon {

using nlohmann::json;

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<int> eval_frames(const Scene& scene, int history, int horizon) {
  const int len = static_cast<int>(scene.length());
  std::vector<int> frames;
  int lo = history;
  int hi = len - 1 - horizon;
  if (scene.label == SceneLabel::SynthUnsafe) {
    if (!scene.conflict) return frames;
    lo = std::max(history, scene.conflict->t_o - horizon);
    hi = std::min(scene.conflict->t_o - 1, len - 2);
  }
  for (int f = lo; f <= hi; ++f) frames.push_back(f);
  return frames;
}

EgoPlan ego_plan(const Scene& scene, int frame, int horizon, double footprint_radius) {
  const auto& ego = scene.ego();
  EgoPlan plan;
  plan.dt = scene.dt;
  plan.footprint_radius = footprint_radius;
  for (int t = 1; t <= horizon; ++t) {
    const auto k = static_cast<std::size_t>(frame + t);
    if (k >= ego.states.size()) break;
    plan.positions.push_back(ego.states[k].position);
    plan.headings.push_back(ego.states[k].heading);
  }
  return plan;
}

std::vector<CalibrationRecord> calibration_records(const std::vector<Scene>& scenes,
                                                   const PredictionTable& predictions,
                                                   int history, int horizon) {
  std::vector<CalibrationRecord> records;
  for (const auto& scene : scenes) {
    const auto frames = eval_frames(scene, history, horizon);
    for (const auto& track : scene.tracks) {
      if (track.role != Role::Contender) continue;
      for (int f : frames) {
        const AgentForecast* fc = predictions.find(scene.id, f, track.id);
        if (fc == nullptr) continue;
        for (int t = 1; t <= std::min<int>(horizon, static_cast<int>(fc->size())); ++t) {
          const auto k = static_cast<std::size_t>(f + t);
          if (k >= track.states.size()) break;
          records.push_back({(*fc)[static_cast<std::size_t>(t - 1)], track.states[k].position, t});
        }
      }
    }
  }
  return records;
}

CalibrationModel calibrate_scenes(const std::vector<Scene>& scenes,
                                  const PredictionTable& predictions, int history, int horizon,
                                  double gamma, double tau) {
  const auto records = calibration_records(scenes, predictions, history, horizon);
  auto model = calibrate(records, gamma, tau);
  std::set<std::uint64_t> hashes;
  for (const auto& s : scenes) hashes.insert(scene_content_hash(s));
  model.source_hashes.assign(hashes.begin(), hashes.end());
  return model;
}

Rates compute_rates(const ConfusionCounts& c, bool strict) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t safe = c.fp + c.tn;
  const std::size_t unsafe = c.fn + c.tp;
  if (strict && (safe == 0 || unsafe == 0)) {
    throw FrsError(ErrorCode::DegenerateDenominator,
                   safe == 0 ? "no safe frames" : "no unsafe frames");
  }
  Rates r;
  r.fpr = safe == 0 ? nan : static_cast<double>(c.fp) / static_cast<double>(safe);
  r.fnr = unsafe == 0 ? nan : static_cast<double>(c.fn) / static_cast<double>(unsafe);
  r.ber = (r.fpr + r.fnr) / 2.0;
  return r;
}

double CoverageCounts::per_state() const {
  return states == 0 ? std::numeric_limits<double>::quiet_NaN()
                     : static_cast<double>(states_inside) / static_cast<double>(states);
}

double CoverageCounts::per_trajectory() const {
  return trajectories == 0
             ? std::numeric_limits<double>::quiet_NaN()
             : static_cast<double>(trajectories_inside) / static_cast<double>(trajectories);
}

void accumulate_coverage(CoverageCounts& counts, const std::vector<bool>& inside, int horizon) {
  bool all = true;
  for (std::size_t k = 0; k < inside.size(); ++k) {
    const int t = static_cast<int>(k) + 1;
    ++counts.states;
    ++counts.per_step[t];
    if (inside[k]) {
      ++counts.states_inside;
      ++counts.per_step_inside[t];
    } else {
      all = false;
    }
  }
  if (static_cast<int>(inside.size()) >= horizon) {
    ++counts.trajectories;
    if (all) ++counts.trajectories_inside;
  }
}

json verdict_to_json(const VerdictRecord& v) {
  json j = {{"scene", v.scene},
            {"frame", v.frame},
            {"label", std::string(to_string(v.label))},
            {"method", v.method},
            {"unsafe", v.unsafe},
            {"seconds", v.seconds}};
  j["first_conflict"] =
      v.first_conflict ? json{{"agent", v.first_conflict->first}, {"t", v.first_conflict->second}}
                       : json(nullptr);
  json agents = json::array();
  std::set<int> ids;
  for (const auto& [a, _] : v.method_used) ids.insert(a);
  for (const auto& [a, _] : v.beta_hat) ids.insert(a);
  for (int a : ids) {
    json ja = {{"agent", a}};
    const auto b = v.beta_hat.find(a);
    ja["beta_hat"] = b == v.beta_hat.end() ? json(nullptr) : json(b->second);
    const auto m = v.method_used.find(a);
    if (m != v.method_used.end()) ja["method_used"] = m->second;
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j;
}

VerdictRecord verdict_from_json(const json& j) {
  try {
    VerdictRecord v;
    v.scene = j.at("scene").get<std::string>();
    v.frame = j.at("frame").get<int>();
    v.label = label_from_string(j.at("label").get<std::string>());
    v.method = j.at("method").get<std::string>();
    v.unsafe = j.at("unsafe").get<bool>();
    v.seconds = j.value("seconds", 0.0);
    if (j.contains("first_conflict") && !j["first_conflict"].is_null()) {
      v.first_conflict = std::make_pair(j["first_conflict"].at("agent").get<int>(),
                                        j["first_conflict"].at("t").get<int>());
    }
    for (const auto& a : j.value("agents", json::array())) {
      const int id = a.at("agent").get<int>();
      if (a.contains("beta_hat") && !a["beta_hat"].is_null()) {
        v.beta_hat[id] = a["beta_hat"].get<double>();
      }
      if (a.contains("method_used")) v.method_used[id] = a["method_used"].get<std::string>();
    }
    return v;
  } catch (const json::exception& e) {
    throw FrsError(ErrorCode::Format, e.what());
  }
}

TimingRow summarize_timing(std::string name, std::vector<double> seconds) {
  TimingRow row;
  row.name = std::move(name);
  row.samples = seconds.size();
  if (seconds.empty()) return row;
  std::sort(seconds.begin(), seconds.end());
  row.mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size());
  const auto pick = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(seconds.size()))) ;
    return seconds[std::min(seconds.size() - 1, idx == 0 ? 0 : idx - 1)];
  };
  row.median = pick(0.5);
  row.p99 = pick(0.99);
  return row;
}

namespace {

struct SceneOutcome {
  std::vector<VerdictRecord> verdicts;
  CoverageCounts coverage;
  std::vector<double> times;
  std::size_t skipped = 0;
};

SceneOutcome evaluate_scene(const Scene& scene, const PredictionTable& predictions,
                            const MethodConfig& config, const CalibrationModel* calibration,
                            const EvalOptions& options) {
  SceneOutcome out;
  const auto frames = eval_frames(scene, options.history, options.horizon);
  if (frames.empty()) return out;
  const std::set<int> scored(frames.begin(), frames.end());
  const bool sequential = uses_belief(config.method);
  const int first = sequential ? options.history : frames.front();
  const int len = static_cast<int>(scene.length());

  SceneMonitor monitor(config, calibration);
  for (int f = first; f <= frames.back(); ++f) {
    const bool record = scored.count(f) != 0;
    if (!record && !sequential) continue;
    std::vector<AgentFrameInput> inputs;
    for (const auto& t : scene.tracks) {
      if (t.role != Role::Contender) continue;
      inputs.push_back({t.id, t.states[static_cast<std::size_t>(f)],
                        predictions.find(scene.id, f, t.id)});
    }
    const EgoPlan plan = ego_plan(scene, f, options.horizon, config.footprint_radius);
    const bool keep = record && scene.label == SceneLabel::Safe;

    const auto start = std::chrono::steady_clock::now();
    FrameVerdict verdict = monitor.evaluate_frame(plan, inputs, keep);
    const auto stop = std::chrono::steady_clock::now();
    if (!record) continue;

    VerdictRecord rec;
    rec.scene = scene.id;
    rec.frame = f;
    rec.label = scene.label;
    rec.method = std::string(to_string(config.method));
    rec.unsafe = verdict.unsafe;
    rec.first_conflict = verdict.first_conflict;
    rec.seconds =
        options.timing ? std::chrono::duration<double>(stop - start).count() : 0.0;
    for (const auto& av : verdict.agents) {
      if (av.beta_hat) rec.beta_hat[av.agent] = *av.beta_hat;
      rec.method_used[av.agent] = std::string(to_string(av.method_used));
      if (keep) {
        const AgentTrack* track = scene.find_track(av.agent);
        std::vector<bool> inside;
        for (std::size_t k = 0; k < av.sets.size(); ++k) {
          const int idx = f + static_cast<int>(k) + 1;
          if (idx >= len) break;
          inside.push_back(av.sets[k].contains(track->states[static_cast<std::size_t>(idx)].position));
        }
        accumulate_coverage(out.coverage, inside, options.horizon);
      }
    }
    out.skipped += verdict.skipped_agents.size();
    out.times.push_back(rec.seconds);
    out.verdicts.push_back(std::move(rec));
  }
  return out;
}

void tally(MetricsReport& r, const VerdictRecord& v) {
  ++r.frames;
  if (v.label == SceneLabel::Safe) {
    ++r.safe_frames;
    (v.unsafe ? r.counts.fp : r.counts.tn)++;
  } else {
    ++r.unsafe_frames;
    (v.unsafe ? r.counts.tp : r.counts.fn)++;
  }
}

}  // namespace

EvalResult run_eval(const std::vector<Scene>& scenes, const PredictionTable& predictions,
                    const MethodConfig& config, const CalibrationModel* calibration,
                    const EvalOptions& options) {
  if (needs_calibration(config.method) && calibration == nullptr) {
    throw FrsError(ErrorCode::MissingCalibration,
                   std::string(to_string(config.method)) + " needs a calibration model");
  }
  if (calibration != nullptr) {
    const std::set<std::uint64_t> used(calibration->source_hashes.begin(),
                                       calibration->source_hashes.end());
    for (const auto& s : scenes) {
      if (used.count(scene_content_hash(s)) != 0) {
        throw FrsError(ErrorCode::DatasetOverlap, "scene " + s.id + " was used for calibration");
      }
    }
  }

  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scenes[a].id < scenes[b].id; });

  std::vector<SceneOutcome> outcomes(scenes.size());
  parallel_for(order.size(), options.threads, [&](std::size_t i) {
    outcomes[i] = evaluate_scene(scenes[order[i]], predictions, config, calibration, options);
  });

  EvalResult result;
  MetricsReport& r = result.report;
  r.method = std::string(to_string(config.method));
  CoverageCounts coverage;
  std::vector<double> times;
  for (auto& o : outcomes) {
    for (auto& v : o.verdicts) {
      tally(r, v);
      result.verdicts.push_back(std::move(v));
    }
    coverage.states += o.coverage.states;
    coverage.states_inside += o.coverage.states_inside;
    coverage.trajectories += o.coverage.trajectories;
    coverage.trajectories_inside += o.coverage.trajectories_inside;
    for (const auto& [t, n] : o.coverage.per_step) coverage.per_step[t] += n;
    for (const auto& [t, n] : o.coverage.per_step_inside) coverage.per_step_inside[t] += n;
    times.insert(times.end(), o.times.begin(), o.times.end());
    r.skipped_agents += o.skipped;
  }
  r.rates = compute_rates(r.counts);
  r.coverage_state = coverage.per_state();
  r.coverage_trajectory = coverage.per_trajectory();
  for (const auto& [t, n] : coverage.per_step) {
    r.coverage_per_step[t] =
        static_cast<double>(coverage.per_step_inside[t]) / static_cast<double>(n);
  }
  const auto timing = summarize_timing(r.method, std::move(times));
  r.time_mean = timing.mean;
  r.time_median = timing.median;
  r.time_p99 = timing.p99;
  return result;
}

MetricsReport report_from_verdicts(const std::vector<VerdictRecord>& verdicts) {
  MetricsReport r;
  if (!verdicts.empty()) r.method = verdicts.front().method;
  for (const auto& v : verdicts) tally(r, v);
  r.rates = compute_rates(r.counts);
  return r;
}

std::string report_csv_header() {
  return "method,frames,safe_frames,unsafe_frames,tp,fp,tn,fn,fpr,fnr,ber,coverage_state,"
         "coverage_trajectory,time_mean_s,time_median_s,time_p99_s";
}

std::string report_csv_row(const MetricsReport& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << r.method << ',' << r.frames << ',' << r.safe_frames << ',' << r.unsafe_frames << ','
      << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn << ','
      << r.rates.fpr << ',' << r.rates.fnr << ',' << r.rates.ber << ',' << r.coverage_state << ','
      << r.coverage_trajectory << ',' << r.time_mean << ',' << r.time_median << ',' << r.time_p99;
  return out.str();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

PredictionTable predict_all(const std::vector<Scene>& scenes, const PredictorConfig& config) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < scenes.size(); ++i) index.emplace(scenes[i].id, i);
  std::vector<PredictionTable> tables(scenes.size());
  std::vector<std::size_t> own;
  std::vector<std::pair<std::size_t, std::size_t>> derived;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto src = scenes[i].source_id.empty() ? index.end() : index.find(scenes[i].source_id);
    if (src != index.end() && scenes[src->second].source_id.empty() &&
        scene_content_hash(scenes[src->second]) == scene_content_hash(scenes[i]) &&
        scenes[src->second].ood == scenes[i].ood) {
      derived.emplace_back(i, src->second);
    } else {
      own.push_back(i);
    }
  }
  parallel_for(own.size(), 0, [&](std::size_t k) {
    tables[own[k]] = predict_scenes({scenes[own[k]]}, config);
  });
  for (const auto& [i, src] : derived) {
    for (const auto& [key, fc] : tables[src].entries()) {
      tables[i].insert(scenes[i].id, std::get<1>(key), std::get<2>(key), fc);
    }
  }
  PredictionTable all;
  for (auto& t : tables) all.merge(std::move(t));
  return all;
}

Benchmark build_benchmark(const BenchmarkConfig& config, std::uint64_t seed) {
  Benchmark bench;
  WorldConfig calib_world = config.world;
  calib_world.n_scenes = config.calibration_scenes;
  calib_world.id_prefix = "calib";
  bench.calibration = gen_world(calib_world, splitmix64(seed ^ 0x1ull));

  WorldConfig eval_world = config.world;
  eval_world.n_scenes = config.eval_scenes;
  eval_world.id_prefix = "scene";
  const auto safe = gen_world(eval_world, splitmix64(seed ^ 0x2ull));

  std::vector<std::optional<SynthesisResult>> synth(safe.size());
  std::vector<char> attempted(safe.size(), 0);
  parallel_for(safe.size(), 0, [&](std::size_t i) {
    if (!find_pairing(safe[i], config.synthesis)) return;
    attempted[i] = 1;
    try {
      synth[i] = synthesize_unsafe(safe[i], config.synthesis);
    } catch (const FrsError& e) {
      if (e.code() != ErrorCode::Infeasible) throw;
    }
  });
  bench.eval = safe;
  for (std::size_t i = 0; i < safe.size(); ++i) {
    bench.synthesis_attempts += attempted[i];
    if (synth[i]) {
      ++bench.synthesis_converged;
      bench.eval.push_back(synth[i]->scene);
      bench.syntheses.push_back(std::move(*synth[i]));
    }
  }

  std::vector<Scene> all = bench.calibration;
  all.insert(all.end(), bench.eval.begin(), bench.eval.end());
  bench.predictions = predict_all(all, config.predictor);
  return bench;
}

std::vector<AblationRow> mode_ablation(const Benchmark& bench, const PredictorConfig& predictor,
                                       const std::vector<int>& modes,
                                       const std::vector<Method>& methods,
                                       const MethodConfig& base, const EvalOptions& options) {
  std::vector<Scene> all = bench.calibration;
  all.insert(all.end(), bench.eval.begin(), bench.eval.end());
  std::vector<AblationRow> rows;
  for (int k : modes) {
    PredictorConfig p = predictor;
    p.modes = k;
    const auto preds = predict_all(all, p);
    const auto model = calibrate_scenes(bench.calibration, preds, options.history,
                                        options.horizon, base.gamma, base.tau);
    for (Method m : methods) {
      MethodConfig mc = base;
      mc.method = m;
      AblationRow row;
      row.modes = k;
      row.calibration = model;
      row.report = run_eval(bench.eval, preds, mc, &model, options).report;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<TimingRow> bench_timing(const std::vector<Method>& methods, int n_frames, int agents,
                                    int modes, std::uint64_t seed) {
  WorldConfig world;
  world.n_scenes = std::max(1, n_frames / 10 + 1);
  world.min_contenders = agents;
  world.max_contenders = agents;
  // Every contender must be placed so frames carry exactly `agents` agents.
  world.min_separation = 0.0;
  PredictorConfig pc;
  pc.modes = modes;
  const auto scenes = gen_world(world, seed);
  const auto preds = predict_all(scenes, pc);

  CalibrationModel unit;
  for (int t = 1; t <= pc.horizon; ++t) unit.per_step[t] = {1.0, 1};

  struct Frame {
    const Scene* scene;
    int frame;
  };
  std::vector<Frame> frames;
  for (const auto& s : scenes) {
    for (int f : eval_frames(s, pc.history, pc.horizon)) frames.push_back({&s, f});
  }
  if (frames.empty()) throw FrsError(ErrorCode::InvalidArgument, "no frames to time");

  std::vector<TimingRow> rows;
  std::vector<double> solve_times;
  for (int i = 0; i < n_frames; ++i) {
    const Frame& fr = frames[static_cast<std::size_t>(i) % frames.size()];
    for (const auto& t : fr.scene->tracks) {
      if (t.role != Role::Contender) continue;
      const auto* fc = preds.find(fr.scene->id, fr.frame, t.id);
      if (fc == nullptr) continue;
      const auto start = std::chrono::steady_clock::now();
      const auto sol = solve_levels(fc->front(), kDefaultTau);
      const auto stop = std::chrono::steady_clock::now();
      if (sol.levels.empty()) throw FrsError(ErrorCode::DegenerateMixture, "empty solution");
      solve_times.push_back(std::chrono::duration<double>(stop - start).count());
    }
  }
  rows.push_back(summarize_timing("solve_levels", std::move(solve_times)));

  for (Method m : methods) {
    MethodConfig mc;
    mc.method = m;
    std::vector<double> times;
    for (int pass = 0; pass < 2; ++pass) {
      times.clear();
      const Scene* current = nullptr;
      std::optional<SceneMonitor> monitor;
      for (int i = 0; i < n_frames; ++i) {
        const Frame& fr = frames[static_cast<std::size_t>(i) % frames.size()];
        if (fr.scene != current) {
          current = fr.scene;
          monitor.emplace(mc, &unit);
        }
        std::vector<AgentFrameInput> inputs;
        for (const auto& t : fr.scene->tracks) {
          if (t.role != Role::Contender) continue;
          inputs.push_back({t.id, t.states[static_cast<std::size_t>(fr.frame)],
                            preds.find(fr.scene->id, fr.frame, t.id)});
        }
        const EgoPlan plan = ego_plan(*fr.scene, fr.frame, pc.horizon, mc.footprint_radius);
        const auto start = std::chrono::steady_clock::now();
        const auto verdict = monitor->evaluate_frame(plan, inputs);
        const auto stop = std::chrono::steady_clock::now();
        if (verdict.agents.size() > inputs.size()) throw FrsError(ErrorCode::Format, "bad verdict");
        times.push_back(std::chrono::duration<double>(stop - start).count());
      }
    }
    rows.push_back(summarize_timing(std::string(to_string(m)), std::move(times)));
  }
  return rows;
}

}  // namespace frsmon
