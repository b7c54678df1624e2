#include "frsmon/io.hpp"

#include "frsmon/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace frsmon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FrsError(ErrorCode::Format, "expected [x, y]");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

json mat_to_json(const Mat2& m) {
  return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

Mat2 mat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FrsError(ErrorCode::Format, "expected 2x2 matrix");
  Mat2 m;
  m.row(0) = vec_from_json(j[0]).transpose();
  m.row(1) = vec_from_json(j[1]).transpose();
  return m;
}

const json& field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw FrsError(ErrorCode::Format, std::string("missing field '") + name + "'");
  return *it;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FrsError(ErrorCode::Format, e.what());
  }
}

}  // namespace

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FrsError(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FrsError(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FrsError(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw FrsError(ErrorCode::Io, "write failed for " + path.string());
}

json scene_to_json(const Scene& scene) {
  json tracks = json::array();
  for (const auto& t : scene.tracks) {
    json states = json::array();
    for (const auto& s : t.states) {
      states.push_back(json::array({s.position.x(), s.position.y(), s.heading, s.speed}));
    }
    json jt = {{"id", t.id}, {"role", std::string(to_string(t.role))}, {"states", states}};
    if (t.maneuver) jt["maneuver"] = std::string(to_string(*t.maneuver));
    tracks.push_back(std::move(jt));
  }
  json lanes = json::array();
  for (const auto& lane : scene.lanes) {
    json pts = json::array();
    for (const auto& p : lane) pts.push_back(vec_to_json(p));
    lanes.push_back(std::move(pts));
  }
  json j = {{"format", kSceneFormat},
            {"id", scene.id},
            {"dt", scene.dt},
            {"units", {{"position", "m"}, {"heading", "rad"}, {"speed", "m/s"}, {"dt", "s"}}},
            {"label", std::string(to_string(scene.label))},
            {"ood", scene.ood},
            {"tracks", tracks},
            {"map", {{"lanes", lanes}}}};
  if (scene.conflict) {
    const auto& c = *scene.conflict;
    j["conflict"] = {{"agent", c.agent},
                     {"t_e", c.t_e},
                     {"t_o", c.t_o},
                     {"p_c", vec_to_json(c.p_c)},
                     {"d_min", c.d_min}};
  }
  if (!scene.source_id.empty()) j["source_id"] = scene.source_id;
  return j;
}

Scene scene_from_json(const json& j) {
  return guarded([&] {
    if (field(j, "format").get<std::string>() != kSceneFormat) {
      throw FrsError(ErrorCode::Format, "unsupported scene format");
    }
    Scene s;
    s.id = field(j, "id").get<std::string>();
    s.dt = field(j, "dt").get<double>();
    s.label = label_from_string(field(j, "label").get<std::string>());
    s.ood = j.value("ood", false);
    for (const auto& jt : field(j, "tracks")) {
      AgentTrack t;
      t.id = field(jt, "id").get<int>();
      t.role = role_from_string(field(jt, "role").get<std::string>());
      if (jt.contains("maneuver")) t.maneuver = maneuver_from_string(jt["maneuver"].get<std::string>());
      for (const auto& st : field(jt, "states")) {
        if (!st.is_array() || st.size() != 4) {
          throw FrsError(ErrorCode::Format, "track state must be [x, y, theta, v]");
        }
        t.states.push_back({Vec2(st[0].get<double>(), st[1].get<double>()), st[2].get<double>(),
                            st[3].get<double>()});
      }
      s.tracks.push_back(std::move(t));
    }
    if (j.contains("map")) {
      for (const auto& lane : j["map"].value("lanes", json::array())) {
        std::vector<Vec2> pts;
        for (const auto& p : lane) pts.push_back(vec_from_json(p));
        s.lanes.push_back(std::move(pts));
      }
    }
    if (j.contains("conflict")) {
      const auto& c = j["conflict"];
      s.conflict = ConflictInfo{field(c, "agent").get<int>(), field(c, "t_e").get<int>(),
                                field(c, "t_o").get<int>(), vec_from_json(field(c, "p_c")),
                                field(c, "d_min").get<double>()};
    }
    s.source_id = j.value("source_id", std::string());
    return s;
  });
}

void save_scene(const Scene& scene, const fs::path& path) {
  write_text_file(path, scene_to_json(scene).dump(1) + "\n");
}

Scene load_scene(const fs::path& path) { return scene_from_json(read_json_file(path)); }

void save_scenes(const std::vector<Scene>& scenes, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& s : scenes) save_scene(s, dir / (s.id + ".json"));
}

std::vector<Scene> load_scenes(const fs::path& path) {
  std::vector<Scene> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    for (const auto& f : files) out.push_back(load_scene(f));
  } else if (fs::exists(path)) {
    out.push_back(load_scene(path));
  } else {
    throw FrsError(ErrorCode::Io, "no such scene path " + path.string());
  }
  std::sort(out.begin(), out.end(), [](const Scene& a, const Scene& b) { return a.id < b.id; });
  return out;
}

void save_predictions(const PredictionTable& table, const fs::path& path) {
  std::ostringstream out;
  for (const auto& [key, forecast] : table.entries()) {
    const auto& [scene, frame, agent] = key;
    for (const auto& pred : forecast) {
      json means = json::array();
      json covs = json::array();
      for (const auto& m : pred.modes()) {
        means.push_back(vec_to_json(m.mean()));
        covs.push_back(mat_to_json(m.cov()));
      }
      const json line = {{"format", kPredictionFormat},
                         {"scene", scene},
                         {"frame", frame},
                         {"agent", agent},
                         {"t", pred.horizon_step()},
                         {"weights", pred.weights()},
                         {"means", means},
                         {"covs", covs}};
      out << line.dump() << '\n';
    }
  }
  write_text_file(path, out.str());
}

PredictionTable load_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FrsError(ErrorCode::Io, "cannot open " + path.string());
  std::map<PredictionTable::Key, std::map<int, GmmPrediction>> grouped;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    guarded([&] {
      const json j = json::parse(line);
      if (field(j, "format").get<std::string>() != kPredictionFormat) {
        throw FrsError(ErrorCode::Format, "unsupported prediction format");
      }
      const int t = field(j, "t").get<int>();
      const auto weights = field(j, "weights").get<std::vector<double>>();
      const auto& means = field(j, "means");
      const auto& covs = field(j, "covs");
      if (means.size() != weights.size() || covs.size() != weights.size()) {
        throw FrsError(ErrorCode::Format, "line " + std::to_string(lineno) +
                                              ": weights, means and covs differ in length");
      }
      std::vector<GaussianMode> modes;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        modes.emplace_back(vec_from_json(means[i]), mat_from_json(covs[i]));
      }
      PredictionTable::Key key{field(j, "scene").get<std::string>(), field(j, "frame").get<int>(),
                               field(j, "agent").get<int>()};
      grouped[key].insert_or_assign(t, GmmPrediction(std::move(modes), weights, t));
      return 0;
    });
  }
  PredictionTable table;
  for (auto& [key, steps] : grouped) {
    AgentForecast forecast;
    int expect = 1;
    for (auto& [t, pred] : steps) {
      if (t != expect++) {
        throw FrsError(ErrorCode::Format, "non-contiguous horizon steps for scene " +
                                              std::get<0>(key) + " frame " +
                                              std::to_string(std::get<1>(key)));
      }
      forecast.push_back(std::move(pred));
    }
    table.insert(std::get<0>(key), std::get<1>(key), std::get<2>(key), std::move(forecast));
  }
  return table;
}

json calibration_to_json(const CalibrationModel& model) {
  json steps = json::array();
  for (const auto& [t, s] : model.per_step) {
    steps.push_back({{"t", t}, {"eta", s.eta}, {"n", s.n}});
  }
  return {{"gamma", model.gamma},
          {"tau", model.tau},
          {"per_step", steps},
          {"source_hashes", model.source_hashes}};
}

CalibrationModel calibration_from_json(const json& j) {
  return guarded([&] {
    CalibrationModel m;
    m.gamma = field(j, "gamma").get<double>();
    m.tau = j.value("tau", kDefaultTau);
    for (const auto& s : field(j, "per_step")) {
      m.per_step[field(s, "t").get<int>()] =
          StepCalibration{field(s, "eta").get<double>(), field(s, "n").get<std::size_t>()};
    }
    if (j.contains("source_hashes")) {
      m.source_hashes = j["source_hashes"].get<std::vector<std::uint64_t>>();
    }
    return m;
  });
}

void save_calibration(const CalibrationModel& model, const fs::path& path) {
  write_text_file(path, calibration_to_json(model).dump(2) + "\n");
}

CalibrationModel load_calibration(const fs::path& path) {
  return calibration_from_json(read_json_file(path));
}

json frs_to_json(const FrsSet& frs) {
  json comps = json::array();
  for (const auto& c : frs.components()) {
    comps.push_back(
        {{"mean", vec_to_json(c.mode.mean())}, {"cov", mat_to_json(c.mode.cov())}, {"level", c.level}});
  }
  return {{"scale", frs.scale()}, {"components", comps}};
}

json discs_to_json(const std::vector<DiscSet>& discs) {
  json out = json::array();
  for (const auto& d : discs) out.push_back({{"center", vec_to_json(d.center)}, {"radius", d.radius}});
  return out;
}

}  // namespace frsmon
