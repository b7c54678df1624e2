#pragma once

#include "frsmon/conformal.hpp"
#include "frsmon/frs_set.hpp"
#include "frsmon/predictor.hpp"
#include "frsmon/scenario.hpp"
#include "frsmon/worst_case.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace frsmon {

inline constexpr const char* kSceneFormat = "scene_v1";
inline constexpr const char* kPredictionFormat = "pred_v1";

nlohmann::json scene_to_json(const Scene& scene);
/// Throws Format on missing or malformed fields.
Scene scene_from_json(const nlohmann::json& j);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

/// One `<id>.json` per scene in `dir` (created if needed).
void save_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& dir);
/// Every *.json in `dir`, or the single file `path`, ordered by scene id.
std::vector<Scene> load_scenes(const std::filesystem::path& path);

/// pred_v1 JSONL, one line per (scene, frame, agent, horizon step).
void save_predictions(const PredictionTable& table, const std::filesystem::path& path);
PredictionTable load_predictions(const std::filesystem::path& path);

nlohmann::json calibration_to_json(const CalibrationModel& model);
CalibrationModel calibration_from_json(const nlohmann::json& j);
void save_calibration(const CalibrationModel& model, const std::filesystem::path& path);
CalibrationModel load_calibration(const std::filesystem::path& path);

/// Debug shape {scale, components: [{mean, cov, level}]}.
nlohmann::json frs_to_json(const FrsSet& frs);
nlohmann::json discs_to_json(const std::vector<DiscSet>& discs);

/// Parse a whole file as JSON; throws Io / Format.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace frsmon
