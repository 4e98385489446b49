#pragma once

// On-disk dataset layout (a directory):
//   scene.json                scene, calibration, volume grid, optional
//                             schedule/model overrides
//   transients.f32            float32 LE, [scan][detection][bin]
//   volume.f32                optional float32 LE albedo estimate, x-fastest
//   ground_truth.json         optional true scan/detection positions
//   ground_truth_volume.f32   optional float32 LE true albedo

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlos/forward.hpp"
#include "nlos/optimizer.hpp"
#include "nlos/types.hpp"

namespace nlos {

struct Dataset {
  SceneConfig scene;
  CalibrationState calibration;
  VolumeGrid grid;
  TransientSet transients;
  std::optional<std::vector<double>> volume;
  std::optional<CalibrationState> ground_truth;
  std::optional<std::vector<double>> ground_truth_volume;
  std::optional<AutocalSchedule> schedule;
  std::optional<ModelOptions> model;
};

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Reads and validates a dataset. Errors: missing_file, parse_error,
/// size_mismatch (blob length vs metadata), invariant_violation.
Dataset load_dataset(const std::filesystem::path& dir);

/// Raw little-endian float32 blobs.
void write_f32(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f32(const std::filesystem::path& path, std::size_t expected_count);

// JSON conversions used by the dataset and report files.
nlohmann::json scene_to_json(const SceneConfig& scene);
SceneConfig scene_from_json(const nlohmann::json& j);
nlohmann::json calibration_to_json(const CalibrationState& cal);
CalibrationState calibration_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const VolumeGrid& grid);
VolumeGrid grid_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const AutocalSchedule& schedule);
AutocalSchedule schedule_from_json(const nlohmann::json& j, AutocalSchedule base = {});
nlohmann::json model_to_json(const ModelOptions& model);
ModelOptions model_from_json(const nlohmann::json& j, ModelOptions base = {});

/// report.json body: parameters, per-iteration records, final calibration.
/// The final volume and snapshots are written as f32 blobs by write_report.
nlohmann::json report_to_json(const OptimizationReport& report);
OptimizationReport report_from_json(const nlohmann::json& j);

/// Writes report.json, volume.f32 (final volume) and volume_iterNNN.f32 for
/// every snapshot into `dir`.
void write_report(const std::filesystem::path& dir, const OptimizationReport& report);

struct UnrectifyOptions {
  /// Adds half a bin before rounding the shift, for data whose time origin is
  /// a bin center rather than an edge.
  bool half_bin_offset = false;
};

/// Delays each confocal histogram j by round((|i - l_j| + |d - s_j|) / (c dt))
/// bins, where i and d are the scene's (virtual) source and detector and s_j
/// is the j-th detection position when one is given per scan, otherwise l_j.
/// Tail bins shifted past the end are dropped, the head is zero-filled.
TransientSet unrectify_confocal(const TransientSet& rectified, const CalibrationState& cal,
                                const SceneConfig& scene, const UnrectifyOptions& options = {});

/// Inverse of unrectify_confocal: shifts each histogram earlier.
TransientSet rectify_confocal(const TransientSet& unrectified, const CalibrationState& cal,
                              const SceneConfig& scene, const UnrectifyOptions& options = {});

}  // namespace nlos
