#include "nlos/types.hpp"

#include <cmath>
#include <numeric>

#include "nlos/error.hpp"

namespace nlos {
namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

AxisMask AxisMask::parse(const std::string& text) {
  if (text.size() == 3 && text.find_first_not_of("01") == std::string::npos) {
    return {text[2] == '1', text[1] == '1', text[0] == '1'};
  }
  if (text.empty() || text.find_first_not_of("xyzXYZ") != std::string::npos) {
    fail(ErrorCode::invalid_argument,
         "axis mask must be axis letters (e.g. \"z\", \"xyz\") or a zyx bitmask (e.g. \"100\"): '" +
             text + "'");
  }
  AxisMask mask{false, false, false};
  for (char c : text) {
    switch (c) {
      case 'x': case 'X': mask.x = true; break;
      case 'y': case 'Y': mask.y = true; break;
      default: mask.z = true; break;
    }
  }
  return mask;
}

std::string AxisMask::to_string() const {
  std::string out;
  if (x) out += 'x';
  if (y) out += 'y';
  if (z) out += 'z';
  return out.empty() ? "none" : out;
}

void SceneConfig::validate() const {
  if (!finite(source_pos)) fail(ErrorCode::invariant_violation, "scene.source_pos must be finite");
  if (!finite(detector_pos)) fail(ErrorCode::invariant_violation, "scene.detector_pos must be finite");
  if (!(bin_width > 0.0) || !std::isfinite(bin_width))
    fail(ErrorCode::invariant_violation, "scene.bin_width must be > 0");
  if (bin_count < 1) fail(ErrorCode::invariant_violation, "scene.bin_count must be >= 1");
  if (!std::isfinite(time_offset)) fail(ErrorCode::invariant_violation, "scene.time_offset must be finite");
  if (!(gaussian_sigma > 0.0) || !std::isfinite(gaussian_sigma))
    fail(ErrorCode::invariant_violation, "scene.gaussian_sigma must be > 0");
  if (!(speed_of_light > 0.0) || !std::isfinite(speed_of_light))
    fail(ErrorCode::invariant_violation, "scene.speed_of_light must be > 0");
}

void CalibrationState::validate() const {
  if (scan_positions.empty())
    fail(ErrorCode::invariant_violation, "calibration.scan_positions must not be empty");
  if (detection_positions.empty())
    fail(ErrorCode::invariant_violation, "calibration.detection_positions must not be empty");
  for (std::size_t j = 0; j < scan_positions.size(); ++j) {
    if (!finite(scan_positions[j]))
      fail(ErrorCode::invariant_violation, "calibration.scan_positions[" + std::to_string(j) + "] is not finite");
  }
  for (std::size_t m = 0; m < detection_positions.size(); ++m) {
    if (!finite(detection_positions[m]))
      fail(ErrorCode::invariant_violation,
           "calibration.detection_positions[" + std::to_string(m) + "] is not finite");
  }
}

std::array<int, 3> VolumeGrid::unflatten(std::size_t flat) const {
  const auto nx = static_cast<std::size_t>(dims[0]);
  const auto ny = static_cast<std::size_t>(dims[1]);
  return {static_cast<int>(flat % nx), static_cast<int>((flat / nx) % ny),
          static_cast<int>(flat / (nx * ny))};
}

void VolumeGrid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) fail(ErrorCode::invariant_violation, "volume.dims must all be >= 1");
    if (!(pitch[a] > 0.0) || !std::isfinite(pitch[a]))
      fail(ErrorCode::invariant_violation, "volume.pitch must all be > 0");
  }
  if (!finite(origin)) fail(ErrorCode::invariant_violation, "volume.origin must be finite");
}

Vec3 voxel_center(const VolumeGrid& grid, std::size_t flat_index) {
  if (flat_index >= grid.voxel_count()) {
    fail(ErrorCode::out_of_range, "voxel index " + std::to_string(flat_index) + " outside grid of " +
                                      std::to_string(grid.voxel_count()) + " voxels");
  }
  const auto idx = grid.unflatten(flat_index);
  return grid.origin + Vec3(idx[0] + 0.5, idx[1] + 0.5, idx[2] + 0.5).cwiseProduct(grid.pitch);
}

void Volume::validate() const {
  grid.validate();
  if (albedo.size() != grid.voxel_count()) {
    fail(ErrorCode::dimension_mismatch, "volume.albedo has " + std::to_string(albedo.size()) +
                                            " entries, grid has " + std::to_string(grid.voxel_count()));
  }
  for (double v : albedo) {
    if (!std::isfinite(v)) fail(ErrorCode::invariant_violation, "volume.albedo contains non-finite values");
  }
}

void TransientSet::validate() const {
  if (data.size() != scan_count * detection_count * bin_count) {
    fail(ErrorCode::dimension_mismatch, "transient data length " + std::to_string(data.size()) +
                                            " does not match scan*detection*bin counts");
  }
  for (double v : data) {
    if (!std::isfinite(v)) fail(ErrorCode::invariant_violation, "transients contain non-finite values");
  }
}

std::string to_string(Phase phase) {
  return phase == Phase::calibration ? "calibration" : "reconstruction";
}

Phase parse_phase(const std::string& text) {
  if (text == "calibration") return Phase::calibration;
  if (text == "reconstruction") return Phase::reconstruction;
  fail(ErrorCode::parse_error, "unknown phase '" + text + "'");
}

void OptimizationReport::validate() const {
  for (std::size_t n = 0; n < records.size(); ++n) {
    if (!std::isfinite(records[n].loss))
      fail(ErrorCode::non_finite, "report loss at iteration " + std::to_string(records[n].iteration) + " is not finite");
    if (n > 0 && records[n].iteration <= records[n - 1].iteration)
      fail(ErrorCode::invariant_violation, "report iterations must be strictly increasing");
  }
}

double total_path_length(const Vec3& scan, const Vec3& detection, const Vec3& voxel,
                         const SceneConfig& scene) {
  return ((scan - voxel).norm() + (scene.source_pos - scan).norm()) +
         ((detection - voxel).norm() + (scene.detector_pos - detection).norm());
}

std::vector<std::size_t> all_scans(std::size_t scan_count) {
  std::vector<std::size_t> idx(scan_count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace nlos
