#include "nlos/forward.hpp"

#include <cmath>
#include <string>

#include "model_kernel.hpp"
#include "nlos/error.hpp"
#include "nlos/parallel.hpp"

namespace nlos {

ForwardWorkspace::ForwardWorkspace(const CalibrationState& cal, const SceneConfig& scene)
    : scans_(cal.scan_positions),
      detections_(cal.detection_positions),
      source_(scene.source_pos),
      detector_(scene.detector_pos) {
  source_legs_.reserve(scans_.size());
  for (const auto& l : scans_) source_legs_.push_back((source_ - l).norm());
  detector_legs_.reserve(detections_.size());
  for (const auto& s : detections_) detector_legs_.push_back((detector_ - s).norm());
}

bool ForwardWorkspace::matches(const CalibrationState& cal, const SceneConfig& scene) const {
  return cal.scan_positions == scans_ && cal.detection_positions == detections_ &&
         scene.source_pos == source_ && scene.detector_pos == detector_;
}

void check_model_inputs(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                        std::span<const std::size_t> scan_subset) {
  scene.validate();
  cal.validate();
  if (volume.albedo.size() != volume.grid.voxel_count()) {
    fail(ErrorCode::dimension_mismatch, "volume albedo length does not match its grid");
  }
  for (std::size_t j : scan_subset) {
    if (j >= cal.scan_count()) {
      fail(ErrorCode::out_of_range, "scan index " + std::to_string(j) + " outside " +
                                        std::to_string(cal.scan_count()) + " scan positions");
    }
  }
}

void check_measurement(const CalibrationState& cal, const SceneConfig& scene, const TransientSet& measured) {
  if (measured.scan_count != cal.scan_count() || measured.detection_count != cal.detection_count() ||
      measured.bin_count != static_cast<std::size_t>(scene.bin_count) ||
      measured.data.size() != measured.scan_count * measured.detection_count * measured.bin_count) {
    fail(ErrorCode::dimension_mismatch,
         "measurement is " + std::to_string(measured.scan_count) + "x" +
             std::to_string(measured.detection_count) + "x" + std::to_string(measured.bin_count) +
             " but calibration/scene expect " + std::to_string(cal.scan_count()) + "x" +
             std::to_string(cal.detection_count()) + "x" + std::to_string(scene.bin_count));
  }
}

TransientSet forward_gaussian(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                              std::span<const std::size_t> scan_subset, const ModelOptions& options) {
  check_model_inputs(cal, volume, scene, scan_subset);
  const detail::ModelContext ctx(volume, scene, options);
  const ForwardWorkspace legs(cal, scene);
  const std::size_t detections = cal.detection_count();
  TransientSet out(scan_subset.size(), detections, static_cast<std::size_t>(scene.bin_count));

  // Each (row, detection) pair writes its own histogram slice.
  parallel_chunks(scan_subset.size() * detections, options.threads,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t p = begin; p < end; ++p) {
                      const std::size_t row = p / detections;
                      const std::size_t m = p % detections;
                      const std::size_t j = scan_subset[row];
                      const detail::PairGeometry pair{cal.scan_positions[j], cal.detection_positions[m],
                                                      legs.source_leg(j), legs.detector_leg(m), j, m};
                      detail::accumulate_pair(ctx, pair, volume.albedo, out.histogram(row, m));
                    }
                  });
  return out;
}

TransientSet forward_rect_oracle(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                                 std::span<const std::size_t> scan_subset, const ModelOptions& options) {
  check_model_inputs(cal, volume, scene, scan_subset);
  const std::size_t detections = cal.detection_count();
  TransientSet out(scan_subset.size(), detections, static_cast<std::size_t>(scene.bin_count));
  const double origin = scene.speed_of_light * scene.time_offset;
  const double unit = scene.bin_length();

  for (std::size_t row = 0; row < scan_subset.size(); ++row) {
    const Vec3& l = cal.scan_positions[scan_subset[row]];
    for (std::size_t m = 0; m < detections; ++m) {
      const Vec3& s = cal.detection_positions[m];
      for (std::size_t i = 0; i < volume.grid.voxel_count(); ++i) {
        const Vec3 o = voxel_center(volume.grid, i);
        const double a = (l - o).norm();
        const double b = (s - o).norm();
        if (a < options.min_distance) detail::degenerate_voxel(i, o, "scan position", scan_subset[row]);
        if (b < options.min_distance) detail::degenerate_voxel(i, o, "detection position", m);
        const double x = (total_path_length(l, s, o, scene) - origin) / unit;
        // Pi(k - x) = 1 for 0 < k - x < 1: the single integer k in (x, x + 1).
        const double k = std::floor(x) + 1.0;
        if (!(k - x > 0.0 && k - x < 1.0)) continue;
        if (k < 0.0 || k >= scene.bin_count) continue;
        out.at(row, m, static_cast<std::size_t>(k)) += volume.albedo[i] / ((a * a) * (b * b));
      }
    }
  }
  return out;
}

double loss(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
            const TransientSet& measured, std::span<const std::size_t> scan_subset,
            const ModelOptions& options) {
  check_model_inputs(cal, volume, scene, scan_subset);
  check_measurement(cal, scene, measured);
  const TransientSet model = forward_gaussian(cal, volume, scene, scan_subset, options);
  double total = 0.0;
  for (std::size_t row = 0; row < scan_subset.size(); ++row) {
    for (std::size_t m = 0; m < cal.detection_count(); ++m) {
      const auto predicted = model.histogram(row, m);
      const auto observed = measured.histogram(scan_subset[row], m);
      for (std::size_t k = 0; k < predicted.size(); ++k) {
        const double r = predicted[k] - observed[k];
        total += r * r;
      }
    }
  }
  return total;
}

}  // namespace nlos
