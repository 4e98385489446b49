#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlos/types.hpp"

namespace nlos {

/// Evaluation knobs shared by the forward model, its gradients and the
/// backprojection initializer.
struct ModelOptions {
  /// Skip Gaussian contributions further than `truncation_sigmas` sigma from
  /// a bin's nominal path length.
  bool truncate = true;
  double truncation_sigmas = 5.0;
  /// Voxels closer than this to a scan or detection point are rejected.
  double min_distance = 1e-9;
  int threads = 1;
};

/// Caches the voxel-independent path legs |i - l_j| and |d - s_m|.
class ForwardWorkspace {
public:
  ForwardWorkspace(const CalibrationState& cal, const SceneConfig& scene);

  /// False once the calibration or instrument positions differ from the ones
  /// the legs were computed for.
  bool matches(const CalibrationState& cal, const SceneConfig& scene) const;

  double source_leg(std::size_t scan) const { return source_legs_[scan]; }
  double detector_leg(std::size_t detection) const { return detector_legs_[detection]; }

private:
  std::vector<Vec3> scans_;
  std::vector<Vec3> detections_;
  Vec3 source_;
  Vec3 detector_;
  std::vector<double> source_legs_;
  std::vector<double> detector_legs_;
};

/// Gaussian-relaxed transient model. Output rows follow `scan_subset` order;
/// the result has scan_count == scan_subset.size().
TransientSet forward_gaussian(const CalibrationState& cal, const Volume& volume,
                              const SceneConfig& scene, std::span<const std::size_t> scan_subset,
                              const ModelOptions& options = {});

/// Rectangle-window binning model: voxel i lands in bin k iff
/// 0 < k - x_i < 1, where x_i is the path length in bin units measured from
/// the time offset. Test oracle only.
TransientSet forward_rect_oracle(const CalibrationState& cal, const Volume& volume,
                                 const SceneConfig& scene, std::span<const std::size_t> scan_subset,
                                 const ModelOptions& options = {});

/// Sum of squared residuals over the scans in `scan_subset`. `measured` holds
/// every scan; rows are picked by index.
double loss(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
            const TransientSet& measured, std::span<const std::size_t> scan_subset,
            const ModelOptions& options = {});

/// Throws dimension_mismatch / out_of_range if the inputs do not fit together.
void check_model_inputs(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                        std::span<const std::size_t> scan_subset);
void check_measurement(const CalibrationState& cal, const SceneConfig& scene, const TransientSet& measured);

}  // namespace nlos
