#pragma once

#include <cstddef>
#include <cstdint>

#include "nlos/forward.hpp"
#include "nlos/gradients.hpp"
#include "nlos/types.hpp"

namespace nlos {

/// Small randomized problem for derivative checks.
struct RandomScene {
  SceneConfig scene;
  CalibrationState cal;
  Volume volume;
  TransientSet measured;
};

struct RandomSceneLimits {
  int max_voxels_per_side = 8;
  int max_scans = 8;
  int max_detections = 2;
  int min_bins = 64;
  int max_bins = 256;
};

/// Random scan/detection points on a bumpy wall near z = 0, a random albedo
/// volume in front of it, and a measurement synthesized from a jittered
/// copy of the calibration and a different volume, so residuals are nonzero.
/// Every voxel's Gaussian support lies inside the recorded bins.
RandomScene random_scene(std::uint64_t seed, const RandomSceneLimits& limits = {});

struct GradcheckResult {
  double max_rel_rho = 0.0;
  double max_rel_scan = 0.0;
  double max_rel_detect = 0.0;
  std::size_t components = 0;

  double max_rel() const;
};

/// Compares grad_loss against central differences of loss() for every
/// albedo and position component (two-point for albedo, where the loss is
/// quadratic, four-point for positions). Relative error is
/// |a - fd| / max(|a|, |fd|); pairs with both magnitudes below `tiny` are
/// compared absolutely.
GradcheckResult finite_difference_check(const RandomScene& problem, double position_step = 1e-4,
                                        double albedo_step = 1e-5, const ModelOptions& options = {},
                                        double tiny = 1e-12);

}  // namespace nlos
