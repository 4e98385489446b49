#pragma once

// Per-(scan, detection) evaluation helpers shared by the forward model and
// the adjoint gradients. Both paths must walk voxels and bins identically so
// that a perfect fit yields exactly zero residuals.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/forward.hpp"
#include "nlos/types.hpp"

namespace nlos::detail {

struct ModelContext {
  ModelContext(const Volume& volume, const SceneConfig& scene, const ModelOptions& options)
      : scene(scene), options(options) {
    const std::size_t q = volume.grid.voxel_count();
    centers.reserve(q);
    for (std::size_t i = 0; i < q; ++i) centers.push_back(voxel_center(volume.grid, i));
    bin_paths.resize(static_cast<std::size_t>(scene.bin_count));
    for (int k = 0; k < scene.bin_count; ++k) bin_paths[k] = scene.bin_path_length(k);
    const double sigma = scene.sigma_length();
    inv_sigma2 = 1.0 / (sigma * sigma);
    reach = options.truncation_sigmas * sigma;
  }

  /// Inclusive bin range whose nominal path lies within the truncation
  /// radius of `path`. Returns false when empty.
  bool window(double path, int& first, int& last) const {
    if (!options.truncate) {
      first = 0;
      last = scene.bin_count - 1;
      return true;
    }
    const double lo = std::ceil(scene.path_to_bin(path - reach));
    const double hi = std::floor(scene.path_to_bin(path + reach));
    if (hi < 0.0 || lo > scene.bin_count - 1 || lo > hi) return false;
    first = lo < 0.0 ? 0 : static_cast<int>(lo);
    last = hi > scene.bin_count - 1 ? scene.bin_count - 1 : static_cast<int>(hi);
    return true;
  }

  double kernel(double residual_path) const {
    return std::exp(-(residual_path * residual_path) * inv_sigma2);
  }

  const SceneConfig& scene;
  const ModelOptions& options;
  std::vector<Vec3> centers;
  std::vector<double> bin_paths;
  double inv_sigma2 = 0.0;
  double reach = 0.0;
};

[[noreturn]] inline void degenerate_voxel(std::size_t voxel, const Vec3& center, const char* what,
                                          std::size_t index) {
  fail(ErrorCode::degenerate_geometry,
       "voxel " + std::to_string(voxel) + " at (" + std::to_string(center.x()) + ", " +
           std::to_string(center.y()) + ", " + std::to_string(center.z()) + ") coincides with " + what +
           " " + std::to_string(index));
}

struct PairGeometry {
  Vec3 scan;
  Vec3 detection;
  double source_leg;
  double detector_leg;
  std::size_t scan_index;
  std::size_t detection_index;
};

/// Accumulates one histogram of the Gaussian model into `out`.
inline void accumulate_pair(const ModelContext& ctx, const PairGeometry& pair,
                            std::span<const double> albedo, std::span<double> out) {
  const double eps = ctx.options.min_distance;
  for (std::size_t i = 0; i < ctx.centers.size(); ++i) {
    const Vec3& o = ctx.centers[i];
    const double a = (pair.scan - o).norm();
    const double b = (pair.detection - o).norm();
    if (a < eps) degenerate_voxel(i, o, "scan position", pair.scan_index);
    if (b < eps) degenerate_voxel(i, o, "detection position", pair.detection_index);
    const double rho = albedo[i];
    if (rho == 0.0) continue;
    const double path = (a + pair.source_leg) + (b + pair.detector_leg);
    int k0 = 0, k1 = -1;
    if (!ctx.window(path, k0, k1)) continue;
    const double weight = rho / ((a * a) * (b * b));
    for (int k = k0; k <= k1; ++k) out[k] += weight * ctx.kernel(ctx.bin_paths[k] - path);
  }
}

}  // namespace nlos::detail
