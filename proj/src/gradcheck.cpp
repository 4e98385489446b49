#include "nlos/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nlos {

double GradcheckResult::max_rel() const { return std::max({max_rel_rho, max_rel_scan, max_rel_detect}); }

RandomScene random_scene(std::uint64_t seed, const RandomSceneLimits& limits) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto integer = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  RandomScene p;
  const int n = integer(2, limits.max_voxels_per_side);
  p.volume.grid.dims = {n, integer(2, limits.max_voxels_per_side), integer(2, limits.max_voxels_per_side)};
  p.volume.grid.pitch = Vec3(uniform(0.05, 0.1), uniform(0.05, 0.1), uniform(0.05, 0.1));
  p.volume.grid.origin = Vec3(uniform(-0.4, -0.1), uniform(-0.4, -0.1), uniform(0.5, 0.8));
  p.volume.albedo.resize(p.volume.grid.voxel_count());
  for (double& v : p.volume.albedo) v = uniform(0.1, 1.0);

  const int scans = integer(1, limits.max_scans);
  const int detections = integer(1, limits.max_detections);
  for (int j = 0; j < scans; ++j) p.cal.scan_positions.emplace_back(uniform(-0.5, 0.5), uniform(-0.5, 0.5), uniform(-0.05, 0.05));
  for (int m = 0; m < detections; ++m)
    p.cal.detection_positions.emplace_back(uniform(-0.3, 0.3), uniform(-0.3, 0.3), uniform(-0.05, 0.05));
  p.cal.update_mask = AxisMask::all();

  SceneConfig& s = p.scene;
  s.source_pos = Vec3(uniform(0.6, 1.0), uniform(-0.2, 0.2), uniform(0.3, 0.6));
  s.detector_pos = Vec3(uniform(0.6, 1.0), uniform(-0.2, 0.2), uniform(0.3, 0.6));
  s.bin_count = integer(limits.min_bins, limits.max_bins);
  s.bin_time = integer(0, 1) == 0 ? BinTime::center : BinTime::left_edge;

  // Fit the recorded window (with 6 sigma of margin) around every path.
  double lo = 1e300, hi = -1e300;
  for (const auto& l : p.cal.scan_positions) {
    for (const auto& d : p.cal.detection_positions) {
      for (std::size_t i = 0; i < p.volume.size(); ++i) {
        const double path = total_path_length(l, d, voxel_center(p.volume.grid, i), s);
        lo = std::min(lo, path);
        hi = std::max(hi, path);
      }
    }
  }
  const double sigma_bins = uniform(1.5, 3.0);
  const double margin_bins = 6.0 * sigma_bins + 2.0;
  const double bin_length = (hi - lo + 0.2) / (s.bin_count - 2.0 * margin_bins);
  s.bin_width = bin_length / s.speed_of_light;
  s.gaussian_sigma = sigma_bins * s.bin_width;
  s.time_offset = (lo - 0.1 - margin_bins * bin_length) / s.speed_of_light;

  CalibrationState shifted = p.cal;
  for (auto& l : shifted.scan_positions) l.z() += uniform(-0.03, 0.03);
  Volume other = p.volume;
  for (double& v : other.albedo) v = uniform(0.0, 1.0);
  p.measured = forward_gaussian(shifted, other, s, all_scans(shifted.scan_count()));
  return p;
}

namespace {

double relative_error(double analytic, double numeric, double tiny) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < tiny) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

GradcheckResult finite_difference_check(const RandomScene& problem, double position_step, double albedo_step,
                                        const ModelOptions& options, double tiny) {
  const auto scans = all_scans(problem.cal.scan_count());
  CalibrationState cal = problem.cal;
  cal.update_mask = AxisMask::all();
  Volume volume = problem.volume;
  const GradientBundle g = grad_loss(cal, volume, problem.scene, problem.measured, scans, options);
  auto objective = [&] { return loss(cal, volume, problem.scene, problem.measured, scans, options); };

  GradcheckResult result;
  for (std::size_t i = 0; i < volume.size(); ++i) {
    const double keep = volume.albedo[i];
    volume.albedo[i] = keep + albedo_step;
    const double up = objective();
    volume.albedo[i] = keep - albedo_step;
    const double down = objective();
    volume.albedo[i] = keep;
    result.max_rel_rho = std::max(result.max_rel_rho, relative_error(g.d_rho[i], (up - down) / (2 * albedo_step), tiny));
    ++result.components;
  }

  auto check_points = [&](std::vector<Vec3>& points, const std::vector<Vec3>& analytic, double& worst) {
    for (std::size_t n = 0; n < points.size(); ++n) {
      for (int axis = 0; axis < 3; ++axis) {
        const double keep = points[n][axis];
        auto at = [&](double offset) {
          points[n][axis] = keep + offset;
          return objective();
        };
        const double h = position_step;
        // Fourth-order central stencil; positions see curvature on the scale
        // of sigma, which can be only tens of steps wide.
        const double fd = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
        points[n][axis] = keep;
        worst = std::max(worst, relative_error(analytic[n][axis], fd, tiny));
        ++result.components;
      }
    }
  };
  check_points(cal.scan_positions, g.d_scan, result.max_rel_scan);
  check_points(cal.detection_positions, g.d_detect, result.max_rel_detect);
  return result;
}

}  // namespace nlos
