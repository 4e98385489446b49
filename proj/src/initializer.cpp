#include "nlos/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nlos/error.hpp"
#include "nlos/parallel.hpp"

namespace nlos {

Volume backproject(const CalibrationState& cal, const SceneConfig& scene, const TransientSet& measured,
                   const VolumeGrid& grid, const ModelOptions& options) {
  grid.validate();
  check_model_inputs(cal, Volume(grid), scene, {});
  check_measurement(cal, scene, measured);
  const ForwardWorkspace legs(cal, scene);
  Volume out(grid);

  parallel_chunks(grid.voxel_count(), options.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3 o = voxel_center(grid, i);
      double acc = 0.0;
      for (std::size_t j = 0; j < cal.scan_count(); ++j) {
        const double a = (cal.scan_positions[j] - o).norm();
        if (a < options.min_distance)
          fail(ErrorCode::degenerate_geometry, "voxel " + std::to_string(i) + " coincides with scan position " +
                                                   std::to_string(j));
        for (std::size_t m = 0; m < cal.detection_count(); ++m) {
          const double b = (cal.detection_positions[m] - o).norm();
          if (b < options.min_distance)
            fail(ErrorCode::degenerate_geometry, "voxel " + std::to_string(i) +
                                                     " coincides with detection position " + std::to_string(m));
          const double path = a + b + legs.source_leg(j) + legs.detector_leg(m);
          const double k = std::floor(scene.path_to_bin(path) + 0.5);
          if (k < 0.0 || k >= scene.bin_count) continue;
          acc += measured.at(j, m, static_cast<std::size_t>(k)) * a * a * b * b;
        }
      }
      out.albedo[i] = acc;
    }
  });
  return out;
}

std::vector<double> bandpass_kernel(const SceneConfig& scene, double center_wavelength, double cycles) {
  if (!(center_wavelength > 0.0)) fail(ErrorCode::invalid_argument, "bandpass wavelength must be > 0");
  if (!(cycles > 0.0)) fail(ErrorCode::invalid_argument, "bandpass cycles must be > 0");
  const double period = center_wavelength / scene.bin_length();
  if (period < 2.0) {
    fail(ErrorCode::invalid_argument, "bandpass wavelength spans " + std::to_string(period) +
                                          " bins; at least 2 are needed");
  }
  const double spread = cycles * period / 4.0;
  const int half = static_cast<int>(std::ceil(3.0 * spread));
  std::vector<double> envelope(2 * half + 1);
  std::vector<double> carrier(2 * half + 1);
  double envelope_sum = 0.0;
  double weighted_carrier = 0.0;
  for (int n = -half; n <= half; ++n) {
    const double w = std::exp(-0.5 * (n / spread) * (n / spread));
    const double c = std::cos(2.0 * std::numbers::pi * n / period);
    envelope[n + half] = w;
    carrier[n + half] = c;
    envelope_sum += w;
    weighted_carrier += w * c;
  }
  // Remove the envelope's DC leak so the kernel sums to zero.
  const double offset = weighted_carrier / envelope_sum;
  std::vector<double> kernel(2 * half + 1);
  for (std::size_t n = 0; n < kernel.size(); ++n) kernel[n] = envelope[n] * (carrier[n] - offset);
  return kernel;
}

TransientSet bandpass_filter(const TransientSet& measured, const SceneConfig& scene, double center_wavelength,
                             double cycles) {
  const auto kernel = bandpass_kernel(scene, center_wavelength, cycles);
  const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  TransientSet out(measured.scan_count, measured.detection_count, measured.bin_count);
  const auto bins = static_cast<std::ptrdiff_t>(measured.bin_count);
  for (std::size_t j = 0; j < measured.scan_count; ++j) {
    for (std::size_t m = 0; m < measured.detection_count; ++m) {
      const auto in = measured.histogram(j, m);
      auto y = out.histogram(j, m);
      for (std::ptrdiff_t n = 0; n < bins; ++n) {
        double acc = 0.0;
        for (std::ptrdiff_t t = -half; t <= half; ++t) {
          const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(n - t, 0, bins - 1);
          acc += kernel[static_cast<std::size_t>(t + half)] * in[static_cast<std::size_t>(src)];
        }
        y[static_cast<std::size_t>(n)] = acc;
      }
    }
  }
  return out;
}

double fit_albedo_scale(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                        const TransientSet& measured, const ModelOptions& options) {
  check_measurement(cal, scene, measured);
  const auto scans = all_scans(cal.scan_count());
  const TransientSet model = forward_gaussian(cal, volume, scene, scans, options);
  double cross = 0.0;
  double power = 0.0;
  for (std::size_t n = 0; n < model.data.size(); ++n) {
    cross += model.data[n] * measured.data[n];
    power += model.data[n] * model.data[n];
  }
  return power > 0.0 ? cross / power : 0.0;
}

Volume initial_volume(const CalibrationState& cal, const SceneConfig& scene, const TransientSet& measured,
                      const VolumeGrid& grid, const InitOptions& init, const ModelOptions& options) {
  if (init.zero) {
    grid.validate();
    return Volume(grid);
  }
  Volume volume = [&] {
    if (!init.filtered) return backproject(cal, scene, measured, grid, options);
    const double wavelength = init.wavelength > 0.0 ? init.wavelength : 8.0 * scene.bin_length();
    Volume v = backproject(cal, scene, bandpass_filter(measured, scene, wavelength, init.cycles), grid, options);
    for (double& x : v.albedo) x = std::abs(x);
    return v;
  }();
  for (double& x : volume.albedo) x = std::max(x, 0.0);
  if (init.fit_scale) {
    const double gain = fit_albedo_scale(cal, volume, scene, measured, options);
    for (double& x : volume.albedo) x *= gain;
  }
  return volume;
}

}  // namespace nlos
