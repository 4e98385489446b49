#pragma once

#include <vector>

#include "nlos/forward.hpp"
#include "nlos/types.hpp"

namespace nlos {

/// Time-gated backprojection: every voxel sums, over all (scan, detection)
/// pairs, the sample of the bin its path length maps to, weighted by
/// |l - o|^2 |s - o|^2 to undo the falloff. Bins outside the record add 0.
Volume backproject(const CalibrationState& cal, const SceneConfig& scene, const TransientSet& measured,
                   const VolumeGrid& grid, const ModelOptions& options = {});

/// Zero-mean Gaussian-windowed cosine with period `center_wavelength` (as a
/// path length), sampled at the scene's bin spacing. The envelope standard
/// deviation is cycles / 4 periods.
std::vector<double> bandpass_kernel(const SceneConfig& scene, double center_wavelength, double cycles);

/// Convolves every histogram with bandpass_kernel, replicating edge samples.
TransientSet bandpass_filter(const TransientSet& measured, const SceneConfig& scene, double center_wavelength,
                             double cycles);

/// Least-squares gain a minimising |a F(v) - m|^2 over all scans.
double fit_albedo_scale(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                        const TransientSet& measured, const ModelOptions& options = {});

struct InitOptions {
  bool zero = false;  // all-zero start; the other fields are ignored
  bool filtered = false;
  double wavelength = 0.0;  // <= 0: 8 bin lengths
  double cycles = 4.0;
  bool fit_scale = true;
};

/// Starting albedo for the descent: zeros, or (optionally band-passed) backprojection,
/// magnitude taken when filtered, negatives clamped to 0, then rescaled so
/// its forward projection best matches the measurement.
Volume initial_volume(const CalibrationState& cal, const SceneConfig& scene, const TransientSet& measured,
                      const VolumeGrid& grid, const InitOptions& init = {}, const ModelOptions& options = {});

}  // namespace nlos
