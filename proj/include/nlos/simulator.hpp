#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlos/forward.hpp"
#include "nlos/types.hpp"

namespace nlos {

/// Planar nx x ny grid of scan points on a wall parallel to the xy plane,
/// at cell centers, ordered x-fastest.
struct ScanGridSpec {
  int nx = 16;
  int ny = 16;
  double extent_x = 1.28;
  double extent_y = 1.28;
  Vec3 center = Vec3::Zero();
};

std::vector<Vec3> planar_grid(const ScanGridSpec& spec);

/// A complete simulated apparatus: instrument, wall grid and hidden volume.
struct Setup {
  SceneConfig scene;
  ScanGridSpec scans;
  VolumeGrid grid;
  std::vector<Vec3> detections;

  /// Calibration with the planar scan grid and the given update mask.
  CalibrationState grid_calibration(AxisMask mask = AxisMask::z_only()) const;
};

/// Desk-scale apparatus: 1.28 m wall scanned by scans_per_side^2 points, a
/// 1.28 m cube of voxels_per_side^3 voxels starting 0.4 m in front of it,
/// instrument at (1, 0, 1) to the right (+x) of the scan array, one
/// detection point at the wall center. Bins are 3 cm of path, sigma is two
/// bins, and the window opens at 1.5 m.
Setup desk_setup(int scans_per_side = 16, int voxels_per_side = 16, int bins = 512);

enum class PerturbationKind { gaussian_z, gaussian_xyz, sinusoidal_radial, parabolic_radial };

PerturbationKind parse_perturbation_kind(const std::string& text);
std::string to_string(PerturbationKind kind);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::gaussian_z;
  double std_dev = 0.0;    // gaussian kinds, meters
  double amplitude = 0.0;  // pattern kinds, meters
  double period = 2.0;     // pattern kinds, in normalized grid units (the array spans [-1, 1])
  std::uint64_t rng_seed = 0;
  bool include_detection = true;  // gaussian kinds also move detection points

  void validate() const;
};

/// Unit vector from the transmitter through a scan point.
Vec3 radial_direction(const SceneConfig& scene, const Vec3& scan);

/// Gaussian kinds add iid noise (z only or all axes). Pattern kinds move each
/// scan point along its radial direction by amplitude * pattern(u), where u
/// is the point's normalized position in the scan array's bounding box:
/// sinusoidal sin(2 pi u_x / period), parabolic (u_x^2 + u_y^2) / 2.
CalibrationState perturb(const CalibrationState& cal, const PerturbationSpec& spec, const SceneConfig& scene);

/// Noise-free measurement: forward_gaussian over all scans.
TransientSet synthesize(const CalibrationState& cal_true, const Volume& volume_true, const SceneConfig& scene,
                        const ModelOptions& options = {});

/// Replaces every sample by a Poisson draw with mean scale * value
/// (negative values clamp to 0), divided back by scale.
TransientSet poisson_sample(const TransientSet& clean, double scale, std::uint64_t seed);

struct ScenarioData {
  TransientSet measured;
  CalibrationState estimate;
  CalibrationState truth;
};

/// Miscalibration scenarios on a planar grid calibration:
///  1: truth = grid, estimate = grid + z noise on scan points
///  2: truth = grid + z noise on scan and detection points, estimate = grid
///  3: truth = grid, estimate = grid + xyz noise on scan points
ScenarioData scenario(int name, const CalibrationState& grid_cal, const Volume& volume_true,
                      const SceneConfig& scene, double noise_std, std::uint64_t seed,
                      const ModelOptions& options = {});

enum class Phantom { single_voxel, hemisphere, plane, sigma_glyph };

Phantom parse_phantom(const std::string& text);
std::string to_string(Phantom phantom);

struct PhantomOptions {
  double depth = 1.0;   // z of the phantom's reference plane
  double radius = 0.32; // half-ball radius; half-size of plane and glyph
  double center_x = 0.0;
  double center_y = 0.0;
};

/// single_voxel: the voxel nearest (center_x, center_y, depth).
/// hemisphere: voxels inside the half-ball of `radius` centred there, on the
///   side facing the wall (z <= depth).
/// plane: a square patch on the one z-slice nearest depth.
/// sigma_glyph: a rasterized Sigma-shaped polyline on that slice.
Volume make_phantom(Phantom phantom, const VolumeGrid& grid, const PhantomOptions& options = {});

}  // namespace nlos
