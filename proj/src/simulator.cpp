#include "nlos/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nlos/error.hpp"

namespace nlos {

std::vector<Vec3> planar_grid(const ScanGridSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1) fail(ErrorCode::invalid_argument, "scan grid needs at least one point per side");
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(spec.nx) * spec.ny);
  for (int iy = 0; iy < spec.ny; ++iy) {
    for (int ix = 0; ix < spec.nx; ++ix) {
      const double x = ((ix + 0.5) / spec.nx - 0.5) * spec.extent_x;
      const double y = ((iy + 0.5) / spec.ny - 0.5) * spec.extent_y;
      points.push_back(spec.center + Vec3(x, y, 0.0));
    }
  }
  return points;
}

CalibrationState Setup::grid_calibration(AxisMask mask) const {
  return {planar_grid(scans), detections, mask};
}

Setup desk_setup(int scans_per_side, int voxels_per_side, int bins) {
  if (scans_per_side < 1 || voxels_per_side < 1 || bins < 1)
    fail(ErrorCode::invalid_argument, "desk setup sizes must be positive");
  Setup setup;
  SceneConfig& scene = setup.scene;
  scene.source_pos = Vec3(1.0, 0.0, 1.0);
  scene.detector_pos = Vec3(1.0, 0.0, 1.0);
  scene.bin_width = 0.03 / kSpeedOfLight;  // 3 cm of path per bin
  scene.bin_count = bins;
  scene.time_offset = 1.5 / kSpeedOfLight;
  scene.gaussian_sigma = 2.0 * scene.bin_width;

  setup.scans = ScanGridSpec{scans_per_side, scans_per_side, 1.28, 1.28, Vec3::Zero()};

  const double pitch = 1.28 / voxels_per_side;
  setup.grid.origin = Vec3(-0.64, -0.64, 0.4);
  setup.grid.pitch = Vec3::Constant(pitch);
  setup.grid.dims = {voxels_per_side, voxels_per_side, voxels_per_side};

  setup.detections = {Vec3::Zero()};
  return setup;
}

PerturbationKind parse_perturbation_kind(const std::string& text) {
  if (text == "gaussian_z") return PerturbationKind::gaussian_z;
  if (text == "gaussian_xyz") return PerturbationKind::gaussian_xyz;
  if (text == "sinusoidal_radial") return PerturbationKind::sinusoidal_radial;
  if (text == "parabolic_radial") return PerturbationKind::parabolic_radial;
  fail(ErrorCode::invalid_argument, "unknown perturbation kind '" + text + "'");
}

std::string to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::gaussian_z: return "gaussian_z";
    case PerturbationKind::gaussian_xyz: return "gaussian_xyz";
    case PerturbationKind::sinusoidal_radial: return "sinusoidal_radial";
    case PerturbationKind::parabolic_radial: return "parabolic_radial";
  }
  return "unknown";
}

void PerturbationSpec::validate() const {
  if (!(std_dev >= 0.0) || !std::isfinite(std_dev)) fail(ErrorCode::invalid_argument, "std_dev must be >= 0");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) fail(ErrorCode::invalid_argument, "amplitude must be >= 0");
  if (!(period > 0.0) || !std::isfinite(period)) fail(ErrorCode::invalid_argument, "period must be > 0");
}

Vec3 radial_direction(const SceneConfig& scene, const Vec3& scan) {
  const Vec3 v = scan - scene.source_pos;
  const double n = v.norm();
  if (n == 0.0) fail(ErrorCode::degenerate_geometry, "scan position coincides with the transmitter");
  return v / n;
}

CalibrationState perturb(const CalibrationState& cal, const PerturbationSpec& spec, const SceneConfig& scene) {
  spec.validate();
  CalibrationState out = cal;
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto jitter = [&](Vec3& p) {
    if (spec.kind == PerturbationKind::gaussian_z) {
      p.z() += spec.std_dev * normal(rng);
    } else {
      const double dx = normal(rng), dy = normal(rng), dz = normal(rng);
      p += spec.std_dev * Vec3(dx, dy, dz);
    }
  };

  switch (spec.kind) {
    case PerturbationKind::gaussian_z:
    case PerturbationKind::gaussian_xyz:
      if (spec.std_dev == 0.0) return out;
      for (auto& p : out.scan_positions) jitter(p);
      if (spec.include_detection) {
        for (auto& p : out.detection_positions) jitter(p);
      }
      return out;
    case PerturbationKind::sinusoidal_radial:
    case PerturbationKind::parabolic_radial:
      break;
  }

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : cal.scan_positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  auto normalized = [](double v, double a, double b) { return b > a ? 2.0 * (v - a) / (b - a) - 1.0 : 0.0; };
  for (std::size_t j = 0; j < out.scan_positions.size(); ++j) {
    const Vec3& p = cal.scan_positions[j];
    const double ux = normalized(p.x(), lo.x(), hi.x());
    const double uy = normalized(p.y(), lo.y(), hi.y());
    const double pattern = spec.kind == PerturbationKind::sinusoidal_radial
                               ? std::sin(2.0 * std::numbers::pi * ux / spec.period)
                               : 0.5 * (ux * ux + uy * uy);
    out.scan_positions[j] = p + spec.amplitude * pattern * radial_direction(scene, p);
  }
  return out;
}

TransientSet synthesize(const CalibrationState& cal_true, const Volume& volume_true, const SceneConfig& scene,
                        const ModelOptions& options) {
  return forward_gaussian(cal_true, volume_true, scene, all_scans(cal_true.scan_count()), options);
}

TransientSet poisson_sample(const TransientSet& clean, double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) fail(ErrorCode::invalid_argument, "poisson scale must be > 0");
  TransientSet out = clean;
  std::mt19937_64 rng(seed);
  for (double& v : out.data) {
    const double mean = std::max(v, 0.0) * scale;
    v = mean > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(mean)(rng)) / scale : 0.0;
  }
  return out;
}

ScenarioData scenario(int name, const CalibrationState& grid_cal, const Volume& volume_true,
                      const SceneConfig& scene, double noise_std, std::uint64_t seed, const ModelOptions& options) {
  // Scenarios 1 and 3 perturb the scan grid only; scenario 2 also moves the
  // detection point in the truth.
  PerturbationSpec spec;
  spec.std_dev = noise_std;
  spec.rng_seed = seed;
  spec.include_detection = name == 2;
  ScenarioData data;
  switch (name) {
    case 1:
      spec.kind = PerturbationKind::gaussian_z;
      data.truth = grid_cal;
      data.estimate = perturb(grid_cal, spec, scene);
      break;
    case 2:
      spec.kind = PerturbationKind::gaussian_z;
      data.truth = perturb(grid_cal, spec, scene);
      data.estimate = grid_cal;
      break;
    case 3:
      spec.kind = PerturbationKind::gaussian_xyz;
      data.truth = grid_cal;
      data.estimate = perturb(grid_cal, spec, scene);
      break;
    default:
      fail(ErrorCode::invalid_argument, "scenario must be 1, 2 or 3, got " + std::to_string(name));
  }
  data.measured = synthesize(data.truth, volume_true, scene, options);
  return data;
}

Phantom parse_phantom(const std::string& text) {
  if (text == "single_voxel") return Phantom::single_voxel;
  if (text == "hemisphere") return Phantom::hemisphere;
  if (text == "plane") return Phantom::plane;
  if (text == "sigma_glyph") return Phantom::sigma_glyph;
  fail(ErrorCode::invalid_argument, "unknown phantom '" + text + "'");
}

std::string to_string(Phantom phantom) {
  switch (phantom) {
    case Phantom::single_voxel: return "single_voxel";
    case Phantom::hemisphere: return "hemisphere";
    case Phantom::plane: return "plane";
    case Phantom::sigma_glyph: return "sigma_glyph";
  }
  return "unknown";
}

namespace {

int nearest_index(double coord, double origin, double pitch, int count) {
  const int idx = static_cast<int>(std::floor((coord - origin) / pitch));
  return std::clamp(idx, 0, count - 1);
}

double distance_to_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Volume make_phantom(Phantom phantom, const VolumeGrid& grid, const PhantomOptions& options) {
  grid.validate();
  Volume volume(grid);
  const Vec3 anchor(options.center_x, options.center_y, options.depth);
  const int slice = nearest_index(options.depth, grid.origin.z(), grid.pitch.z(), grid.dims[2]);

  switch (phantom) {
    case Phantom::single_voxel: {
      const int ix = nearest_index(anchor.x(), grid.origin.x(), grid.pitch.x(), grid.dims[0]);
      const int iy = nearest_index(anchor.y(), grid.origin.y(), grid.pitch.y(), grid.dims[1]);
      volume.albedo[grid.flat_index(ix, iy, slice)] = 1.0;
      break;
    }
    case Phantom::hemisphere:
      for (std::size_t i = 0; i < volume.size(); ++i) {
        const Vec3 o = voxel_center(grid, i);
        if ((o - anchor).norm() <= options.radius && o.z() <= anchor.z()) volume.albedo[i] = 1.0;
      }
      break;
    case Phantom::plane:
      for (int iy = 0; iy < grid.dims[1]; ++iy) {
        for (int ix = 0; ix < grid.dims[0]; ++ix) {
          const Vec3 o = voxel_center(grid, grid.flat_index(ix, iy, slice));
          if (std::abs(o.x() - anchor.x()) <= options.radius && std::abs(o.y() - anchor.y()) <= options.radius)
            volume.albedo[grid.flat_index(ix, iy, slice)] = 1.0;
        }
      }
      break;
    case Phantom::sigma_glyph: {
      // Top bar, diagonal in to the middle, diagonal out, bottom bar.
      const double w = options.radius, h = options.radius;
      const double cx = anchor.x(), cy = anchor.y();
      const double path[5][2] = {{cx + w, cy + h}, {cx - w, cy + h}, {cx + 0.2 * w, cy}, {cx - w, cy - h},
                                 {cx + w, cy - h}};
      const double stroke = 0.6 * std::max(grid.pitch.x(), grid.pitch.y());
      for (int iy = 0; iy < grid.dims[1]; ++iy) {
        for (int ix = 0; ix < grid.dims[0]; ++ix) {
          const std::size_t flat = grid.flat_index(ix, iy, slice);
          const Vec3 o = voxel_center(grid, flat);
          for (int s = 0; s < 4; ++s) {
            if (distance_to_segment(o.x(), o.y(), path[s][0], path[s][1], path[s + 1][0], path[s + 1][1]) <= stroke) {
              volume.albedo[flat] = 1.0;
              break;
            }
          }
        }
      }
      break;
    }
  }
  return volume;
}

}  // namespace nlos
