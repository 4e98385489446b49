#pragma once

// Shared domain types for the transient forward model and the calibration
// loop. Lengths are meters, times are seconds.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nlos {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Which axes of a position may move during calibration updates.
struct AxisMask {
  bool x = true;
  bool y = true;
  bool z = true;

  static AxisMask all() { return {true, true, true}; }
  static AxisMask z_only() { return {false, false, true}; }

  /// Accepts axis letters ("z", "xz", "xyz") or a three-digit bitmask in
  /// z,y,x order ("100" is z only).
  static AxisMask parse(const std::string& text);
  std::string to_string() const;

  bool any() const { return x || y || z; }
  bool operator==(const AxisMask&) const = default;

  /// Zeroes the disabled components.
  Vec3 apply(const Vec3& v) const { return {x ? v.x() : 0.0, y ? v.y() : 0.0, z ? v.z() : 0.0}; }
};

/// Where inside a bin the nominal arrival time is taken.
enum class BinTime {
  center,     // t_k = (k + 0.5) dt + t0
  left_edge,  // t_k = k dt + t0, the literal "c dt k" form
};

struct SceneConfig {
  Vec3 source_pos = Vec3::Zero();
  Vec3 detector_pos = Vec3::Zero();
  double bin_width = 0.0;
  int bin_count = 0;
  double time_offset = 0.0;
  double gaussian_sigma = 0.0;  // seconds
  double speed_of_light = kSpeedOfLight;
  BinTime bin_time = BinTime::center;

  void validate() const;

  double bin_length() const { return speed_of_light * bin_width; }
  double sigma_length() const { return speed_of_light * gaussian_sigma; }
  double bin_phase() const { return bin_time == BinTime::center ? 0.5 : 0.0; }

  /// Path length matching the nominal arrival time of bin k.
  double bin_path_length(int k) const {
    return speed_of_light * (time_offset + (k + bin_phase()) * bin_width);
  }

  /// Fractional bin coordinate of a path length: the value x with
  /// bin_path_length(x) == path.
  double path_to_bin(double path) const {
    return (path - speed_of_light * time_offset) / bin_length() - bin_phase();
  }

  bool operator==(const SceneConfig&) const = default;
};

struct CalibrationState {
  std::vector<Vec3> scan_positions;
  std::vector<Vec3> detection_positions;
  AxisMask update_mask = AxisMask::z_only();

  std::size_t scan_count() const { return scan_positions.size(); }
  std::size_t detection_count() const { return detection_positions.size(); }

  void validate() const;
  bool operator==(const CalibrationState&) const = default;
};

/// Axis-aligned voxel grid without albedo values.
struct VolumeGrid {
  Vec3 origin = Vec3::Zero();
  Vec3 pitch = Vec3::Ones();
  std::array<int, 3> dims{1, 1, 1};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t flat_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * dims[1] + iy) * dims[0] + ix;
  }
  std::array<int, 3> unflatten(std::size_t flat) const;

  void validate() const;
  bool operator==(const VolumeGrid&) const = default;
};

/// Center of voxel `flat_index` (x-fastest ordering).
Vec3 voxel_center(const VolumeGrid& grid, std::size_t flat_index);

struct Volume {
  VolumeGrid grid;
  std::vector<double> albedo;  // x-fastest, length grid.voxel_count()

  Volume() = default;
  explicit Volume(VolumeGrid g) : grid(g), albedo(g.voxel_count(), 0.0) {}
  Volume(VolumeGrid g, std::vector<double> values) : grid(g), albedo(std::move(values)) {}

  std::size_t size() const { return albedo.size(); }
  void validate() const;
  bool operator==(const Volume&) const = default;
};

/// Histograms indexed [scan][detection][bin].
struct TransientSet {
  std::size_t scan_count = 0;
  std::size_t detection_count = 0;
  std::size_t bin_count = 0;
  std::vector<double> data;

  TransientSet() = default;
  TransientSet(std::size_t scans, std::size_t detections, std::size_t bins)
      : scan_count(scans), detection_count(detections), bin_count(bins),
        data(scans * detections * bins, 0.0) {}

  std::size_t offset(std::size_t scan, std::size_t detection) const {
    return (scan * detection_count + detection) * bin_count;
  }
  double& at(std::size_t scan, std::size_t detection, std::size_t bin) {
    return data[offset(scan, detection) + bin];
  }
  double at(std::size_t scan, std::size_t detection, std::size_t bin) const {
    return data[offset(scan, detection) + bin];
  }
  std::span<double> histogram(std::size_t scan, std::size_t detection) {
    return {data.data() + offset(scan, detection), bin_count};
  }
  std::span<const double> histogram(std::size_t scan, std::size_t detection) const {
    return {data.data() + offset(scan, detection), bin_count};
  }

  void validate() const;
  bool operator==(const TransientSet&) const = default;
};

enum class Phase { calibration, reconstruction };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

struct IterationRecord {
  int iteration = 0;
  Phase phase = Phase::reconstruction;
  double loss = 0.0;
  std::optional<double> scan_rmse;

  bool operator==(const IterationRecord&) const = default;
};

struct VolumeSnapshot {
  int iteration = 0;
  std::vector<double> albedo;

  bool operator==(const VolumeSnapshot&) const = default;
};

struct OptimizationReport {
  std::vector<IterationRecord> records;
  std::vector<VolumeSnapshot> snapshots;
  CalibrationState final_calibration;
  Volume final_volume;
  std::map<std::string, std::string> parameters;  // run provenance

  void validate() const;
  bool operator==(const OptimizationReport&) const = default;
};

/// Total three-bounce path: source -> scan -> voxel -> detection -> detector.
double total_path_length(const Vec3& scan, const Vec3& detection, const Vec3& voxel,
                         const SceneConfig& scene);

/// Indices 0..scan_count-1.
std::vector<std::size_t> all_scans(std::size_t scan_count);

}  // namespace nlos
