#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nlos/forward.hpp"
#include "nlos/initializer.hpp"
#include "nlos/optimizer.hpp"
#include "nlos/simulator.hpp"
#include "nlos/types.hpp"

namespace nlos {

/// sqrt(mean over scans of |masked(est - truth)|^2).
double scan_rmse(const CalibrationState& estimate, const CalibrationState& truth, AxisMask axes);

/// RMSE of the scan errors projected on each true point's radial
/// (transmitter -> scan) direction.
double radial_rmse(const CalibrationState& estimate, const CalibrationState& truth, const SceneConfig& scene);

/// Zero-mean normalized cross-correlation (Pearson coefficient). Returns 0
/// when either input is constant.
double normalized_cross_correlation(std::span<const double> a, std::span<const double> b);

/// Fraction of total |albedo| on the outermost voxel shell.
double boundary_energy(const Volume& volume);

struct ProfilePoint {
  double delta;     // radial displacement, meters; positive is away from the transmitter
  double gradient;  // dL/dl projected on the radial direction
};

/// Moves one scan point radially by each delta (everything else at truth,
/// measurement synthesized from truth) and reports the projected gradient.
std::vector<ProfilePoint> recoverability_profile(const SceneConfig& scene, const CalibrationState& cal_true,
                                                 const Volume& volume_true, std::size_t scan_index,
                                                 std::span<const double> deltas, const ModelOptions& options = {});

struct RecoveryMap {
  int cols = 0;  // scan grid nx
  int rows = 0;  // scan grid ny
  std::vector<Vec3> positions;
  std::vector<double> range;  // per scan, x-fastest

  double mean_range(bool right_half) const;
};

/// Per scan point, the largest |delta| for which both +|delta| and -|delta|
/// still produce a restoring gradient. The magnitudes of `delta_grid` are
/// walked upward; the first failure is refined by bisection down to
/// `resolution`.
RecoveryMap recoverability_heatmap(const SceneConfig& scene, const CalibrationState& cal_true,
                                   const Volume& volume_true, int cols, int rows,
                                   std::span<const double> delta_grid, const ModelOptions& options = {},
                                   double resolution = 0.002);

enum class Reconstructor { backprojection, gradient, autocal };

struct SweepConfig {
  Reconstructor reconstructor = Reconstructor::gradient;
  AutocalSchedule schedule;
  InitOptions init;
  std::vector<std::uint64_t> seeds{0};
};

struct SensitivityRow {
  double std_dev = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double correlation = 0.0;
};

/// For each std and seed: scenario-1 miscalibration, the start volume from
/// `init` (always a backprojection for the backprojection reconstructor),
/// then the chosen reconstructor. Loss is over all scans at the final
/// estimate; correlation is against the true volume.
std::vector<SensitivityRow> noise_sensitivity_sweep(const SceneConfig& scene, const CalibrationState& grid_cal,
                                                    const Volume& volume_true, std::span<const double> stds,
                                                    const SweepConfig& config, const ModelOptions& options = {});

struct PatternResult {
  double initial_rmse = 0.0;
  double final_rmse = 0.0;
  OptimizationReport report;
};

/// Applies a radial pattern perturbation to the estimate, runs autocal from
/// the start volume from `init` and returns radial RMSE before and after.
PatternResult pattern_recovery_test(const SceneConfig& scene, const CalibrationState& cal_true,
                                    const Volume& volume_true, const PerturbationSpec& spec,
                                    const AutocalSchedule& schedule, const InitOptions& init = {},
                                    const ModelOptions& options = {});

// CSV writers; headers are documented in the README.
void write_rmse_csv(std::ostream& out, const OptimizationReport& report);
void write_recoverability_csv(std::ostream& out, std::span<const ProfilePoint> profile);
void write_heatmap_csv(std::ostream& out, const RecoveryMap& map);
void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityRow> rows);

}  // namespace nlos
