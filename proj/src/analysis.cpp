#include "nlos/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "nlos/error.hpp"
#include "nlos/gradients.hpp"

namespace nlos {

double scan_rmse(const CalibrationState& estimate, const CalibrationState& truth, AxisMask axes) {
  if (estimate.scan_count() != truth.scan_count()) {
    fail(ErrorCode::dimension_mismatch, "scan_rmse: " + std::to_string(estimate.scan_count()) + " vs " +
                                            std::to_string(truth.scan_count()) + " scan positions");
  }
  if (estimate.scan_count() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < estimate.scan_count(); ++j) {
    sum += axes.apply(estimate.scan_positions[j] - truth.scan_positions[j]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(estimate.scan_count()));
}

double radial_rmse(const CalibrationState& estimate, const CalibrationState& truth, const SceneConfig& scene) {
  if (estimate.scan_count() != truth.scan_count())
    fail(ErrorCode::dimension_mismatch, "radial_rmse: scan counts differ");
  if (estimate.scan_count() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < estimate.scan_count(); ++j) {
    const double along = (estimate.scan_positions[j] - truth.scan_positions[j])
                             .dot(radial_direction(scene, truth.scan_positions[j]));
    sum += along * along;
  }
  return std::sqrt(sum / static_cast<double>(estimate.scan_count()));
}

double normalized_cross_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::dimension_mismatch, "correlation inputs differ in length");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cross = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a, db = b[i] - mean_b;
    cross += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return 0.0;
  return cross / std::sqrt(var_a * var_b);
}

double boundary_energy(const Volume& volume) {
  const auto& d = volume.grid.dims;
  double shell = 0.0, total = 0.0;
  for (std::size_t i = 0; i < volume.size(); ++i) {
    const auto idx = volume.grid.unflatten(i);
    const double v = std::abs(volume.albedo[i]);
    total += v;
    bool outer = false;
    for (int a = 0; a < 3; ++a) outer = outer || idx[a] == 0 || idx[a] == d[a] - 1;
    if (outer) shell += v;
  }
  return total > 0.0 ? shell / total : 0.0;
}

namespace {

// Measurement of a single scan row embedded in a full-size TransientSet.
TransientSet single_row_measurement(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                                    std::size_t scan, const ModelOptions& options) {
  const std::size_t subset[] = {scan};
  const TransientSet row = forward_gaussian(cal, volume, scene, subset, options);
  TransientSet full(cal.scan_count(), cal.detection_count(), static_cast<std::size_t>(scene.bin_count));
  for (std::size_t m = 0; m < cal.detection_count(); ++m) {
    std::copy(row.histogram(0, m).begin(), row.histogram(0, m).end(), full.histogram(scan, m).begin());
  }
  return full;
}

class RadialProbe {
public:
  RadialProbe(const SceneConfig& scene, const CalibrationState& cal_true, const Volume& volume_true,
              const TransientSet& measured, std::size_t scan, const ModelOptions& options)
      : scene_(scene), cal_(cal_true), volume_(volume_true), measured_(measured), scan_(scan),
        options_(options), origin_(cal_true.scan_positions.at(scan)),
        direction_(radial_direction(scene, origin_)) {
    cal_.update_mask = AxisMask::all();
  }

  double operator()(double delta) {
    cal_.scan_positions[scan_] = origin_ + delta * direction_;
    const std::size_t subset[] = {scan_};
    const GradientBundle g = grad_loss(cal_, volume_, scene_, measured_, subset, options_);
    return g.d_scan[scan_].dot(direction_);
  }

  bool restoring(double magnitude) {
    return (*this)(magnitude) > 0.0 && (*this)(-magnitude) < 0.0;
  }

private:
  const SceneConfig& scene_;
  CalibrationState cal_;
  const Volume& volume_;
  const TransientSet& measured_;
  std::size_t scan_;
  const ModelOptions& options_;
  Vec3 origin_;
  Vec3 direction_;
};

}  // namespace

std::vector<ProfilePoint> recoverability_profile(const SceneConfig& scene, const CalibrationState& cal_true,
                                                 const Volume& volume_true, std::size_t scan_index,
                                                 std::span<const double> deltas, const ModelOptions& options) {
  if (scan_index >= cal_true.scan_count()) fail(ErrorCode::out_of_range, "scan index outside calibration");
  for (double d : deltas) {
    if (!std::isfinite(d)) fail(ErrorCode::invalid_argument, "profile deltas must be finite");
  }
  const TransientSet measured = single_row_measurement(cal_true, volume_true, scene, scan_index, options);
  RadialProbe probe(scene, cal_true, volume_true, measured, scan_index, options);
  std::vector<ProfilePoint> profile;
  profile.reserve(deltas.size());
  for (double d : deltas) profile.push_back({d, probe(d)});
  return profile;
}

double RecoveryMap::mean_range(bool right_half) const {
  double sum = 0.0;
  int count = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const bool right = 2 * c >= cols;
      if (right != right_half) continue;
      sum += range[static_cast<std::size_t>(r * cols + c)];
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

RecoveryMap recoverability_heatmap(const SceneConfig& scene, const CalibrationState& cal_true,
                                   const Volume& volume_true, int cols, int rows,
                                   std::span<const double> delta_grid, const ModelOptions& options,
                                   double resolution) {
  if (cols < 1 || rows < 1 || static_cast<std::size_t>(cols) * rows != cal_true.scan_count())
    fail(ErrorCode::dimension_mismatch, "heatmap grid shape does not match the scan count");
  if (!(resolution > 0.0)) fail(ErrorCode::invalid_argument, "heatmap resolution must be > 0");

  std::vector<double> magnitudes;
  for (double d : delta_grid) {
    if (!std::isfinite(d)) fail(ErrorCode::invalid_argument, "delta grid must be finite");
    if (d != 0.0) magnitudes.push_back(std::abs(d));
  }
  std::sort(magnitudes.begin(), magnitudes.end());
  magnitudes.erase(std::unique(magnitudes.begin(), magnitudes.end()), magnitudes.end());

  RecoveryMap map;
  map.cols = cols;
  map.rows = rows;
  map.positions = cal_true.scan_positions;
  map.range.assign(cal_true.scan_count(), 0.0);
  if (magnitudes.empty()) return map;

  const TransientSet measured = synthesize(cal_true, volume_true, scene, options);
  for (std::size_t j = 0; j < cal_true.scan_count(); ++j) {
    RadialProbe probe(scene, cal_true, volume_true, measured, j, options);
    double good = 0.0;
    double bad = -1.0;
    for (double m : magnitudes) {
      if (!probe.restoring(m)) {
        bad = m;
        break;
      }
      good = m;
    }
    if (bad > 0.0) {
      while (bad - good > resolution) {
        const double mid = 0.5 * (good + bad);
        (probe.restoring(mid) ? good : bad) = mid;
      }
    }
    map.range[j] = good;
  }
  return map;
}

std::vector<SensitivityRow> noise_sensitivity_sweep(const SceneConfig& scene, const CalibrationState& grid_cal,
                                                    const Volume& volume_true, std::span<const double> stds,
                                                    const SweepConfig& config, const ModelOptions& options) {
  std::vector<SensitivityRow> rows;
  const auto scans = all_scans(grid_cal.scan_count());
  for (double std_dev : stds) {
    for (std::uint64_t seed : config.seeds) {
      const ScenarioData data = scenario(1, grid_cal, volume_true, scene, std_dev, seed, options);
      InitOptions init = config.init;
      if (config.reconstructor == Reconstructor::backprojection) init.zero = false;
      const Volume start = initial_volume(data.estimate, scene, data.measured, volume_true.grid, init, options);
      CalibrationState cal = data.estimate;
      Volume recovered = start;
      switch (config.reconstructor) {
        case Reconstructor::backprojection:
          break;
        case Reconstructor::gradient:
          recovered = reconstruct_only(cal, start, scene, data.measured, config.schedule, options).volume;
          break;
        case Reconstructor::autocal: {
          auto result = autocal(cal, start, scene, data.measured, config.schedule, options);
          cal = std::move(result.calibration);
          recovered = std::move(result.volume);
          break;
        }
      }
      rows.push_back({std_dev, seed, loss(cal, recovered, scene, data.measured, scans, options),
                      normalized_cross_correlation(recovered.albedo, volume_true.albedo)});
    }
  }
  return rows;
}

PatternResult pattern_recovery_test(const SceneConfig& scene, const CalibrationState& cal_true,
                                    const Volume& volume_true, const PerturbationSpec& spec,
                                    const AutocalSchedule& schedule, const InitOptions& init,
                                    const ModelOptions& options) {
  const CalibrationState estimate = perturb(cal_true, spec, scene);
  const TransientSet measured = synthesize(cal_true, volume_true, scene, options);
  const Volume start = initial_volume(estimate, scene, measured, volume_true.grid, init, options);
  AutocalHooks hooks;
  hooks.ground_truth = &cal_true;
  auto result = autocal(estimate, start, scene, measured, schedule, options, hooks);
  PatternResult out;
  out.initial_rmse = radial_rmse(estimate, cal_true, scene);
  out.final_rmse = radial_rmse(result.calibration, cal_true, scene);
  out.report = std::move(result.report);
  return out;
}

namespace {

struct CsvPrecision {
  explicit CsvPrecision(std::ostream& out) : out_(out), flags_(out.flags()), precision_(out.precision()) {
    out_ << std::setprecision(12);
  }
  ~CsvPrecision() {
    out_.flags(flags_);
    out_.precision(precision_);
  }
  std::ostream& out_;
  std::ios::fmtflags flags_;
  std::streamsize precision_;
};

}  // namespace

void write_rmse_csv(std::ostream& out, const OptimizationReport& report) {
  CsvPrecision guard(out);
  out << "iteration,phase,loss,scan_rmse_m\n";
  for (const auto& r : report.records) {
    out << r.iteration << ',' << to_string(r.phase) << ',' << r.loss << ',';
    if (r.scan_rmse) out << *r.scan_rmse;
    out << '\n';
  }
}

void write_recoverability_csv(std::ostream& out, std::span<const ProfilePoint> profile) {
  CsvPrecision guard(out);
  out << "delta_m,projected_gradient\n";
  for (const auto& p : profile) out << p.delta << ',' << p.gradient << '\n';
}

void write_heatmap_csv(std::ostream& out, const RecoveryMap& map) {
  CsvPrecision guard(out);
  out << "row,col,x_m,y_m,recovery_range_m\n";
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const auto j = static_cast<std::size_t>(r * map.cols + c);
      out << r << ',' << c << ',' << map.positions[j].x() << ',' << map.positions[j].y() << ',' << map.range[j]
          << '\n';
    }
  }
}

void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityRow> rows) {
  CsvPrecision guard(out);
  out << "std_m,seed,final_loss,correlation\n";
  for (const auto& r : rows) out << r.std_dev << ',' << r.seed << ',' << r.final_loss << ',' << r.correlation << '\n';
}

}  // namespace nlos
