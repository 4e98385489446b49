#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "nlos/forward.hpp"
#include "nlos/types.hpp"

namespace nlos {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter block.
struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg)
      : config(cfg), first_moment(size, 0.0), second_moment(size, 0.0) {}

  void validate() const;
};

/// One bias-corrected Adam update of `params` in place. `block` names the
/// parameter block in error messages.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               std::string_view block);

struct AutocalSchedule {
  int total_iterations = 4;           // outer repeats
  int calib_iterations = 20;          // per repeat
  int reconstruction_iterations = 20; // per repeat
  double scan_subsample_fraction = 0.1;
  std::size_t batch_size = 0;         // 0: ceil(fraction * scans), at least 1
  std::uint64_t rng_seed = 0;
  bool nonnegativity_projection = false;
  std::optional<double> albedo_upper_bound;
  bool update_detections = true;      // false: calibration moves scan points only
  AdamConfig albedo_adam;
  AdamConfig position_adam;

  void validate() const;
  std::size_t resolved_batch_size(std::size_t scans) const;
};

/// Draws scan batches without replacement, reshuffling once the scan set is
/// exhausted. The last batch of an epoch may be short. Batches are sorted.
class ScanSampler {
public:
  ScanSampler(std::size_t scans, std::size_t batch, std::uint64_t seed);

  std::vector<std::size_t> next();

private:
  std::size_t batch_;
  std::vector<std::size_t> order_;
  std::size_t cursor_;
  std::mt19937_64 rng_;
};

struct AutocalHooks {
  /// When set, each record carries the scan RMSE (over update_mask axes)
  /// against these positions.
  const CalibrationState* ground_truth = nullptr;
  /// Receives the partial report before an exception propagates.
  std::function<void(const OptimizationReport&)> on_failure;
};

struct AutocalResult {
  CalibrationState calibration;
  Volume volume;
  OptimizationReport report;
};

/// Alternating calibration / reconstruction descent: every outer repeat runs
/// calib_iterations Adam steps on scan and detection positions followed by
/// reconstruction_iterations Adam steps on the albedo.
AutocalResult autocal(const CalibrationState& cal0, const Volume& volume0, const SceneConfig& scene,
                      const TransientSet& measured, const AutocalSchedule& schedule,
                      const ModelOptions& options = {}, const AutocalHooks& hooks = {});

struct ReconstructionResult {
  Volume volume;
  OptimizationReport report;
};

/// Albedo-only descent with calibration held fixed:
/// total_iterations * reconstruction_iterations steps.
ReconstructionResult reconstruct_only(const CalibrationState& cal, const Volume& volume0, const SceneConfig& scene,
                                      const TransientSet& measured, const AutocalSchedule& schedule,
                                      const ModelOptions& options = {}, const AutocalHooks& hooks = {});

}  // namespace nlos
