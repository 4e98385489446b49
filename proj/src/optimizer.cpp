#include "nlos/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nlos/analysis.hpp"
#include "nlos/error.hpp"
#include "nlos/gradients.hpp"

namespace nlos {

void AdamState::validate() const {
  if (first_moment.size() != second_moment.size())
    fail(ErrorCode::invariant_violation, "adam moment accumulators differ in size");
  if (step < 0) fail(ErrorCode::invariant_violation, "adam step counter must be >= 0");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0))
    fail(ErrorCode::invariant_violation, "adam betas must lie in [0, 1)");
  if (!(config.learning_rate >= 0.0) || !(config.epsilon > 0.0))
    fail(ErrorCode::invariant_violation, "adam learning rate must be >= 0 and epsilon > 0");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               std::string_view block) {
  state.validate();
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    fail(ErrorCode::dimension_mismatch, "adam block '" + std::string(block) + "': " +
                                            std::to_string(params.size()) + " parameters, " +
                                            std::to_string(grads.size()) + " gradients, " +
                                            std::to_string(state.first_moment.size()) + " moments");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) fail(ErrorCode::non_finite, "non-finite gradient in block '" + std::string(block) + "'");
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t n = 0; n < params.size(); ++n) {
    double& m = state.first_moment[n];
    double& v = state.second_moment[n];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[n];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[n] * grads[n];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[n] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

void AutocalSchedule::validate() const {
  if (total_iterations < 0 || calib_iterations < 0 || reconstruction_iterations < 0)
    fail(ErrorCode::invalid_argument, "iteration counts must be >= 0");
  if (!(scan_subsample_fraction > 0.0 && scan_subsample_fraction <= 1.0))
    fail(ErrorCode::invalid_argument, "scan_subsample_fraction must lie in (0, 1]");
  if (albedo_upper_bound && !(*albedo_upper_bound > 0.0))
    fail(ErrorCode::invalid_argument, "albedo_upper_bound must be > 0");
  AdamState(0, albedo_adam).validate();
  AdamState(0, position_adam).validate();
}

std::size_t AutocalSchedule::resolved_batch_size(std::size_t scans) const {
  std::size_t batch = batch_size;
  if (batch == 0) batch = static_cast<std::size_t>(std::ceil(scan_subsample_fraction * static_cast<double>(scans)));
  return std::clamp<std::size_t>(batch, 1, std::max<std::size_t>(scans, 1));
}

ScanSampler::ScanSampler(std::size_t scans, std::size_t batch, std::uint64_t seed)
    : batch_(batch), order_(all_scans(scans)), cursor_(scans), rng_(seed) {}

std::vector<std::size_t> ScanSampler::next() {
  if (batch_ >= order_.size()) return all_scans(order_.size());
  if (cursor_ >= order_.size()) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  const std::size_t end = std::min(order_.size(), cursor_ + batch_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  std::sort(batch.begin(), batch.end());
  return batch;
}

namespace {

std::vector<double> flatten(const std::vector<Vec3>& points) {
  std::vector<double> out;
  out.reserve(points.size() * 3);
  for (const auto& p : points) out.insert(out.end(), {p.x(), p.y(), p.z()});
  return out;
}

void unflatten(std::span<const double> flat, std::vector<Vec3>& points) {
  for (std::size_t n = 0; n < points.size(); ++n) points[n] = Vec3(flat[3 * n], flat[3 * n + 1], flat[3 * n + 2]);
}

void project_albedo(std::vector<double>& albedo, const AutocalSchedule& schedule) {
  if (schedule.nonnegativity_projection) {
    for (double& v : albedo) v = std::max(v, 0.0);
  }
  if (schedule.albedo_upper_bound) {
    for (double& v : albedo) v = std::min(v, *schedule.albedo_upper_bound);
  }
}

// Shared loop behind autocal and reconstruct_only.
class AlternatingDescent {
public:
  AlternatingDescent(const CalibrationState& cal0, const Volume& volume0, const SceneConfig& scene,
                     const TransientSet& measured, const AutocalSchedule& schedule, const ModelOptions& options,
                     const AutocalHooks& hooks)
      : cal_(cal0),
        volume_(volume0),
        scene_(scene),
        measured_(measured),
        schedule_(schedule),
        options_(options),
        hooks_(hooks),
        sampler_(cal0.scan_count(), schedule.resolved_batch_size(cal0.scan_count()), schedule.rng_seed),
        albedo_state_(volume0.size(), schedule.albedo_adam),
        scan_state_(3 * cal0.scan_count(), schedule.position_adam),
        detect_state_(3 * cal0.detection_count(), schedule.position_adam) {
    schedule.validate();
    volume0.validate();
    check_model_inputs(cal0, volume0, scene, {});
    check_measurement(cal0, scene, measured);
    if (hooks.ground_truth && hooks.ground_truth->scan_count() != cal0.scan_count())
      fail(ErrorCode::dimension_mismatch, "ground truth has a different number of scan positions");
  }

  void run(bool calibrate) {
    try {
      for (int repeat = 0; repeat < schedule_.total_iterations; ++repeat) {
        if (calibrate) {
          if (schedule_.calib_iterations > 0 && !cal_.update_mask.any())
            fail(ErrorCode::invalid_argument, "calibration updates requested with an empty update mask");
          for (int n = 0; n < schedule_.calib_iterations; ++n) calibration_step();
        }
        for (int n = 0; n < schedule_.reconstruction_iterations; ++n) reconstruction_step();
        if (iteration_ > 0) report_.snapshots.push_back({iteration_ - 1, volume_.albedo});
      }
    } catch (...) {
      finalize();
      if (hooks_.on_failure) hooks_.on_failure(report_);
      throw;
    }
    finalize();
  }

  AutocalResult result() && { return {std::move(cal_), std::move(volume_), std::move(report_)}; }

private:
  void calibration_step() {
    const auto batch = sampler_.next();
    const GradientBundle g = grad_loss(cal_, volume_, scene_, measured_, batch, options_);
    record(Phase::calibration, g.loss);

    auto scans = flatten(cal_.scan_positions);
    adam_step(scan_state_, scans, flatten(g.d_scan), "scan_positions");
    unflatten(scans, cal_.scan_positions);
    if (!schedule_.update_detections) return;
    auto detections = flatten(cal_.detection_positions);
    adam_step(detect_state_, detections, flatten(g.d_detect), "detection_positions");
    unflatten(detections, cal_.detection_positions);
  }

  void reconstruction_step() {
    const auto batch = sampler_.next();
    double value = 0.0;
    const auto d_rho = grad_rho_only(cal_, volume_, scene_, measured_, batch, options_, &value);
    record(Phase::reconstruction, value);
    adam_step(albedo_state_, volume_.albedo, d_rho, "albedo");
    project_albedo(volume_.albedo, schedule_);
  }

  void record(Phase phase, double value) {
    if (!std::isfinite(value))
      fail(ErrorCode::non_finite, "loss became non-finite at iteration " + std::to_string(iteration_));
    IterationRecord rec{iteration_++, phase, value, std::nullopt};
    if (hooks_.ground_truth) rec.scan_rmse = scan_rmse(cal_, *hooks_.ground_truth, cal_.update_mask);
    report_.records.push_back(rec);
  }

  void finalize() {
    report_.final_calibration = cal_;
    report_.final_volume = volume_;
  }

  CalibrationState cal_;
  Volume volume_;
  const SceneConfig& scene_;
  const TransientSet& measured_;
  const AutocalSchedule& schedule_;
  const ModelOptions& options_;
  const AutocalHooks& hooks_;
  ScanSampler sampler_;
  AdamState albedo_state_;
  AdamState scan_state_;
  AdamState detect_state_;
  OptimizationReport report_;
  int iteration_ = 0;
};

}  // namespace

AutocalResult autocal(const CalibrationState& cal0, const Volume& volume0, const SceneConfig& scene,
                      const TransientSet& measured, const AutocalSchedule& schedule, const ModelOptions& options,
                      const AutocalHooks& hooks) {
  AlternatingDescent loop(cal0, volume0, scene, measured, schedule, options, hooks);
  loop.run(true);
  return std::move(loop).result();
}

ReconstructionResult reconstruct_only(const CalibrationState& cal, const Volume& volume0, const SceneConfig& scene,
                                      const TransientSet& measured, const AutocalSchedule& schedule,
                                      const ModelOptions& options, const AutocalHooks& hooks) {
  AlternatingDescent loop(cal, volume0, scene, measured, schedule, options, hooks);
  loop.run(false);
  auto result = std::move(loop).result();
  return {std::move(result.volume), std::move(result.report)};
}

}  // namespace nlos
