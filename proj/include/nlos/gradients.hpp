#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlos/forward.hpp"
#include "nlos/types.hpp"

namespace nlos {

/// Analytic derivatives of the least-squares loss. Position gradients are
/// masked by the calibration's update_mask; `loss` is the value the
/// gradients were taken at.
struct GradientBundle {
  std::vector<double> d_rho;
  std::vector<Vec3> d_scan;
  std::vector<Vec3> d_detect;
  double loss = 0.0;
};

GradientBundle grad_loss(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                         const TransientSet& measured, std::span<const std::size_t> scan_subset,
                         const ModelOptions& options = {});

/// Albedo block of grad_loss, computed without the position terms. Matches
/// grad_loss(...).d_rho bit for bit. When `loss_out` is given it receives
/// the loss at the current parameters.
std::vector<double> grad_rho_only(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                                  const TransientSet& measured, std::span<const std::size_t> scan_subset,
                                  const ModelOptions& options = {}, double* loss_out = nullptr);

}  // namespace nlos
