#include "nlos/gradients.hpp"

#include <vector>

#include "model_kernel.hpp"
#include "nlos/parallel.hpp"

namespace nlos {
namespace {

struct Partial {
  std::vector<double> d_rho;
  std::vector<Vec3> d_scan;
  std::vector<Vec3> d_detect;
  double loss = 0.0;

  Partial(std::size_t voxels, std::size_t scans, std::size_t detections, bool positions)
      : d_rho(voxels, 0.0),
        d_scan(positions ? scans : 0, Vec3::Zero()),
        d_detect(positions ? detections : 0, Vec3::Zero()) {}

  void add(const Partial& other) {
    for (std::size_t i = 0; i < d_rho.size(); ++i) d_rho[i] += other.d_rho[i];
    for (std::size_t j = 0; j < d_scan.size(); ++j) d_scan[j] += other.d_scan[j];
    for (std::size_t m = 0; m < d_detect.size(); ++m) d_detect[m] += other.d_detect[m];
    loss += other.loss;
  }
};

Vec3 unit_or_zero(const Vec3& v, double length, double eps) {
  return length < eps ? Vec3::Zero() : Vec3(v / length);
}

// Adjoint sweep for one (scan, detection) pair, given its residual histogram.
void adjoint_pair(const detail::ModelContext& ctx, const detail::PairGeometry& pair, const SceneConfig& scene,
                  std::span<const double> albedo, std::span<const double> residual, bool positions,
                  Partial& acc) {
  const double eps = ctx.options.min_distance;
  const Vec3 source_dir = unit_or_zero(pair.scan - scene.source_pos, pair.source_leg, eps);
  const Vec3 detector_dir = unit_or_zero(pair.detection - scene.detector_pos, pair.detector_leg, eps);
  Vec3 d_scan = Vec3::Zero();
  Vec3 d_detect = Vec3::Zero();

  for (std::size_t i = 0; i < ctx.centers.size(); ++i) {
    const Vec3& o = ctx.centers[i];
    const Vec3 to_scan = pair.scan - o;
    const Vec3 to_detection = pair.detection - o;
    const double a = to_scan.norm();
    const double b = to_detection.norm();
    const double path = (a + pair.source_leg) + (b + pair.detector_leg);
    int k0 = 0, k1 = -1;
    if (!ctx.window(path, k0, k1)) continue;

    // s0 = sum r g, s1 = sum r g u with u the path residual of each bin.
    double s0 = 0.0;
    double s1 = 0.0;
    for (int k = k0; k <= k1; ++k) {
      const double u = ctx.bin_paths[k] - path;
      const double rg = residual[k] * ctx.kernel(u);
      s0 += rg;
      s1 += rg * u;
    }
    const double falloff = 1.0 / ((a * a) * (b * b));
    acc.d_rho[i] += 2.0 * falloff * s0;

    const double rho = albedo[i];
    if (!positions || rho == 0.0) continue;
    const double timing = 2.0 * ctx.inv_sigma2 * s1 * falloff;
    // d(path)/dl = (l - o)/a + (l - i)/|l - i|, d(falloff)/dl = -2 falloff (l - o)/a^2.
    d_scan += 2.0 * rho * (timing * (to_scan / a + source_dir) - 2.0 * s0 * falloff * to_scan / (a * a));
    d_detect += 2.0 * rho *
                (timing * (to_detection / b + detector_dir) - 2.0 * s0 * falloff * to_detection / (b * b));
  }
  if (positions) {
    acc.d_scan[pair.scan_index] += d_scan;
    acc.d_detect[pair.detection_index] += d_detect;
  }
}

Partial evaluate(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                 const TransientSet& measured, std::span<const std::size_t> scan_subset,
                 const ModelOptions& options, bool positions) {
  check_model_inputs(cal, volume, scene, scan_subset);
  check_measurement(cal, scene, measured);
  const detail::ModelContext ctx(volume, scene, options);
  const ForwardWorkspace legs(cal, scene);
  const std::size_t detections = cal.detection_count();
  const std::size_t pairs = scan_subset.size() * detections;
  const std::size_t workers = chunk_count(pairs, options.threads);

  std::vector<Partial> partials;
  partials.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    partials.emplace_back(volume.grid.voxel_count(), cal.scan_count(), detections, positions);
  }

  parallel_chunks(pairs, options.threads, [&](std::size_t worker, std::size_t begin, std::size_t end) {
    Partial& acc = partials[worker];
    std::vector<double> histogram(static_cast<std::size_t>(scene.bin_count));
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t j = scan_subset[p / detections];
      const std::size_t m = p % detections;
      const detail::PairGeometry pair{cal.scan_positions[j], cal.detection_positions[m], legs.source_leg(j),
                                      legs.detector_leg(m), j, m};
      std::fill(histogram.begin(), histogram.end(), 0.0);
      detail::accumulate_pair(ctx, pair, volume.albedo, histogram);
      const auto observed = measured.histogram(j, m);
      for (std::size_t k = 0; k < histogram.size(); ++k) {
        histogram[k] -= observed[k];
        acc.loss += histogram[k] * histogram[k];
      }
      adjoint_pair(ctx, pair, scene, volume.albedo, histogram, positions, acc);
    }
  });

  // Pairwise reduction in a fixed order.
  for (std::size_t stride = 1; stride < workers; stride *= 2) {
    for (std::size_t w = 0; w + stride < workers; w += 2 * stride) partials[w].add(partials[w + stride]);
  }
  return std::move(partials.front());
}

}  // namespace

GradientBundle grad_loss(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                         const TransientSet& measured, std::span<const std::size_t> scan_subset,
                         const ModelOptions& options) {
  Partial total = evaluate(cal, volume, scene, measured, scan_subset, options, true);
  for (auto& g : total.d_scan) g = cal.update_mask.apply(g);
  for (auto& g : total.d_detect) g = cal.update_mask.apply(g);
  return {std::move(total.d_rho), std::move(total.d_scan), std::move(total.d_detect), total.loss};
}

std::vector<double> grad_rho_only(const CalibrationState& cal, const Volume& volume, const SceneConfig& scene,
                                  const TransientSet& measured, std::span<const std::size_t> scan_subset,
                                  const ModelOptions& options, double* loss_out) {
  Partial total = evaluate(cal, volume, scene, measured, scan_subset, options, false);
  if (loss_out) *loss_out = total.loss;
  return std::move(total.d_rho);
}

}  // namespace nlos
