#include <doctest.h>

#include <cmath>

#include "nlos/gradcheck.hpp"
#include "nlos/gradients.hpp"
#include "support/reference.hpp"
#include "support/util.hpp"

using namespace nlos;
using testutil::code_of;

namespace {

ModelOptions exact() {
  ModelOptions o;
  o.truncate = false;
  return o;
}

// Flat parameter vector (albedo, scans, detections) for directional checks.
std::vector<double> pack(const CalibrationState& cal, const Volume& v) {
  std::vector<double> p = v.albedo;
  for (const auto& l : cal.scan_positions) p.insert(p.end(), l.data(), l.data() + 3);
  for (const auto& s : cal.detection_positions) p.insert(p.end(), s.data(), s.data() + 3);
  return p;
}

void unpack(const std::vector<double>& p, CalibrationState& cal, Volume& v) {
  std::size_t n = 0;
  for (double& a : v.albedo) a = p[n++];
  for (auto& l : cal.scan_positions) l = Vec3(p[n], p[n + 1], p[n + 2]), n += 3;
  for (auto& s : cal.detection_positions) s = Vec3(p[n], p[n + 1], p[n + 2]), n += 3;
}

std::vector<double> pack(const GradientBundle& g) {
  std::vector<double> p = g.d_rho;
  for (const auto& l : g.d_scan) p.insert(p.end(), l.data(), l.data() + 3);
  for (const auto& s : g.d_detect) p.insert(p.end(), s.data(), s.data() + 3);
  return p;
}

}  // namespace

TEST_CASE("zero albedo and zero measurement give zero gradients") {
  auto s = ref::random_scene(1, 3, 3, 2, 64);
  std::fill(s.volume.albedo.begin(), s.volume.albedo.end(), 0.0);
  const TransientSet zero(3, 2, 64);
  const auto g = grad_loss(s.cal, s.volume, s.scene, zero, all_scans(3));
  CHECK(ref::max_abs(pack(g)) == 0.0);
  CHECK(g.loss == 0.0);
}

TEST_CASE("a perfect fit gives zero gradients") {
  const auto s = ref::random_scene(2, 3, 3, 2, 64);
  const auto m = forward_gaussian(s.cal, s.volume, s.scene, all_scans(3));
  const auto g = grad_loss(s.cal, s.volume, s.scene, m, all_scans(3));
  CHECK(ref::max_abs(pack(g)) == 0.0);
}

TEST_CASE("unit residual where g*f = 1 gives d_rho = 2") {
  auto u = testutil::unit_scene();
  u.scene.gaussian_sigma = u.scene.bin_width / 8.0;
  auto m = forward_gaussian(u.cal, u.volume, u.scene, all_scans(1), exact());
  m.at(0, 0, 8) -= 1.0;
  const auto d = grad_rho_only(u.cal, u.volume, u.scene, m, all_scans(1), exact());
  CHECK(d[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("grad_rho_only equals the albedo block of grad_loss bit for bit") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = random_scene(seed);
    const auto scans = all_scans(p.cal.scan_count());
    double value = -1.0;
    const auto d = grad_rho_only(p.cal, p.volume, p.scene, p.measured, scans, {}, &value);
    const auto g = grad_loss(p.cal, p.volume, p.scene, p.measured, scans);
    CHECK(d == g.d_rho);
    CHECK(value == g.loss);
  }
}

TEST_CASE("doubling the residual doubles d_rho exactly") {
  const auto p = random_scene(3);
  const auto scans = all_scans(p.cal.scan_count());
  const auto model = forward_gaussian(p.cal, p.volume, p.scene, scans);
  TransientSet doubled = p.measured;
  for (std::size_t n = 0; n < doubled.data.size(); ++n) doubled.data[n] = 2.0 * p.measured.data[n] - model.data[n];
  const auto a = grad_rho_only(p.cal, p.volume, p.scene, p.measured, scans);
  const auto b = grad_rho_only(p.cal, p.volume, p.scene, doubled, scans);
  std::vector<double> twice(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) twice[i] = 2.0 * a[i];
  CHECK(ref::max_rel_dev(b, twice) < 1e-12);
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto p = random_scene(seed);
    const auto res = finite_difference_check(p);
    INFO("seed " << seed << " rho " << res.max_rel_rho << " scan " << res.max_rel_scan << " det "
                 << res.max_rel_detect);
    CHECK(res.components > 0);
    CHECK(res.max_rel() < 1e-4);
  }
}

TEST_CASE("6^3 volume, 4 scans, 64 bins against independent finite differences") {
  auto s = ref::random_scene(21, 6, 4, 1, 64);
  const auto scans = all_scans(4);
  // Measurement from a slightly different calibration so the residual is nonzero.
  auto shifted = s.cal;
  for (auto& l : shifted.scan_positions) l.z() += 0.004;
  const auto m = forward_gaussian(shifted, s.volume, s.scene, scans, exact());
  const auto g = grad_loss(s.cal, s.volume, s.scene, m, scans, exact());

  auto central = [&](auto set, double h) {
    auto plus = s, minus = s;
    set(plus, h);
    set(minus, -h);
    return (ref::loss(plus.cal, plus.volume, plus.scene, m.data) -
            ref::loss(minus.cal, minus.volume, minus.scene, m.data)) / (2 * h);
  };
  auto rel = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale < 1e-12 ? std::abs(a - b) : std::abs(a - b) / scale;
  };
  double worst = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    for (int a = 0; a < 3; ++a) {
      const double fd = central([&](ref::Scene& x, double h) { x.cal.scan_positions[j][a] += h; }, 1e-4);
      worst = std::max(worst, rel(g.d_scan[j][a], fd));
    }
  }
  for (int a = 0; a < 3; ++a) {
    const double fd = central([&](ref::Scene& x, double h) { x.cal.detection_positions[0][a] += h; }, 1e-4);
    worst = std::max(worst, rel(g.d_detect[0][a], fd));
  }
  for (std::size_t i = 0; i < s.volume.size(); i += 7) {
    const double fd = central([&](ref::Scene& x, double h) { x.volume.albedo[i] += h; }, 1e-5);
    worst = std::max(worst, rel(g.d_rho[i], fd));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("directional derivatives along random directions") {
  for (std::uint64_t seed = 30; seed < 33; ++seed) {
    auto p = random_scene(seed);
    p.cal.update_mask = AxisMask::all();
    const auto scans = all_scans(p.cal.scan_count());
    const auto g = pack(grad_loss(p.cal, p.volume, p.scene, p.measured, scans));
    const auto theta = pack(p.cal, p.volume);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v(theta.size());
      double norm = 0.0;
      for (double& x : v) norm += (x = normal(rng)) * x;
      for (double& x : v) x /= std::sqrt(norm);
      const double eps = 1e-5;
      auto at = [&](double t) {
        auto th = theta;
        for (std::size_t n = 0; n < th.size(); ++n) th[n] += t * v[n];
        CalibrationState cal = p.cal;
        Volume vol = p.volume;
        unpack(th, cal, vol);
        return loss(cal, vol, p.scene, p.measured, scans);
      };
      const double fd = (at(eps) - at(-eps)) / (2 * eps);
      double dot = 0.0;
      for (std::size_t n = 0; n < v.size(); ++n) dot += g[n] * v[n];
      CHECK(std::abs(fd - dot) <= 1e-4 * std::max(std::abs(dot), 1e-12));
    }
  }
}

TEST_CASE("gradients add up over scans") {
  const auto p = random_scene(40);
  const auto scans = all_scans(p.cal.scan_count());
  const auto total = grad_loss(p.cal, p.volume, p.scene, p.measured, scans);
  std::vector<double> sum(pack(total).size(), 0.0);
  double loss_sum = 0.0;
  for (std::size_t j : scans) {
    const std::size_t one[] = {j};
    const auto g = grad_loss(p.cal, p.volume, p.scene, p.measured, one);
    const auto flat = pack(g);
    for (std::size_t n = 0; n < sum.size(); ++n) sum[n] += flat[n];
    loss_sum += g.loss;
  }
  CHECK(ref::max_rel_dev(sum, pack(total)) < 1e-12);
  CHECK(loss_sum == doctest::Approx(total.loss).epsilon(1e-12));
}

TEST_CASE("masked components are exactly zero") {
  auto p = random_scene(41);
  const auto scans = all_scans(p.cal.scan_count());
  p.cal.update_mask = AxisMask::z_only();
  const auto g = grad_loss(p.cal, p.volume, p.scene, p.measured, scans);
  bool zero_xy = true, some_z = false;
  for (const auto& d : g.d_scan) zero_xy = zero_xy && d.x() == 0.0 && d.y() == 0.0, some_z = some_z || d.z() != 0.0;
  for (const auto& d : g.d_detect) zero_xy = zero_xy && d.x() == 0.0 && d.y() == 0.0;
  CHECK(zero_xy);
  CHECK(some_z);
  p.cal.update_mask = AxisMask::all();
  const auto full = grad_loss(p.cal, p.volume, p.scene, p.measured, scans);
  for (std::size_t j = 0; j < g.d_scan.size(); ++j) CHECK(g.d_scan[j].z() == full.d_scan[j].z());
}

TEST_CASE("truncated and untruncated gradients agree to 1e-4") {
  for (std::uint64_t seed = 50; seed < 53; ++seed) {
    const auto p = random_scene(seed);
    const auto scans = all_scans(p.cal.scan_count());
    const auto cut = pack(grad_loss(p.cal, p.volume, p.scene, p.measured, scans));
    const auto full = pack(grad_loss(p.cal, p.volume, p.scene, p.measured, scans, exact()));
    CHECK(ref::max_rel_dev(cut, full) < 1e-4);
  }
}

TEST_CASE("worker count only reorders the reduction") {
  const auto p = random_scene(60);
  const auto scans = all_scans(p.cal.scan_count());
  ModelOptions one, four;
  four.threads = 4;
  const auto a = pack(grad_loss(p.cal, p.volume, p.scene, p.measured, scans, one));
  const auto b = pack(grad_loss(p.cal, p.volume, p.scene, p.measured, scans, four));
  const auto c = pack(grad_loss(p.cal, p.volume, p.scene, p.measured, scans, four));
  CHECK(ref::max_rel_dev(a, b) < 1e-10);
  CHECK(b == c);
}

TEST_CASE("gradient errors") {
  auto p = random_scene(70);
  const auto scans = all_scans(p.cal.scan_count());
  TransientSet wrong(p.cal.scan_count(), p.cal.detection_count(), p.measured.bin_count + 1);
  CHECK(code_of([&] { grad_loss(p.cal, p.volume, p.scene, wrong, scans); }) == ErrorCode::dimension_mismatch);
  p.cal.detection_positions[0] = voxel_center(p.volume.grid, 0);
  CHECK(code_of([&] { grad_loss(p.cal, p.volume, p.scene, p.measured, scans); }) ==
        ErrorCode::degenerate_geometry);
  CHECK(code_of([&] { grad_rho_only(p.cal, p.volume, p.scene, p.measured, scans); }) ==
        ErrorCode::degenerate_geometry);
}
