#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nlos/analysis.hpp"
#include "nlos/optimizer.hpp"
#include "nlos/simulator.hpp"
#include "support/reference.hpp"
#include "support/util.hpp"

using namespace nlos;
using testutil::code_of;

TEST_CASE("planar grid points sit at cell centres, x-fastest") {
  const auto pts = planar_grid({4, 2, 1.0, 0.5, Vec3(0, 0, 0.1)});
  REQUIRE(pts.size() == 8);
  CHECK(pts[0].isApprox(Vec3(-0.375, -0.125, 0.1)));
  CHECK(pts[1].isApprox(Vec3(-0.125, -0.125, 0.1)));
  CHECK(pts[4].isApprox(Vec3(-0.375, 0.125, 0.1)));
  CHECK(pts[7].isApprox(Vec3(0.375, 0.125, 0.1)));
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p / 8.0;
  CHECK(mean.isApprox(Vec3(0, 0, 0.1)));
}

TEST_CASE("desk setup") {
  const Setup s = desk_setup();
  CHECK(s.grid_calibration().scan_count() == 256);
  CHECK(s.grid.voxel_count() == 4096);
  CHECK(s.scene.bin_count == 512);
  CHECK(s.scene.bin_length() == doctest::Approx(0.03));
  CHECK(s.scene.gaussian_sigma == doctest::Approx(2.0 * s.scene.bin_width));
  CHECK(s.scene.source_pos.x() > 0.64);  // instrument right of the array
  CHECK_NOTHROW(s.scene.validate());
  CHECK(s.grid_calibration().update_mask == AxisMask::z_only());
  CHECK(code_of([] { desk_setup(0); }) == ErrorCode::invalid_argument);

  // Every voxel's Gaussian support lies inside the record.
  const auto cal = s.grid_calibration();
  double lo = 1e9, hi = 0;
  for (const auto& l : cal.scan_positions) {
    for (std::size_t i = 0; i < s.grid.voxel_count(); ++i) {
      const double d = total_path_length(l, cal.detection_positions[0], voxel_center(s.grid, i), s.scene);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  const double sigma = s.scene.speed_of_light * s.scene.gaussian_sigma;
  CHECK(lo - 5 * sigma > s.scene.bin_path_length(0));
  CHECK(hi + 5 * sigma < s.scene.bin_path_length(s.scene.bin_count - 1));
}

TEST_CASE("gaussian z perturbation statistics") {
  const auto cal = desk_setup(32).grid_calibration();
  PerturbationSpec spec;
  spec.std_dev = 0.05;
  spec.rng_seed = 11;
  const auto out = perturb(cal, spec, desk_setup().scene);
  double sum = 0.0;
  for (std::size_t j = 0; j < cal.scan_count(); ++j) {
    const Vec3 d = out.scan_positions[j] - cal.scan_positions[j];
    CHECK(d.x() == 0.0);
    CHECK(d.y() == 0.0);
    sum += d.z() * d.z();
  }
  const double rmse = std::sqrt(sum / cal.scan_count());
  CHECK(rmse >= 0.045);
  CHECK(rmse <= 0.055);
  CHECK(out.detection_positions != cal.detection_positions);

  spec.include_detection = false;
  CHECK(perturb(cal, spec, desk_setup().scene).detection_positions == cal.detection_positions);
  spec.std_dev = 0.0;
  CHECK(perturb(cal, spec, desk_setup().scene).scan_positions == cal.scan_positions);
  spec.std_dev = -1.0;
  CHECK(code_of([&] { perturb(cal, spec, desk_setup().scene); }) == ErrorCode::invalid_argument);
}

TEST_CASE("gaussian xyz perturbation moves every axis") {
  const auto cal = desk_setup(8).grid_calibration();
  PerturbationSpec spec;
  spec.kind = PerturbationKind::gaussian_xyz;
  spec.std_dev = 0.02;
  const auto out = perturb(cal, spec, desk_setup().scene);
  for (int a = 0; a < 3; ++a) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cal.scan_count(); ++j) {
      const double d = out.scan_positions[j][a] - cal.scan_positions[j][a];
      sum += d * d;
    }
    CHECK(std::sqrt(sum / cal.scan_count()) > 0.01);
  }
}

TEST_CASE("pattern perturbations move points along their radial line") {
  const Setup setup = desk_setup(8);
  const auto cal = setup.grid_calibration();
  for (auto kind : {PerturbationKind::sinusoidal_radial, PerturbationKind::parabolic_radial}) {
    PerturbationSpec spec;
    spec.kind = kind;
    spec.amplitude = 0.03;
    const auto out = perturb(cal, spec, setup.scene);
    for (std::size_t j = 0; j < cal.scan_count(); ++j) {
      const Vec3 d = out.scan_positions[j] - cal.scan_positions[j];
      const Vec3 r = radial_direction(setup.scene, cal.scan_positions[j]);
      CHECK((d - d.dot(r) * r).norm() < 1e-12);
      CHECK(std::abs(d.dot(r)) <= 0.03 + 1e-12);
    }
    CHECK(out.detection_positions == cal.detection_positions);
  }
  // Corner of the parabola sits at the full amplitude, the sinusoid is odd in x.
  PerturbationSpec para;
  para.kind = PerturbationKind::parabolic_radial;
  para.amplitude = 0.03;
  const auto p = perturb(cal, para, setup.scene);
  CHECK((p.scan_positions[0] - cal.scan_positions[0]).norm() == doctest::Approx(0.03));
  PerturbationSpec sine;
  sine.kind = PerturbationKind::sinusoidal_radial;
  sine.amplitude = 0.03;
  const auto s = perturb(cal, sine, setup.scene);
  const double left = (s.scan_positions[1] - cal.scan_positions[1]).dot(radial_direction(setup.scene, cal.scan_positions[1]));
  const double right = (s.scan_positions[6] - cal.scan_positions[6]).dot(radial_direction(setup.scene, cal.scan_positions[6]));
  CHECK(left == doctest::Approx(-right));
  CHECK(parse_perturbation_kind(to_string(PerturbationKind::parabolic_radial)) == PerturbationKind::parabolic_radial);
  CHECK(code_of([] { parse_perturbation_kind("wobble"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("scenarios") {
  const Setup setup = desk_setup(6, 6, 512);
  const Volume vol = make_phantom(Phantom::hemisphere, setup.grid);
  const auto grid = setup.grid_calibration();

  const auto none = scenario(1, grid, vol, setup.scene, 0.0, 3);
  CHECK(none.estimate.scan_positions == none.truth.scan_positions);

  const auto s1 = scenario(1, grid, vol, setup.scene, 0.05, 3);
  CHECK(s1.truth.scan_positions == grid.scan_positions);
  CHECK(s1.estimate.scan_positions != grid.scan_positions);
  CHECK(s1.estimate.detection_positions == grid.detection_positions);
  CHECK(s1.measured.data == synthesize(grid, vol, setup.scene).data);

  const auto s2 = scenario(2, grid, vol, setup.scene, 0.05, 3);
  CHECK(s2.estimate.scan_positions == grid.scan_positions);
  CHECK(s2.truth.scan_positions != grid.scan_positions);
  CHECK(s2.truth.detection_positions != grid.detection_positions);
  CHECK(s2.measured.data != s1.measured.data);

  const auto s3 = scenario(3, grid, vol, setup.scene, 0.05, 3);
  CHECK(s3.truth.scan_positions == grid.scan_positions);
  CHECK(s3.estimate.scan_positions[0].x() != grid.scan_positions[0].x());

  CHECK(code_of([&] { scenario(4, grid, vol, setup.scene, 0.05, 3); }) == ErrorCode::invalid_argument);
}

TEST_CASE("phantoms") {
  const Setup setup = desk_setup(4, 16, 512);
  const auto& g = setup.grid;
  auto count = [](const Volume& v) { return std::count(v.albedo.begin(), v.albedo.end(), 1.0); };

  const Volume one = make_phantom(Phantom::single_voxel, g);
  CHECK(count(one) == 1);
  CHECK(std::accumulate(one.albedo.begin(), one.albedo.end(), 0.0) == 1.0);

  // Brute-force count of centres inside the half ball.
  PhantomOptions po;
  std::size_t inside = 0;
  for (int iz = 0; iz < g.dims[2]; ++iz)
    for (int iy = 0; iy < g.dims[1]; ++iy)
      for (int ix = 0; ix < g.dims[0]; ++ix) {
        const double x = g.origin.x() + (ix + 0.5) * g.pitch.x(), y = g.origin.y() + (iy + 0.5) * g.pitch.y(),
                     z = g.origin.z() + (iz + 0.5) * g.pitch.z();
        if (x * x + y * y + (z - po.depth) * (z - po.depth) <= po.radius * po.radius && z <= po.depth) ++inside;
      }
  const Volume hemi = make_phantom(Phantom::hemisphere, g, po);
  CHECK(static_cast<std::size_t>(count(hemi)) == inside);
  CHECK(inside > 20);

  const Volume plane = make_phantom(Phantom::plane, g);
  CHECK(count(plane) == 64);  // 8 x 8 centres within +-0.32 m at 8 cm pitch
  const Volume glyph = make_phantom(Phantom::sigma_glyph, g);
  CHECK(count(glyph) > 10);
  CHECK(count(glyph) < count(plane));
  CHECK(parse_phantom("sigma_glyph") == Phantom::sigma_glyph);
  CHECK(code_of([] { parse_phantom("teapot"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("zero-noise pipeline has nothing to fix") {
  const Setup setup = desk_setup(4, 6, 512);
  const Volume vol = make_phantom(Phantom::hemisphere, setup.grid, {1.0, 0.4});
  const auto data = scenario(1, setup.grid_calibration(), vol, setup.scene, 0.0, 0);
  AutocalSchedule sched;
  sched.total_iterations = 2;
  sched.calib_iterations = 3;
  sched.reconstruction_iterations = 3;
  AutocalHooks hooks;
  hooks.ground_truth = &data.truth;
  const auto r = autocal(data.estimate, vol, setup.scene, data.measured, sched, {}, hooks);
  CHECK(scan_rmse(r.calibration, data.truth, AxisMask::all()) == 0.0);
  CHECK(r.volume.albedo == vol.albedo);
  for (const auto& rec : r.report.records) CHECK(rec.loss == 0.0);
}

TEST_CASE("poisson sampling") {
  TransientSet clean(2, 1, 2000);
  std::fill(clean.data.begin(), clean.data.end(), 0.5);
  clean.at(0, 0, 0) = -3.0;
  const auto a = poisson_sample(clean, 100.0, 5);
  CHECK(a.data == poisson_sample(clean, 100.0, 5).data);
  CHECK(a.data != poisson_sample(clean, 100.0, 6).data);
  CHECK(a.at(0, 0, 0) == 0.0);
  double mean = 0.0;
  for (std::size_t n = 1; n < a.data.size(); ++n) {
    CHECK(std::abs(a.data[n] * 100.0 - std::round(a.data[n] * 100.0)) < 1e-9);  // integer counts
    mean += a.data[n];
  }
  mean /= static_cast<double>(a.data.size() - 1);
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(code_of([&] { poisson_sample(clean, 0.0, 1); }) == ErrorCode::invalid_argument);
}
