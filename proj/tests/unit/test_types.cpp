#include <doctest.h>

#include <cmath>
#include <limits>

#include "nlos/error.hpp"
#include "nlos/types.hpp"
#include "support/reference.hpp"
#include "support/util.hpp"

using namespace nlos;
using testutil::code_of;

namespace {

VolumeGrid unit_grid() {
  VolumeGrid g;
  g.origin = Vec3::Zero();
  g.pitch = Vec3::Ones();
  g.dims = {2, 2, 2};
  return g;
}

}  // namespace

TEST_CASE("voxel_center on a unit grid") {
  const VolumeGrid g = unit_grid();
  CHECK(voxel_center(g, 0).isApprox(Vec3(0.5, 0.5, 0.5)));
  CHECK(voxel_center(g, 7).isApprox(Vec3(1.5, 1.5, 1.5)));
  CHECK(voxel_center(g, 1).isApprox(Vec3(1.5, 0.5, 0.5)));  // x-fastest
  CHECK(voxel_center(g, 2).isApprox(Vec3(0.5, 1.5, 0.5)));
  CHECK(voxel_center(g, 4).isApprox(Vec3(0.5, 0.5, 1.5)));
}

TEST_CASE("voxel_center on a 32^3 grid of 4 cm voxels") {
  VolumeGrid g;
  g.origin = Vec3(-0.64, -0.64, 1.0);
  g.pitch = Vec3::Constant(0.04);
  g.dims = {32, 32, 32};
  const Vec3 c = voxel_center(g, 0);
  CHECK(c.x() == doctest::Approx(-0.62).epsilon(1e-12));
  CHECK(c.y() == doctest::Approx(-0.62).epsilon(1e-12));
  CHECK(c.z() == doctest::Approx(1.02).epsilon(1e-12));
}

TEST_CASE("voxel_center rejects out-of-range indices") {
  const VolumeGrid g = unit_grid();
  CHECK(code_of([&] { voxel_center(g, 8); }) == ErrorCode::out_of_range);
}

TEST_CASE("flat index round trip up to 64^3") {
  for (std::array<int, 3> dims : {std::array{1, 1, 1}, std::array{3, 5, 7}, std::array{64, 64, 64}}) {
    VolumeGrid g;
    g.dims = dims;
    g.pitch = Vec3(0.1, 0.2, 0.3);
    g.origin = Vec3(-1.0, 2.0, 0.5);
    bool ok = true;
    for (std::size_t i = 0; i < g.voxel_count(); ++i) {
      const auto idx = g.unflatten(i);
      ok = ok && g.flat_index(idx[0], idx[1], idx[2]) == i;
      // Center maps back to the same cell.
      const Vec3 c = voxel_center(g, i);
      for (int a = 0; a < 3; ++a) {
        ok = ok && static_cast<int>(std::floor((c[a] - g.origin[a]) / g.pitch[a])) == idx[a];
      }
    }
    CHECK(ok);
  }
}

TEST_CASE("total_path_length examples") {
  SceneConfig scene;
  scene.source_pos = Vec3(0, 0, 1);
  scene.detector_pos = Vec3(0, 0, 1);
  CHECK(total_path_length(Vec3::Zero(), Vec3::Zero(), Vec3(0, 1, 0), scene) == doctest::Approx(4.0));

  scene.source_pos = scene.detector_pos = Vec3(0.3, 0.2, 0.1);
  CHECK(total_path_length(scene.source_pos, scene.source_pos, scene.source_pos, scene) == 0.0);

  scene.source_pos = Vec3(0, 0, 2);
  scene.detector_pos = Vec3(1, 0, 2);
  const double d = total_path_length(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, 1, 0), scene);
  CHECK(d == doctest::Approx(2.0 * std::sqrt(1.25) + 4.0).epsilon(1e-14));
  CHECK(d == doctest::Approx(6.2361).epsilon(1e-5));
}

TEST_CASE("total_path_length swap symmetry and bounds") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  auto point = [&] { return Vec3(u(rng), u(rng), u(rng)); };
  for (int n = 0; n < 200; ++n) {
    SceneConfig a;
    a.source_pos = point();
    a.detector_pos = point();
    const Vec3 l = point(), s = point(), o = point();
    SceneConfig b = a;
    std::swap(b.source_pos, b.detector_pos);
    const double d = total_path_length(l, s, o, a);
    CHECK(d == doctest::Approx(total_path_length(s, l, o, b)).epsilon(1e-14));
    const double legs[] = {(l - o).norm(), (s - o).norm(), (a.source_pos - l).norm(), (a.detector_pos - s).norm()};
    CHECK(d >= *std::max_element(std::begin(legs), std::end(legs)));
    CHECK(d > 0.0);
  }
}

TEST_CASE("SceneConfig invariants") {
  SceneConfig ok;
  ok.bin_width = 1e-11;
  ok.bin_count = 4;
  ok.gaussian_sigma = 2e-11;
  CHECK_NOTHROW(ok.validate());

  auto broken = [&](auto mutate) {
    SceneConfig s = ok;
    mutate(s);
    return code_of([&] { s.validate(); });
  };
  CHECK(broken([](SceneConfig& s) { s.bin_width = 0.0; }) == ErrorCode::invariant_violation);
  CHECK(broken([](SceneConfig& s) { s.bin_width = -1.0; }) == ErrorCode::invariant_violation);
  CHECK(broken([](SceneConfig& s) { s.bin_count = 0; }) == ErrorCode::invariant_violation);
  CHECK(broken([](SceneConfig& s) { s.gaussian_sigma = 0.0; }) == ErrorCode::invariant_violation);
  CHECK(broken([](SceneConfig& s) { s.speed_of_light = 0.0; }) == ErrorCode::invariant_violation);
  CHECK(broken([](SceneConfig& s) { s.source_pos.x() = std::nan(""); }) == ErrorCode::invariant_violation);

  try {
    SceneConfig s = ok;
    s.bin_width = 0.0;
    s.validate();
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bin_width") != std::string::npos);
  }
}

TEST_CASE("bin time conventions") {
  SceneConfig s;
  s.bin_width = 2.0;
  s.speed_of_light = 1.0;
  s.time_offset = 1.0;
  s.bin_count = 10;
  s.gaussian_sigma = 1.0;
  CHECK(s.bin_path_length(3) == doctest::Approx(1.0 + 3.5 * 2.0));
  CHECK(s.path_to_bin(s.bin_path_length(3)) == doctest::Approx(3.0));
  s.bin_time = BinTime::left_edge;
  CHECK(s.bin_path_length(3) == doctest::Approx(7.0));
  CHECK(s.path_to_bin(7.0) == doctest::Approx(3.0));
}

TEST_CASE("CalibrationState invariants") {
  CalibrationState cal{{Vec3::Zero()}, {Vec3::Zero()}, AxisMask::z_only()};
  CHECK_NOTHROW(cal.validate());
  CalibrationState no_scans = cal;
  no_scans.scan_positions.clear();
  CHECK(code_of([&] { no_scans.validate(); }) == ErrorCode::invariant_violation);
  CalibrationState no_det = cal;
  no_det.detection_positions.clear();
  CHECK(code_of([&] { no_det.validate(); }) == ErrorCode::invariant_violation);
  CalibrationState inf = cal;
  inf.scan_positions[0].z() = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { inf.validate(); }) == ErrorCode::invariant_violation);
}

TEST_CASE("Volume and TransientSet invariants") {
  VolumeGrid g = unit_grid();
  Volume v(g);
  CHECK_NOTHROW(v.validate());
  v.albedo.pop_back();
  CHECK(code_of([&] { v.validate(); }) == ErrorCode::dimension_mismatch);
  Volume w(g);
  w.albedo[3] = std::nan("");
  CHECK(code_of([&] { w.validate(); }) == ErrorCode::invariant_violation);
  g.dims[1] = 0;
  CHECK(code_of([&] { g.validate(); }) == ErrorCode::invariant_violation);
  VolumeGrid p = unit_grid();
  p.pitch.y() = 0.0;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::invariant_violation);

  TransientSet t(2, 3, 4);
  CHECK(t.data.size() == 24);
  CHECK(t.offset(1, 2) == 20);
  t.at(1, 2, 3) = 5.0;
  CHECK(t.histogram(1, 2)[3] == 5.0);
  CHECK_NOTHROW(t.validate());
  t.data.push_back(0.0);
  CHECK(code_of([&] { t.validate(); }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("AxisMask parsing") {
  CHECK(AxisMask::parse("z") == AxisMask::z_only());
  CHECK(AxisMask::parse("xyz") == AxisMask::all());
  CHECK(AxisMask::parse("100") == AxisMask::z_only());
  CHECK(AxisMask::parse("001") == AxisMask{true, false, false});
  CHECK(AxisMask::parse("011") == AxisMask{true, true, false});
  CHECK(AxisMask::parse("XZ") == AxisMask{true, false, true});
  CHECK_FALSE(AxisMask::parse("000").any());
  CHECK(code_of([] { AxisMask::parse("w"); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { AxisMask::parse(""); }) == ErrorCode::invalid_argument);
  CHECK(AxisMask::z_only().to_string() == "z");
  CHECK(AxisMask::z_only().apply(Vec3(1, 2, 3)) == Vec3(0, 0, 3));
}

TEST_CASE("OptimizationReport invariants") {
  OptimizationReport r;
  r.records = {{0, Phase::calibration, 1.0, std::nullopt}, {1, Phase::reconstruction, 0.5, 0.01}};
  CHECK_NOTHROW(r.validate());
  r.records.push_back({1, Phase::reconstruction, 0.4, std::nullopt});
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::invariant_violation);
  r.records.back() = {2, Phase::reconstruction, std::nan(""), std::nullopt};
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::non_finite);
  CHECK(parse_phase(to_string(Phase::calibration)) == Phase::calibration);
  CHECK(code_of([] { parse_phase("warmup"); }) == ErrorCode::parse_error);
}

TEST_CASE("error classification") {
  CHECK(is_validation_error(ErrorCode::missing_file));
  CHECK(is_validation_error(ErrorCode::size_mismatch));
  CHECK(is_validation_error(ErrorCode::invariant_violation));
  CHECK_FALSE(is_validation_error(ErrorCode::degenerate_geometry));
  CHECK_FALSE(is_validation_error(ErrorCode::non_finite));
  CHECK(all_scans(3) == std::vector<std::size_t>{0, 1, 2});
}
