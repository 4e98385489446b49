#pragma once

#include <doctest.h>

#include "nlos/error.hpp"
#include "nlos/types.hpp"

namespace testutil {

// Error code thrown by f, failing the test if nothing is thrown.
template <class F>
nlos::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const nlos::Error& e) {
    return e.code();
  }
  FAIL("expected an nlos::Error");
  return nlos::ErrorCode::io_failure;
}

// One voxel of albedo 1 centered at (0, 1, 0); l = s = origin, i = d =
// (0, 0, 1). Every leg is 1 m, so the total path is 4 m and the falloff is 1.
// Left-edge bins of 0.5 m put the path exactly on bin 8; sigma is one bin.
struct UnitScene {
  nlos::SceneConfig scene;
  nlos::CalibrationState cal;
  nlos::Volume volume;
};

inline UnitScene unit_scene() {
  UnitScene u;
  u.scene.speed_of_light = 1.0;
  u.scene.bin_width = 0.5;
  u.scene.bin_count = 16;
  u.scene.gaussian_sigma = 0.5;
  u.scene.bin_time = nlos::BinTime::left_edge;
  u.scene.source_pos = u.scene.detector_pos = nlos::Vec3(0, 0, 1);
  u.cal = {{nlos::Vec3::Zero()}, {nlos::Vec3::Zero()}, nlos::AxisMask::all()};
  nlos::VolumeGrid g;
  g.origin = nlos::Vec3(-0.5, 0.5, -0.5);
  g.pitch = nlos::Vec3::Ones();
  g.dims = {1, 1, 1};
  u.volume = nlos::Volume(g, {1.0});
  return u;
}

}  // namespace testutil
