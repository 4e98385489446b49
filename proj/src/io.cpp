#include "nlos/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nlos/error.hpp"

namespace nlos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const std::string& context) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorCode::parse_error, context + ": missing field '" + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key, const std::string& context) {
  try {
    return require(j, key, context).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, context + "." + key + ": " + e.what());
  }
}

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::parse_error, context + ": expected a 3-element array");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, context + ": " + e.what());
  }
}

json points_to_json(const std::vector<Vec3>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back(vec_to_json(p));
  return out;
}

std::vector<Vec3> points_from_json(const json& j, const std::string& context) {
  if (!j.is_array()) fail(ErrorCode::parse_error, context + ": expected an array of points");
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (std::size_t n = 0; n < j.size(); ++n) out.push_back(vec_from_json(j[n], context + "[" + std::to_string(n) + "]"));
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::missing_file, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::io_failure, "failed writing " + path.string());
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

void write_f32(const fs::path& path, std::span<const double> values) {
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t n = 0; n < values.size(); ++n) {
    words[n] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(values[n])));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) fail(ErrorCode::io_failure, "failed writing " + path.string());
}

std::vector<double> read_f32(const fs::path& path, std::size_t expected_count) {
  if (!fs::exists(path)) fail(ErrorCode::missing_file, "missing " + path.string());
  const auto bytes = fs::file_size(path);
  if (bytes != expected_count * 4) {
    fail(ErrorCode::size_mismatch, path.string() + " holds " + std::to_string(bytes) + " bytes, metadata implies " +
                                       std::to_string(expected_count * 4));
  }
  std::vector<std::uint32_t> words(expected_count);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorCode::io_failure, "failed reading " + path.string());
  std::vector<double> values(expected_count);
  for (std::size_t n = 0; n < expected_count; ++n) {
    values[n] = static_cast<double>(std::bit_cast<float>(to_little_endian(words[n])));
  }
  return values;
}

json scene_to_json(const SceneConfig& scene) {
  return {{"source_pos", vec_to_json(scene.source_pos)},
          {"detector_pos", vec_to_json(scene.detector_pos)},
          {"bin_width", scene.bin_width},
          {"bin_count", scene.bin_count},
          {"time_offset", scene.time_offset},
          {"gaussian_sigma", scene.gaussian_sigma},
          {"speed_of_light", scene.speed_of_light},
          {"bin_time", scene.bin_time == BinTime::center ? "center" : "left_edge"}};
}

SceneConfig scene_from_json(const json& j) {
  const std::string ctx = "scene";
  SceneConfig scene;
  scene.source_pos = vec_from_json(require(j, "source_pos", ctx), "scene.source_pos");
  scene.detector_pos = vec_from_json(require(j, "detector_pos", ctx), "scene.detector_pos");
  scene.bin_width = get<double>(j, "bin_width", ctx);
  scene.bin_count = get<int>(j, "bin_count", ctx);
  scene.time_offset = j.contains("time_offset") ? get<double>(j, "time_offset", ctx) : 0.0;
  scene.gaussian_sigma = j.contains("gaussian_sigma") ? get<double>(j, "gaussian_sigma", ctx) : 2.0 * scene.bin_width;
  scene.speed_of_light = j.contains("speed_of_light") ? get<double>(j, "speed_of_light", ctx) : kSpeedOfLight;
  if (j.contains("bin_time")) {
    const auto mode = get<std::string>(j, "bin_time", ctx);
    if (mode == "center") scene.bin_time = BinTime::center;
    else if (mode == "left_edge") scene.bin_time = BinTime::left_edge;
    else fail(ErrorCode::parse_error, "scene.bin_time must be 'center' or 'left_edge'");
  }
  scene.validate();
  return scene;
}

json calibration_to_json(const CalibrationState& cal) {
  return {{"scan_positions", points_to_json(cal.scan_positions)},
          {"detection_positions", points_to_json(cal.detection_positions)},
          {"update_mask", cal.update_mask.to_string()}};
}

CalibrationState calibration_from_json(const json& j) {
  const std::string ctx = "calibration";
  CalibrationState cal;
  cal.scan_positions = points_from_json(require(j, "scan_positions", ctx), "calibration.scan_positions");
  cal.detection_positions = points_from_json(require(j, "detection_positions", ctx), "calibration.detection_positions");
  if (j.contains("update_mask")) {
    const auto text = get<std::string>(j, "update_mask", ctx);
    cal.update_mask = text == "none" ? AxisMask{false, false, false} : AxisMask::parse(text);
  }
  cal.validate();
  return cal;
}

json grid_to_json(const VolumeGrid& grid) {
  return {{"origin", vec_to_json(grid.origin)},
          {"pitch", vec_to_json(grid.pitch)},
          {"dims", json::array({grid.dims[0], grid.dims[1], grid.dims[2]})}};
}

VolumeGrid grid_from_json(const json& j) {
  const std::string ctx = "volume";
  VolumeGrid grid;
  grid.origin = vec_from_json(require(j, "origin", ctx), "volume.origin");
  grid.pitch = vec_from_json(require(j, "pitch", ctx), "volume.pitch");
  const auto dims = get<std::vector<int>>(j, "dims", ctx);
  if (dims.size() != 3) fail(ErrorCode::parse_error, "volume.dims must have 3 entries");
  grid.dims = {dims[0], dims[1], dims[2]};
  grid.validate();
  return grid;
}

json schedule_to_json(const AutocalSchedule& s) {
  json out = {{"total_iterations", s.total_iterations},
              {"calib_iterations", s.calib_iterations},
              {"reconstruction_iterations", s.reconstruction_iterations},
              {"scan_subsample_fraction", s.scan_subsample_fraction},
              {"batch_size", s.batch_size},
              {"rng_seed", s.rng_seed},
              {"nonnegativity_projection", s.nonnegativity_projection},
              {"update_detections", s.update_detections},
              {"albedo_learning_rate", s.albedo_adam.learning_rate},
              {"position_learning_rate", s.position_adam.learning_rate},
              {"beta1", s.albedo_adam.beta1},
              {"beta2", s.albedo_adam.beta2},
              {"epsilon", s.albedo_adam.epsilon}};
  if (s.albedo_upper_bound) out["albedo_upper_bound"] = *s.albedo_upper_bound;
  return out;
}

AutocalSchedule schedule_from_json(const json& j, AutocalSchedule s) {
  const std::string ctx = "schedule";
  if (!j.is_object()) fail(ErrorCode::parse_error, "schedule must be an object");
  if (j.contains("total_iterations")) s.total_iterations = get<int>(j, "total_iterations", ctx);
  if (j.contains("calib_iterations")) s.calib_iterations = get<int>(j, "calib_iterations", ctx);
  if (j.contains("reconstruction_iterations")) s.reconstruction_iterations = get<int>(j, "reconstruction_iterations", ctx);
  if (j.contains("scan_subsample_fraction")) s.scan_subsample_fraction = get<double>(j, "scan_subsample_fraction", ctx);
  if (j.contains("batch_size")) s.batch_size = get<std::size_t>(j, "batch_size", ctx);
  if (j.contains("rng_seed")) s.rng_seed = get<std::uint64_t>(j, "rng_seed", ctx);
  if (j.contains("nonnegativity_projection")) s.nonnegativity_projection = get<bool>(j, "nonnegativity_projection", ctx);
  if (j.contains("update_detections")) s.update_detections = get<bool>(j, "update_detections", ctx);
  if (j.contains("albedo_upper_bound")) s.albedo_upper_bound = get<double>(j, "albedo_upper_bound", ctx);
  if (j.contains("albedo_learning_rate")) s.albedo_adam.learning_rate = get<double>(j, "albedo_learning_rate", ctx);
  if (j.contains("position_learning_rate")) s.position_adam.learning_rate = get<double>(j, "position_learning_rate", ctx);
  for (AdamConfig* c : {&s.albedo_adam, &s.position_adam}) {
    if (j.contains("beta1")) c->beta1 = get<double>(j, "beta1", ctx);
    if (j.contains("beta2")) c->beta2 = get<double>(j, "beta2", ctx);
    if (j.contains("epsilon")) c->epsilon = get<double>(j, "epsilon", ctx);
  }
  s.validate();
  return s;
}

json model_to_json(const ModelOptions& m) {
  return {{"truncate", m.truncate}, {"truncation_sigmas", m.truncation_sigmas}, {"min_distance", m.min_distance}};
}

ModelOptions model_from_json(const json& j, ModelOptions m) {
  const std::string ctx = "model";
  if (j.contains("truncate")) m.truncate = get<bool>(j, "truncate", ctx);
  if (j.contains("truncation_sigmas")) m.truncation_sigmas = get<double>(j, "truncation_sigmas", ctx);
  if (j.contains("min_distance")) m.min_distance = get<double>(j, "min_distance", ctx);
  if (!(m.truncation_sigmas > 0.0) || !(m.min_distance >= 0.0))
    fail(ErrorCode::invariant_violation, "model.truncation_sigmas must be > 0 and min_distance >= 0");
  return m;
}

void write_dataset(const fs::path& dir, const Dataset& d) {
  d.scene.validate();
  d.calibration.validate();
  d.grid.validate();
  check_measurement(d.calibration, d.scene, d.transients);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_failure, "cannot create " + dir.string() + ": " + ec.message());

  json scene = {{"scene", scene_to_json(d.scene)},
                {"calibration", calibration_to_json(d.calibration)},
                {"volume", grid_to_json(d.grid)}};
  if (d.schedule) scene["schedule"] = schedule_to_json(*d.schedule);
  if (d.model) scene["model"] = model_to_json(*d.model);
  write_text(dir / "scene.json", scene.dump(2) + "\n");
  write_f32(dir / "transients.f32", d.transients.data);

  const auto voxels = d.grid.voxel_count();
  auto write_volume = [&](const fs::path& path, const std::optional<std::vector<double>>& values) {
    if (!values) {
      fs::remove(path, ec);
      return;
    }
    if (values->size() != voxels) fail(ErrorCode::dimension_mismatch, path.filename().string() + " length != grid size");
    write_f32(path, *values);
  };
  write_volume(dir / "volume.f32", d.volume);
  write_volume(dir / "ground_truth_volume.f32", d.ground_truth_volume);
  if (d.ground_truth) {
    write_text(dir / "ground_truth.json", json{{"calibration", calibration_to_json(*d.ground_truth)}}.dump(2) + "\n");
  } else {
    fs::remove(dir / "ground_truth.json", ec);
  }
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::missing_file, "dataset directory " + dir.string() + " does not exist");
  const json meta = read_json(dir / "scene.json");
  Dataset d;
  d.scene = scene_from_json(require(meta, "scene", "scene.json"));
  d.calibration = calibration_from_json(require(meta, "calibration", "scene.json"));
  d.grid = grid_from_json(require(meta, "volume", "scene.json"));
  if (meta.contains("schedule")) d.schedule = schedule_from_json(meta.at("schedule"));
  if (meta.contains("model")) d.model = model_from_json(meta.at("model"));

  d.transients = TransientSet(d.calibration.scan_count(), d.calibration.detection_count(),
                              static_cast<std::size_t>(d.scene.bin_count));
  d.transients.data = read_f32(dir / "transients.f32", d.transients.data.size());
  d.transients.validate();

  if (fs::exists(dir / "volume.f32")) d.volume = read_f32(dir / "volume.f32", d.grid.voxel_count());
  if (fs::exists(dir / "ground_truth_volume.f32"))
    d.ground_truth_volume = read_f32(dir / "ground_truth_volume.f32", d.grid.voxel_count());
  if (fs::exists(dir / "ground_truth.json")) {
    const json gt = read_json(dir / "ground_truth.json");
    d.ground_truth = calibration_from_json(require(gt, "calibration", "ground_truth.json"));
    if (d.ground_truth->scan_count() != d.calibration.scan_count() ||
        d.ground_truth->detection_count() != d.calibration.detection_count())
      fail(ErrorCode::size_mismatch, "ground_truth.json position counts differ from scene.json");
  }
  return d;
}

json report_to_json(const OptimizationReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    json rec = {{"iteration", r.iteration}, {"phase", to_string(r.phase)}, {"loss", r.loss}};
    if (r.scan_rmse) rec["scan_rmse"] = *r.scan_rmse;
    records.push_back(std::move(rec));
  }
  json snapshots = json::array();
  for (const auto& s : report.snapshots) snapshots.push_back(s.iteration);
  return {{"parameters", report.parameters},
          {"records", std::move(records)},
          {"snapshot_iterations", std::move(snapshots)},
          {"final_calibration", calibration_to_json(report.final_calibration)},
          {"final_volume", grid_to_json(report.final_volume.grid)}};
}

OptimizationReport report_from_json(const json& j) {
  OptimizationReport report;
  const std::string ctx = "report";
  report.parameters = get<std::map<std::string, std::string>>(j, "parameters", ctx);
  for (const auto& rec : require(j, "records", ctx)) {
    IterationRecord r;
    r.iteration = get<int>(rec, "iteration", "report.records");
    r.phase = parse_phase(get<std::string>(rec, "phase", "report.records"));
    r.loss = get<double>(rec, "loss", "report.records");
    if (rec.contains("scan_rmse")) r.scan_rmse = get<double>(rec, "scan_rmse", "report.records");
    report.records.push_back(r);
  }
  report.final_calibration = calibration_from_json(require(j, "final_calibration", ctx));
  report.final_volume = Volume(grid_from_json(require(j, "final_volume", ctx)));
  if (j.contains("snapshot_iterations")) {
    for (int it : get<std::vector<int>>(j, "snapshot_iterations", ctx)) report.snapshots.push_back({it, {}});
  }
  report.validate();
  return report;
}

void write_report(const fs::path& dir, const OptimizationReport& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_failure, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  if (!report.final_volume.albedo.empty()) write_f32(dir / "volume.f32", report.final_volume.albedo);
  for (const auto& s : report.snapshots) {
    char name[32];
    std::snprintf(name, sizeof(name), "volume_iter%03d.f32", s.iteration);
    write_f32(dir / name, s.albedo);
  }
}

namespace {

TransientSet shift_confocal(const TransientSet& in, const CalibrationState& cal, const SceneConfig& scene,
                            const UnrectifyOptions& options, int direction) {
  scene.validate();
  in.validate();
  if (in.detection_count != 1 || in.scan_count != cal.scan_count() ||
      in.bin_count != static_cast<std::size_t>(scene.bin_count)) {
    fail(ErrorCode::dimension_mismatch, "confocal data must be scans x 1 x bins matching calibration and scene");
  }
  const bool per_scan_detection = cal.detection_count() == cal.scan_count();
  TransientSet out(in.scan_count, 1, in.bin_count);
  const auto bins = static_cast<long long>(in.bin_count);
  for (std::size_t j = 0; j < in.scan_count; ++j) {
    const Vec3& l = cal.scan_positions[j];
    const Vec3& s = per_scan_detection ? cal.detection_positions[j] : l;
    const double path = (scene.source_pos - l).norm() + (scene.detector_pos - s).norm();
    const long long shift =
        std::llround(std::floor(path / scene.bin_length() + (options.half_bin_offset ? 0.5 : 0.0) + 0.5));
    if (shift > bins) {
      fail(ErrorCode::out_of_range, "scan " + std::to_string(j) + " needs a shift of " + std::to_string(shift) +
                                        " bins but only " + std::to_string(bins) + " are recorded");
    }
    const auto src = in.histogram(j, 0);
    auto dst = out.histogram(j, 0);
    for (long long k = 0; k < bins; ++k) {
      const long long from = k - direction * shift;
      if (from >= 0 && from < bins) dst[static_cast<std::size_t>(k)] = src[static_cast<std::size_t>(from)];
    }
  }
  return out;
}

}  // namespace

TransientSet unrectify_confocal(const TransientSet& rectified, const CalibrationState& cal, const SceneConfig& scene,
                                const UnrectifyOptions& options) {
  return shift_confocal(rectified, cal, scene, options, +1);
}

TransientSet rectify_confocal(const TransientSet& unrectified, const CalibrationState& cal, const SceneConfig& scene,
                              const UnrectifyOptions& options) {
  return shift_confocal(unrectified, cal, scene, options, -1);
}

}  // namespace nlos
