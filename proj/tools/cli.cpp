#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlos/analysis.hpp"
#include "nlos/error.hpp"
#include "nlos/gradcheck.hpp"
#include "nlos/initializer.hpp"
#include "nlos/io.hpp"
#include "nlos/optimizer.hpp"
#include "nlos/simulator.hpp"

namespace nlos::cli {
namespace {

namespace fs = std::filesystem;

// Flags shared by the descent subcommands.
struct RunFlags {
  std::uint64_t seed = 0;
  int threads = 1;
  double lr = 0.0;
  int calib_iters = -1;
  int recon_iters = -1;
  int repeats = -1;
  double subsample = 0.0;
  std::string axes;
  double sigma = 0.0;
  bool nonneg = false;
  std::string start = "zero";
};

void add_common(CLI::App& app, RunFlags& f) {
  app.add_option("--seed", f.seed, "RNG seed");
  app.add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--sigma", f.sigma, "Gaussian impulse width in seconds (0 keeps the dataset value)")
      ->check(CLI::NonNegativeNumber);
}

void add_schedule(CLI::App& app, RunFlags& f) {
  app.add_option("--lr", f.lr, "Adam learning rate for albedo and positions (0 keeps the schedule value)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--calib-iters", f.calib_iters, "calibration steps per repeat");
  app.add_option("--recon-iters", f.recon_iters, "reconstruction steps per repeat");
  app.add_option("--repeats", f.repeats, "outer repeats");
  app.add_option("--subsample", f.subsample, "scan fraction per batch (0 keeps the schedule value)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--axes", f.axes, "calibration axes, letters (\"z\") or zyx bitmask (\"100\")");
  app.add_flag("--nonneg", f.nonneg, "project the albedo onto >= 0 after every step");
  app.add_option("--start", f.start, "start volume when the dataset has none")
      ->check(CLI::IsMember({"zero", "backprojection", "filtered"}))
      ->capture_default_str();
}

AutocalSchedule resolve_schedule(const Dataset& d, const RunFlags& f) {
  AutocalSchedule s = d.schedule.value_or(AutocalSchedule{});
  s.rng_seed = f.seed;
  if (f.lr > 0.0) s.albedo_adam.learning_rate = s.position_adam.learning_rate = f.lr;
  if (f.calib_iters >= 0) s.calib_iterations = f.calib_iters;
  if (f.recon_iters >= 0) s.reconstruction_iterations = f.recon_iters;
  if (f.repeats >= 0) s.total_iterations = f.repeats;
  if (f.subsample > 0.0) s.scan_subsample_fraction = f.subsample;
  if (f.nonneg) s.nonnegativity_projection = true;
  s.validate();
  return s;
}

ModelOptions resolve_model(const Dataset& d, const RunFlags& f) {
  ModelOptions m = d.model.value_or(ModelOptions{});
  m.threads = f.threads;
  return m;
}

void apply_overrides(Dataset& d, const RunFlags& f) {
  if (f.sigma > 0.0) d.scene.gaussian_sigma = f.sigma;
  if (!f.axes.empty()) d.calibration.update_mask = AxisMask::parse(f.axes);
  d.scene.validate();
}

// Every option of the subcommand except the output path, as given or
// defaulted, so a run can be repeated from its report.
std::map<std::string, std::string> provenance(const CLI::App& app) {
  std::map<std::string, std::string> out{{"command", app.get_name()}};
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "out") continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    out[name] = value;
  }
  return out;
}

InitOptions start_options(const std::string& start) {
  InitOptions init;
  init.zero = start == "zero";
  init.filtered = start == "filtered";
  return init;
}

Volume start_volume(const Dataset& d, const std::string& start, const ModelOptions& model) {
  if (d.volume) return Volume(d.grid, *d.volume);
  return initial_volume(d.calibration, d.scene, d.transients, d.grid, start_options(start), model);
}

void write_csv(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream file(path);
  if (!file) fail(ErrorCode::io_failure, "cannot write " + path.string());
  body(file);
  if (!file) fail(ErrorCode::io_failure, "write failed: " + path.string());
}

void check_distinct(const fs::path& in, const fs::path& out) {
  std::error_code ec;
  if (fs::exists(out) && fs::equivalent(in, out, ec))
    fail(ErrorCode::invalid_argument, "output directory must differ from the input dataset");
}

Volume truth_volume(const Dataset& d) {
  if (!d.ground_truth_volume) fail(ErrorCode::missing_file, "dataset has no ground_truth_volume.f32");
  return Volume(d.grid, *d.ground_truth_volume);
}

struct Descent {
  fs::path in, out;
  RunFlags flags;
};

int run_descent(const CLI::App& app, const Descent& a, bool calibrate, std::ostream& out) {
  check_distinct(a.in, a.out);
  Dataset d = load_dataset(a.in);
  apply_overrides(d, a.flags);
  const AutocalSchedule schedule = resolve_schedule(d, a.flags);
  const ModelOptions model = resolve_model(d, a.flags);
  const Volume start = start_volume(d, a.flags.start, model);

  AutocalHooks hooks;
  if (d.ground_truth) hooks.ground_truth = &*d.ground_truth;
  auto params = provenance(app);
  params["schedule"] = schedule_to_json(schedule).dump();
  params["gaussian_sigma"] = std::to_string(d.scene.gaussian_sigma);
  hooks.on_failure = [&](const OptimizationReport& partial) {
    OptimizationReport report = partial;
    report.parameters = params;
    write_report(a.out, report);
  };

  OptimizationReport report;
  if (calibrate) {
    auto result = autocal(d.calibration, start, d.scene, d.transients, schedule, model, hooks);
    d.calibration = result.calibration;
    d.volume = result.volume.albedo;
    report = std::move(result.report);
  } else {
    auto result = reconstruct_only(d.calibration, start, d.scene, d.transients, schedule, model, hooks);
    d.volume = result.volume.albedo;
    report = std::move(result.report);
  }
  report.parameters = params;
  d.schedule = schedule;
  write_dataset(a.out, d);
  write_report(a.out, report);
  write_csv(a.out / "rmse.csv", [&](std::ostream& o) { write_rmse_csv(o, report); });

  const auto scans = all_scans(d.calibration.scan_count());
  out << "final_loss " << loss(d.calibration, Volume(d.grid, *d.volume), d.scene, d.transients, scans, model) << '\n';
  if (d.ground_truth)
    out << "scan_rmse_m " << scan_rmse(d.calibration, *d.ground_truth, d.calibration.update_mask) << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transient NLOS forward model, gradients and scan-position autocalibration", "nlos_autocal"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // simulate
  auto* sim = app.add_subcommand("simulate", "synthesize a miscalibrated desk-scale dataset");
  struct {
    fs::path out;
    std::string phantom = "hemisphere";
    int scenario = 1;
    double noise_std = 0.05;
    int scans = 16, voxels = 16, bins = 512;
    double depth = 1.0, radius = 0.32;
    double poisson = 0.0;
    RunFlags flags;
  } s;
  sim->add_option("--out", s.out, "output dataset directory")->required();
  sim->add_option("--phantom", s.phantom, "single_voxel | hemisphere | plane | sigma_glyph");
  sim->add_option("--scenario", s.scenario, "1: z noise on estimate, 2: z noise on truth, 3: xyz noise on estimate");
  sim->add_option("--noise-std", s.noise_std, "calibration noise std, meters")->check(CLI::NonNegativeNumber);
  sim->add_option("--scans", s.scans, "scan points per side")->check(CLI::PositiveNumber);
  sim->add_option("--voxels", s.voxels, "voxels per side")->check(CLI::PositiveNumber);
  sim->add_option("--bins", s.bins, "time bins")->check(CLI::PositiveNumber);
  sim->add_option("--depth", s.depth, "phantom depth from the wall, meters");
  sim->add_option("--radius", s.radius, "phantom half-size, meters")->check(CLI::PositiveNumber);
  sim->add_option("--poisson", s.poisson, "photon scale for Poisson resampling (0: noise-free)")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--axes", s.flags.axes, "calibration axes stored in the dataset");
  add_common(*sim, s.flags);

  // perturb
  auto* per = app.add_subcommand("perturb", "replace a dataset's calibration with a perturbed copy");
  struct {
    fs::path in, out;
    std::string kind = "gaussian_z";
    double std_dev = 0.05, amplitude = 0.03, period = 2.0;
    bool detection = false;
    std::uint64_t seed = 0;
  } p;
  per->add_option("--in", p.in, "input dataset")->required();
  per->add_option("--out", p.out, "output dataset")->required();
  per->add_option("--kind", p.kind, "gaussian_z | gaussian_xyz | sinusoidal_radial | parabolic_radial");
  per->add_option("--std", p.std_dev, "gaussian std, meters");
  per->add_option("--amplitude", p.amplitude, "pattern amplitude, meters");
  per->add_option("--period", p.period, "sinusoid period in normalized grid units");
  per->add_flag("--detection", p.detection, "gaussian kinds also move detection points");
  per->add_option("--seed", p.seed, "RNG seed");

  // backproject
  auto* bp = app.add_subcommand("backproject", "write the backprojection start volume");
  struct {
    fs::path in, out;
    bool filtered = false, no_scale = false;
    double wavelength = 0.0, cycles = 4.0;
    RunFlags flags;
  } b;
  bp->add_option("--in", b.in, "input dataset")->required();
  bp->add_option("--out", b.out, "output dataset")->required();
  bp->add_flag("--filtered", b.filtered, "band-pass the transients first");
  bp->add_option("--wavelength", b.wavelength, "band-pass wavelength, meters of path (0: 8 bins)");
  bp->add_option("--cycles", b.cycles, "band-pass envelope width in cycles");
  bp->add_flag("--no-scale", b.no_scale, "skip the least-squares gain fit");
  add_common(*bp, b.flags);

  // reconstruct / autocal
  Descent rec, cal;
  auto* rc = app.add_subcommand("reconstruct", "albedo-only descent with the calibration fixed");
  auto* ac = app.add_subcommand("autocal", "alternating calibration and reconstruction descent");
  for (auto [sub, a] : {std::pair{rc, &rec}, std::pair{ac, &cal}}) {
    sub->add_option("--in", a->in, "input dataset")->required();
    sub->add_option("--out", a->out, "output directory (dataset, report.json, rmse.csv)")->required();
    add_common(*sub, a->flags);
    add_schedule(*sub, a->flags);
  }

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
  struct {
    std::uint64_t seed = 0;
    int scenes = 1;
    int threads = 1;
  } g;
  gc->add_option("--seed", g.seed, "first random scene seed");
  gc->add_option("--scenes", g.scenes, "number of consecutive seeds")->check(CLI::PositiveNumber);
  gc->add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  // recoverability
  auto* rv = app.add_subcommand("recoverability", "radial gradient profile and recovery-range heatmap");
  struct {
    fs::path in, out;
    int scan = -1;
    double delta_max = 0.1, delta_step = 0.005;
    bool heatmap = false;
    int cols = 0, rows = 0;
    RunFlags flags;
  } r;
  rv->add_option("--in", r.in, "dataset with ground truth volume")->required();
  rv->add_option("--out", r.out, "output directory for CSVs")->required();
  rv->add_option("--scan", r.scan, "scan index for the profile (-1: middle of the list)");
  rv->add_option("--delta-max", r.delta_max, "largest |delta|, meters")->check(CLI::PositiveNumber);
  rv->add_option("--delta-step", r.delta_step, "delta spacing, meters")->check(CLI::PositiveNumber);
  rv->add_flag("--heatmap", r.heatmap, "also compute the per-scan recovery range");
  rv->add_option("--cols", r.cols, "scan grid columns (0: square grid)");
  rv->add_option("--rows", r.rows, "scan grid rows (0: square grid)");
  add_common(*rv, r.flags);

  // sensitivity
  auto* sn = app.add_subcommand("sensitivity", "reconstruction correlation versus calibration noise");
  struct {
    fs::path in, out;
    std::vector<double> stds{0.0, 0.01, 0.02, 0.03, 0.04};
    std::vector<std::uint64_t> seeds{0};
    std::string reconstructor = "gradient";
    RunFlags flags;
  } n;
  sn->add_option("--in", n.in, "dataset with ground truth volume")->required();
  sn->add_option("--out", n.out, "output directory for sensitivity.csv")->required();
  sn->add_option("--stds", n.stds, "noise stds, meters")->delimiter(',');
  sn->add_option("--seeds", n.seeds, "noise seeds")->delimiter(',');
  sn->add_option("--reconstructor", n.reconstructor, "backprojection | gradient | autocal");
  add_common(*sn, n.flags);
  add_schedule(*sn, n.flags);

  // metrics
  auto* mt = app.add_subcommand("metrics", "scan RMSE and volume correlation against ground truth");
  struct {
    fs::path in, report;
    std::string axes = "z";
    std::string truth;
  } m;
  mt->add_option("--in", m.in, "dataset with ground_truth.json")->required();
  mt->add_option("--report", m.report, "report.json whose final calibration is scored instead");
  mt->add_option("--axes", m.axes, "axes included in the RMSE");
  mt->add_option("--truth", m.truth, "dataset whose calibration is the truth (default: ground_truth.json)");

  // unrectify
  auto* ur = app.add_subcommand("unrectify", "add instrument-to-wall delays to confocal histograms");
  struct {
    fs::path in, out;
    bool half_bin = false, inverse = false;
  } u;
  ur->add_option("--in", u.in, "confocal dataset")->required();
  ur->add_option("--out", u.out, "output dataset")->required();
  ur->add_flag("--half-bin", u.half_bin, "time origin at a bin center");
  ur->add_flag("--inverse", u.inverse, "rectify instead");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      Setup setup = desk_setup(s.scans, s.voxels, s.bins);
      if (s.flags.sigma > 0.0) setup.scene.gaussian_sigma = s.flags.sigma;
      PhantomOptions po;
      po.depth = s.depth;
      po.radius = s.radius;
      const Volume truth_vol = make_phantom(parse_phantom(s.phantom), setup.grid, po);
      const AxisMask mask = s.flags.axes.empty() ? AxisMask::z_only() : AxisMask::parse(s.flags.axes);
      ModelOptions model;
      model.threads = s.flags.threads;
      ScenarioData data = scenario(s.scenario, setup.grid_calibration(mask), truth_vol, setup.scene, s.noise_std,
                                   s.flags.seed, model);
      if (s.poisson > 0.0) data.measured = poisson_sample(data.measured, s.poisson, s.flags.seed);
      Dataset d;
      d.scene = setup.scene;
      d.calibration = data.estimate;
      d.grid = setup.grid;
      d.transients = std::move(data.measured);
      d.ground_truth = data.truth;
      d.ground_truth_volume = truth_vol.albedo;
      write_dataset(s.out, d);
      out << "wrote " << d.calibration.scan_count() << " scans x " << d.scene.bin_count << " bins, initial scan_rmse_m "
          << scan_rmse(data.estimate, data.truth, mask) << '\n';
    } else if (*per) {
      check_distinct(p.in, p.out);
      Dataset d = load_dataset(p.in);
      PerturbationSpec spec;
      spec.kind = parse_perturbation_kind(p.kind);
      spec.std_dev = p.std_dev;
      spec.amplitude = p.amplitude;
      spec.period = p.period;
      spec.rng_seed = p.seed;
      spec.include_detection = p.detection;
      if (!d.ground_truth) d.ground_truth = d.calibration;
      d.calibration = perturb(d.calibration, spec, d.scene);
      d.volume.reset();
      write_dataset(p.out, d);
      out << "scan_rmse_m " << scan_rmse(d.calibration, *d.ground_truth, AxisMask::all()) << '\n';
    } else if (*bp) {
      check_distinct(b.in, b.out);
      Dataset d = load_dataset(b.in);
      apply_overrides(d, b.flags);
      InitOptions init;
      init.filtered = b.filtered;
      init.wavelength = b.wavelength;
      init.cycles = b.cycles;
      init.fit_scale = !b.no_scale;
      const Volume v = initial_volume(d.calibration, d.scene, d.transients, d.grid, init, resolve_model(d, b.flags));
      d.volume = v.albedo;
      write_dataset(b.out, d);
      if (d.ground_truth_volume)
        out << "correlation " << normalized_cross_correlation(v.albedo, *d.ground_truth_volume) << '\n';
    } else if (*rc) {
      return run_descent(*rc, rec, false, out);
    } else if (*ac) {
      return run_descent(*ac, cal, true, out);
    } else if (*gc) {
      ModelOptions model;
      model.threads = g.threads;
      double worst = 0.0;
      for (int i = 0; i < g.scenes; ++i) {
        const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(i);
        const GradcheckResult res = finite_difference_check(random_scene(seed), 1e-4, 1e-5, model);
        out << "seed " << seed << " max_rel_error " << res.max_rel() << " (rho " << res.max_rel_rho << ", scan "
            << res.max_rel_scan << ", detection " << res.max_rel_detect << ", " << res.components
            << " components)\n";
        worst = std::max(worst, res.max_rel());
      }
      const bool ok = worst < 1e-4;
      out << (ok ? "PASS" : "FAIL") << " max_rel_error " << worst << " threshold 1e-4\n";
      return ok ? 0 : 1;
    } else if (*rv) {
      Dataset d = load_dataset(r.in);
      apply_overrides(d, r.flags);
      const CalibrationState truth = d.ground_truth.value_or(d.calibration);
      const Volume vol = truth_volume(d);
      const ModelOptions model = resolve_model(d, r.flags);
      const std::size_t scan =
          r.scan < 0 ? truth.scan_count() / 2 : static_cast<std::size_t>(r.scan);
      std::vector<double> deltas;
      const int steps = static_cast<int>(std::floor(r.delta_max / r.delta_step + 1e-9));
      for (int k = -steps; k <= steps; ++k) deltas.push_back(k * r.delta_step);
      const auto profile = recoverability_profile(d.scene, truth, vol, scan, deltas, model);
      fs::create_directories(r.out);
      write_csv(r.out / "recoverability.csv", [&](std::ostream& o) { write_recoverability_csv(o, profile); });
      if (r.heatmap) {
        int cols = r.cols, rows = r.rows;
        if (cols <= 0 || rows <= 0) {
          cols = rows = static_cast<int>(std::lround(std::sqrt(static_cast<double>(truth.scan_count()))));
        }
        const RecoveryMap map = recoverability_heatmap(d.scene, truth, vol, cols, rows, deltas, model);
        write_csv(r.out / "heatmap.csv", [&](std::ostream& o) { write_heatmap_csv(o, map); });
        out << "mean_range_left_m " << map.mean_range(false) << "\nmean_range_right_m " << map.mean_range(true)
            << '\n';
      }
    } else if (*sn) {
      Dataset d = load_dataset(n.in);
      apply_overrides(d, n.flags);
      CalibrationState grid_cal = d.ground_truth.value_or(d.calibration);
      if (!n.flags.axes.empty()) grid_cal.update_mask = d.calibration.update_mask;
      SweepConfig config;
      if (n.reconstructor == "backprojection") config.reconstructor = Reconstructor::backprojection;
      else if (n.reconstructor == "gradient") config.reconstructor = Reconstructor::gradient;
      else if (n.reconstructor == "autocal") config.reconstructor = Reconstructor::autocal;
      else fail(ErrorCode::invalid_argument, "unknown reconstructor '" + n.reconstructor + "'");
      config.schedule = resolve_schedule(d, n.flags);
      config.init = start_options(n.flags.start);
      config.seeds = n.seeds;
      const auto rows =
          noise_sensitivity_sweep(d.scene, grid_cal, truth_volume(d), n.stds, config, resolve_model(d, n.flags));
      fs::create_directories(n.out);
      write_csv(n.out / "sensitivity.csv", [&](std::ostream& o) { write_sensitivity_csv(o, rows); });
      write_sensitivity_csv(out, rows);
    } else if (*mt) {
      const Dataset d = load_dataset(m.in);
      CalibrationState estimate = d.calibration;
      if (!m.report.empty()) {
        std::ifstream file(m.report);
        if (!file) fail(ErrorCode::missing_file, "cannot open " + m.report.string());
        nlohmann::json j;
        try {
          file >> j;
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorCode::parse_error, m.report.string() + ": " + e.what());
        }
        estimate = report_from_json(j).final_calibration;
      }
      CalibrationState truth;
      if (!m.truth.empty()) truth = load_dataset(m.truth).calibration;
      else if (d.ground_truth) truth = *d.ground_truth;
      else fail(ErrorCode::missing_file, "no ground truth: pass --truth or add ground_truth.json");
      out << "scan_rmse_m " << scan_rmse(estimate, truth, AxisMask::parse(m.axes)) << '\n';
      if (d.volume && d.ground_truth_volume)
        out << "correlation " << normalized_cross_correlation(*d.volume, *d.ground_truth_volume) << '\n';
    } else if (*ur) {
      check_distinct(u.in, u.out);
      Dataset d = load_dataset(u.in);
      UnrectifyOptions opts;
      opts.half_bin_offset = u.half_bin;
      d.transients = u.inverse ? rectify_confocal(d.transients, d.calibration, d.scene, opts)
                               : unrectify_confocal(d.transients, d.calibration, d.scene, opts);
      write_dataset(u.out, d);
    }
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "error (io_failure): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace nlos::cli
