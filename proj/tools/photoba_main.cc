// photoba: photometric bundle adjustment command line.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "photoba/config_json.h"
#include "photoba/dataset_io.h"
#include "photoba/error.h"
#include "photoba/evaluation.h"
#include "photoba/match_graph.h"
#include "photoba/parallel.h"
#include "photoba/photometric_ba.h"
#include "photoba/selfalign.h"
#include "photoba/synthetic.h"

namespace fs = std::filesystem;
using namespace photoba;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kIo:
    case ErrorKind::kParse:
      return 3;
    case ErrorKind::kUnderConstrained:
      return 4;
    case ErrorKind::kNoAssociation:
      return 5;
    case ErrorKind::kDegenerateAlignment:
      return 6;
    default:
      return 1;
  }
}

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

// Solver and graph flags shared by refine, graph-dump and selfalign. Only
// flags given on the command line override the manifest.
struct TuningFlags {
  CLI::Option* levels = nullptr;
  CLI::Option* stride = nullptr;
  CLI::Option* huber = nullptr;
  CLI::Option* max_angle = nullptr;
  CLI::Option* max_translation = nullptr;
  CLI::Option* min_overlap = nullptr;
  CLI::Option* iterations = nullptr;
  CLI::Option* termination = nullptr;
  CLI::Option* scales = nullptr;
  int num_levels = 0;
  int pixel_stride = 1;
  double huber_delta = 0.1;
  double max_angle_deg = 30.0;
  double max_translation_m = 1.0;
  double min_overlap_ratio = 1.0 / 3.0;
  std::vector<int> max_iterations;
  double termination_rel = 1e-4;
  std::vector<double> pyramid_scales;

  void Add(CLI::App* app) {
    levels = app->add_option("--levels", num_levels,
                             "Number of finest pyramid levels to optimize "
                             "(0 = all)");
    stride = app->add_option("--stride", pixel_stride, "Source pixel stride");
    huber = app->add_option("--huber-delta", huber_delta, "Huber threshold");
    max_angle = app->add_option("--max-angle-deg", max_angle_deg,
                                "Covisibility: max relative rotation");
    max_translation = app->add_option("--max-translation", max_translation_m,
                                      "Covisibility: max relative translation");
    min_overlap = app->add_option("--min-overlap", min_overlap_ratio,
                                  "Covisibility: min overlap ratio");
    iterations = app->add_option("--max-iterations", max_iterations,
                                 "Iteration caps per level, coarse to fine")
                     ->delimiter(',');
    termination = app->add_option("--termination", termination_rel,
                                   "Relative error decrease to stop a level");
    scales = app->add_option("--scales", pyramid_scales,
                             "Pyramid scales, e.g. 0.125,0.25,0.5")
                 ->delimiter(',');
  }

  void Apply(DatasetManifest* m) const {
    if (levels->count()) m->solver.num_levels = num_levels;
    if (stride->count()) m->solver.pixel_stride = pixel_stride;
    if (huber->count()) m->solver.huber_delta = huber_delta;
    if (max_angle->count()) m->graph.max_angle = max_angle_deg * kDeg;
    if (max_translation->count()) m->graph.max_translation = max_translation_m;
    if (min_overlap->count()) m->graph.min_overlap_ratio = min_overlap_ratio;
    if (iterations->count()) m->solver.max_iterations_per_level = max_iterations;
    if (termination->count()) m->solver.termination_rel_decrease = termination_rel;
    if (scales->count()) {
      m->pyramid_scales = pyramid_scales;
      std::sort(m->pyramid_scales.begin(), m->pyramid_scales.end());
    }
    m->solver.Validate();
  }
};

Dataset LoadWithFlags(const std::string& manifest, const TuningFlags& flags,
                      int threads) {
  Dataset ds = LoadDataset(manifest, threads);
  flags.Apply(&ds.manifest);
  ds.manifest.solver.threads = threads;
  return ds;
}

SensorTrack MakeTrack(const Dataset& ds, int sensor, int threads) {
  SensorTrack track;
  track.extrinsics.offset = ds.manifest.sensors[sensor].extrinsics;
  track.graph = BuildGraph(BuildFrameNodes(ds, sensor, NormalConfig(), threads),
                           ds.manifest.graph, ds.manifest.sequential,
                           track.extrinsics.offset, threads);
  return track;
}

int FindSensor(const Dataset& ds, const std::string& id) {
  for (std::size_t s = 0; s < ds.manifest.sensors.size(); ++s) {
    if (ds.manifest.sensors[s].id == id) return static_cast<int>(s);
  }
  throw Error(ErrorKind::kConfig, "no sensor '" + id + "' in the manifest");
}

int FindModel(const Dataset& ds, ProjectionModel model) {
  int found = -1;
  for (std::size_t s = 0; s < ds.manifest.sensors.size(); ++s) {
    if (ds.manifest.sensors[s].intrinsics.model == model) {
      if (found >= 0) return -2;
      found = static_cast<int>(s);
    }
  }
  return found;
}

struct RefineArgs {
  std::string manifest;
  std::string out = ".";
  std::string fusion = "coupled";
  int threads = 1;
};

int CmdRefine(const RefineArgs& args, const TuningFlags& flags) {
  const Dataset ds = LoadWithFlags(args.manifest, flags, args.threads);
  const SolverConfig& config = ds.manifest.solver;
  const int num_sensors = static_cast<int>(ds.manifest.sensors.size());

  std::vector<SensorTrack> tracks;
  std::size_t edges = 0;
  for (int s = 0; s < num_sensors; ++s) {
    tracks.push_back(MakeTrack(ds, s, args.threads));
    edges += tracks.back().graph.edges.size();
  }

  fs::create_directories(args.out);
  std::ofstream log(fs::path(args.out) / "iterations.log");
  if (!log) throw Error(ErrorKind::kIo, "cannot write iterations.log");
  log << "# level iteration lambda error valid_blocks accepted\n";
  const IterationLogger logger = [&](const IterationRecord& r) {
    log << FormatIterationRecord(r) << '\n';
  };

  std::vector<Pose> initial;
  for (const TimedPose& tp : ds.initial) initial.push_back(tp.pose);

  SolveResult result;
  std::string mode = "single";
  if (num_sensors == 1) {
    BAProblem problem;
    problem.sensors = tracks;
    result = SolveHierarchical(problem, initial, config, logger);
  } else {
    const FusionMode fusion = ParseFusionMode(args.fusion);
    mode = FusionModeName(fusion);
    const int pin = FindModel(ds, ProjectionModel::kPinhole);
    const int sph = FindModel(ds, ProjectionModel::kSpherical);
    if (num_sensors == 2 && pin >= 0 && sph >= 0) {
      BAProblem rgbd, lidar;
      rgbd.sensors = {tracks[pin]};
      lidar.sensors = {tracks[sph]};
      result = SolveFusion(rgbd, lidar, fusion, initial, config, logger);
    } else if (fusion == FusionMode::kCoupled) {
      BAProblem problem;
      problem.sensors = tracks;
      result = SolveHierarchical(problem, initial, config, logger);
    } else {
      throw Error(ErrorKind::kConfig,
                  "consecutive fusion needs one pinhole and one spherical "
                  "sensor");
    }
  }

  Trajectory refined = ds.initial;
  for (std::size_t k = 0; k < refined.size(); ++k) {
    refined[k].pose = result.poses[k];
  }
  SaveTrajectory(refined, fs::path(args.out) / "trajectory_refined.txt");

  nlohmann::json report;
  std::ostringstream text;
  report["mode"] = mode;
  report["edges"] = edges;
  report["poses"] = refined.size();
  text << "mode " << mode << "\nposes " << refined.size() << "\nedges "
       << edges << '\n';
  std::optional<std::pair<double, double>> ate;
  if (ds.groundtruth) {
    try {
      ate.emplace(AteRmse(ds.initial, *ds.groundtruth),
                  AteRmse(refined, *ds.groundtruth));
    } catch (const Error& e) {
      // The refinement itself succeeded; only the report loses its ATE.
      if (e.kind() != ErrorKind::kDegenerateAlignment &&
          e.kind() != ErrorKind::kNoAssociation) {
        throw;
      }
      std::cerr << "photoba: no ATE in the report: " << e.what() << '\n';
    }
  }
  if (ate) {
    const auto [before, after] = *ate;
    report["initial_ate"] = before;
    report["final_ate"] = after;
    text << "initial_ate " << Num(before) << "\nfinal_ate " << Num(after)
         << '\n';
    if (before > 0.0) {
      report["ate_reduction"] = 1.0 - after / before;
      text << "ate_reduction " << Num(1.0 - after / before) << '\n';
    }
  }
  nlohmann::json levels = nlohmann::json::array();
  for (const LevelResult& lr : result.levels) {
    levels.push_back({{"level", lr.level},
                      {"scale", lr.scale},
                      {"iterations", lr.iterations},
                      {"seconds", lr.seconds},
                      {"accepted_errors", lr.accepted_errors}});
    text << "level " << lr.level << " scale " << Num(lr.scale)
         << " iterations " << lr.iterations << " seconds " << Num(lr.seconds)
         << " errors";
    for (const double e : lr.accepted_errors) text << ' ' << Num(e);
    text << '\n';
  }
  report["levels"] = levels;
  report["config"] = {
      {"solver", SolverConfigToJson(config)},
      {"graph", GraphCriteriaToJson(ds.manifest.graph, ds.manifest.sequential)},
      {"pyramid_scales", ds.manifest.pyramid_scales},
      {"threads", args.threads}};
  WriteFile(fs::path(args.out) / "report.txt", text.str());
  WriteFile(fs::path(args.out) / "report.json", report.dump(2) + "\n");
  std::cout << text.str();
  return 0;
}

int CmdEvaluate(const std::string& est, const std::string& ref, double max_dt,
                const std::string& json_path) {
  const AteResult r =
      ComputeAte(LoadTrajectory(est), LoadTrajectory(ref), max_dt);
  std::cout << "ate_rmse " << Num(r.rmse) << "\nrotation_rmse "
            << Num(r.rotation_rmse) << "\npairs " << r.pairs << '\n';
  if (!json_path.empty()) {
    const nlohmann::json j = {{"ate_rmse", r.rmse},
                              {"rotation_rmse", r.rotation_rmse},
                              {"pairs", r.pairs}};
    WriteFile(json_path, j.dump(2) + "\n");
  }
  return 0;
}

struct SynthArgs {
  std::string out;
  std::string scene;
  std::string sensors = "rgbd";
  int poses = 10;
  double sigma_t = 0.05;
  double sigma_r_deg = 2.0;
  double intensity_noise = 0.0;
  double depth_noise = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
};

int CmdSynth(const SynthArgs& a) {
  SyntheticSpec spec;
  if (!a.scene.empty()) {
    std::ifstream in(a.scene);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + a.scene);
    std::ostringstream ss;
    ss << in.rdbuf();
    spec = SyntheticSpecFromJson(ss.str());
  } else {
    if (a.sensors != "rgbd" && a.sensors != "lidar" && a.sensors != "both") {
      throw Error(ErrorKind::kConfig, "--sensors must be rgbd, lidar or both");
    }
    spec = BoxRoomSpec(a.poses, a.sensors != "lidar", a.sensors != "rgbd",
                       a.sigma_t, a.sigma_r_deg * kDeg, a.seed);
    for (SyntheticSensor& s : spec.sensors) {
      s.intensity_noise = a.intensity_noise;
      s.depth_noise = a.depth_noise;
    }
  }
  const fs::path manifest = GenerateSynthetic(spec, a.out, a.threads);
  std::cout << manifest.string() << '\n';
  return 0;
}

struct SelfAlignArgs {
  std::string manifest;
  std::string out = "basin.txt";
  int frame = 0;
  double t_max = 0.3;
  double r_max = 0.3;
  int steps = 5;
  std::vector<std::string> modes;
  // Noise of the second capture, {intensity, depth}, per projection model.
  std::vector<double> pinhole_noise = {0.002, 0.0005};
  std::vector<double> spherical_noise = {0.02, 0.01};
  double threshold = 1e-2;
  std::uint64_t seed = 1;
  int threads = 1;
};

int CmdSelfAlign(const SelfAlignArgs& a, const TuningFlags& flags) {
  const Dataset ds = LoadWithFlags(a.manifest, flags, a.threads);
  if (a.frame < 0 || a.frame >= static_cast<int>(ds.initial.size())) {
    throw Error(ErrorKind::kConfig, "--frame out of range");
  }
  SelfAlignInput input;
  const int pin = FindModel(ds, ProjectionModel::kPinhole);
  const int sph = FindModel(ds, ProjectionModel::kSpherical);
  if (pin == -2 || sph == -2) {
    throw Error(ErrorKind::kConfig, "selfalign needs at most one sensor per model");
  }
  auto capture = [&](int s, const std::vector<double>& noise,
                     std::uint64_t salt) {
    return CaptureFromFrame(ds.frames[s][a.frame], ds.manifest.sensors[s],
                            ds.manifest.pyramid_scales, NormalConfig(),
                            noise[0], noise[1], a.seed * 7919ULL + salt,
                            a.threads);
  };
  if (pin >= 0) input.pinhole = capture(pin, a.pinhole_noise, 1);
  if (sph >= 0) input.spherical = capture(sph, a.spherical_noise, 2);

  BasinSpec spec;
  spec.translations = Linspace(a.t_max, a.steps);
  spec.rotations = Linspace(a.r_max, a.steps);
  spec.seed = a.seed;
  spec.threshold = a.threshold;
  if (a.modes.empty()) {
    if (input.pinhole) spec.modes.push_back(AlignMode::kPinhole);
    if (input.spherical) spec.modes.push_back(AlignMode::kSpherical);
    if (input.pinhole && input.spherical) {
      spec.modes.push_back(AlignMode::kCoupled);
      spec.modes.push_back(AlignMode::kConsecutive);
    }
  } else {
    for (const std::string& m : a.modes) spec.modes.push_back(ParseAlignMode(m));
  }
  const BasinGrid grid = SweepBasin(input, spec, ds.manifest.solver);
  std::ofstream out(a.out);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + a.out);
  WriteBasinGrid(grid, out);
  for (std::size_t m = 0; m < grid.modes.size(); ++m) {
    int converged = 0;
    for (std::size_t r = 0; r < grid.rotations.size(); ++r) {
      for (std::size_t t = 0; t < grid.translations.size(); ++t) {
        converged += grid.Converged(m, r, t);
      }
    }
    std::cout << grid.modes[m] << " converged " << converged << "/"
              << grid.rotations.size() * grid.translations.size() << '\n';
  }
  return 0;
}

int CmdGraphDump(const std::string& manifest, const std::string& sensor,
                 const std::string& out, const TuningFlags& flags,
                 int threads) {
  const Dataset ds = LoadWithFlags(manifest, flags, threads);
  const int s = sensor.empty() ? 0 : FindSensor(ds, sensor);
  const SensorTrack track = MakeTrack(ds, s, threads);
  if (out.empty()) {
    WriteGraph(track.graph, std::cout);
  } else {
    std::ofstream file(out);
    if (!file) throw Error(ErrorKind::kIo, "cannot write " + out);
    WriteGraph(track.graph, file);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photometric bundle adjustment for RGB-D and LiDAR"};
  app.require_subcommand(1);
  int threads = DefaultThreadCount();
  app.add_option("--threads", threads,
                 "Worker threads (default: $PHOTOBA_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  TuningFlags refine_flags, align_flags, graph_flags;

  RefineArgs refine;
  auto* c_refine = app.add_subcommand("refine", "Refine a trajectory");
  c_refine->add_option("manifest", refine.manifest, "manifest.json")->required();
  c_refine->add_option("-o,--out", refine.out, "Output directory");
  c_refine->add_option("--fusion", refine.fusion,
                       "Two-sensor schedule: coupled or consecutive");
  c_refine->add_option("--threads", threads, "Worker threads");
  refine_flags.Add(c_refine);

  std::string est, ref, eval_json;
  double max_dt = kDefaultMaxDt;
  auto* c_eval = app.add_subcommand("evaluate", "ATE of a trajectory");
  c_eval->add_option("estimate", est, "Estimated trajectory")->required();
  c_eval->add_option("reference", ref, "Reference trajectory")->required();
  c_eval->add_option("--max-dt", max_dt, "Association window in seconds");
  c_eval->add_option("--json", eval_json, "Also write the result as JSON");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render a synthetic dataset");
  c_synth->add_option("-o,--out", synth.out, "Output directory")->required();
  c_synth->add_option("--scene", synth.scene, "Scene spec JSON");
  c_synth->add_option("--sensors", synth.sensors, "rgbd, lidar or both");
  c_synth->add_option("--poses", synth.poses, "Number of poses");
  c_synth->add_option("--sigma-t", synth.sigma_t, "Initial-guess noise [m]");
  c_synth->add_option("--sigma-r-deg", synth.sigma_r_deg,
                      "Initial-guess noise [deg]");
  c_synth->add_option("--intensity-noise", synth.intensity_noise);
  c_synth->add_option("--depth-noise", synth.depth_noise);
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--threads", threads, "Worker threads");

  SelfAlignArgs align;
  auto* c_align = app.add_subcommand("selfalign", "Convergence-basin sweep");
  c_align->add_option("manifest", align.manifest, "manifest.json")->required();
  c_align->add_option("-o,--out", align.out, "Grid file");
  c_align->add_option("--frame", align.frame, "Frame index to align");
  c_align->add_option("--t-max", align.t_max, "Largest translation [m]");
  c_align->add_option("--r-max", align.r_max, "Largest rotation [rad]");
  c_align->add_option("--steps", align.steps, "Grid steps per axis");
  c_align->add_option("--modes", align.modes, "Subset of modes")
      ->delimiter(',');
  c_align->add_option("--pinhole-noise", align.pinhole_noise,
                      "Second-capture noise: intensity,depth")
      ->delimiter(',')
      ->expected(2);
  c_align->add_option("--spherical-noise", align.spherical_noise,
                      "Second-capture noise: intensity,range")
      ->delimiter(',')
      ->expected(2);
  c_align->add_option("--threshold", align.threshold,
                      "Convergence threshold on the mean error");
  c_align->add_option("--seed", align.seed, "Random seed");
  c_align->add_option("--threads", threads, "Worker threads");
  align_flags.Add(c_align);

  std::string graph_manifest, graph_sensor, graph_out;
  auto* c_graph = app.add_subcommand("graph-dump", "Write the match graph");
  c_graph->add_option("manifest", graph_manifest, "manifest.json")->required();
  c_graph->add_option("--sensor", graph_sensor, "Sensor id (default: first)");
  c_graph->add_option("-o,--out", graph_out, "Output file (default: stdout)");
  c_graph->add_option("--threads", threads, "Worker threads");
  graph_flags.Add(c_graph);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads < 1) throw Error(ErrorKind::kConfig, "--threads must be >= 1");
    if (*c_refine) {
      refine.threads = threads;
      return CmdRefine(refine, refine_flags);
    }
    if (*c_eval) return CmdEvaluate(est, ref, max_dt, eval_json);
    if (*c_synth) {
      synth.threads = threads;
      return CmdSynth(synth);
    }
    if (*c_align) {
      align.threads = threads;
      return CmdSelfAlign(align, align_flags);
    }
    if (*c_graph) {
      return CmdGraphDump(graph_manifest, graph_sensor, graph_out, graph_flags,
                          threads);
    }
  } catch (const Error& e) {
    std::cerr << "photoba: " << e.what() << '\n';
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "photoba: internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
