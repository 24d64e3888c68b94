#include "photoba/selfalign.h"

#include <cmath>
#include <numbers>
#include <cstdio>
#include <ostream>
#include <random>

#include "photoba/error.h"

namespace photoba {
namespace {

BAProblem TwoNodeProblem(const Capture& capture, const Pose& start) {
  SensorTrack track;
  track.extrinsics = capture.extrinsics;
  FrameNode a;
  a.id = 0;
  a.pyramid = capture.first;
  FrameNode b;
  b.id = 1;
  b.pose_guess = start;
  b.pyramid = capture.second;
  b.timestamp = 1.0;
  track.graph.nodes = {a, b};
  track.graph.edges = {{0, 1, EdgeKind::kCovisibility}};
  BAProblem problem;
  problem.sensors.push_back(std::move(track));
  return problem;
}

const Capture& Require(const std::optional<Capture>& c, const char* what) {
  if (!c) {
    throw Error(ErrorKind::kConfig, std::string("no ") + what + " capture");
  }
  return *c;
}

Eigen::Vector3d RandomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    for (int a = 0; a < 3; ++a) v[a] = normal(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace

const char* AlignModeName(AlignMode mode) {
  switch (mode) {
    case AlignMode::kPinhole:
      return "pinhole";
    case AlignMode::kSpherical:
      return "spherical";
    case AlignMode::kCoupled:
      return "coupled";
    case AlignMode::kConsecutive:
      return "consecutive";
  }
  return "?";
}

AlignMode ParseAlignMode(const std::string& name) {
  for (AlignMode m : {AlignMode::kPinhole, AlignMode::kSpherical,
                      AlignMode::kCoupled, AlignMode::kConsecutive}) {
    if (name == AlignModeName(m)) return m;
  }
  throw Error(ErrorKind::kConfig, "unknown align mode '" + name + "'");
}

Capture CaptureFromFrame(const LoadedFrame& frame, const SensorConfig& sensor,
                         const std::vector<double>& scales,
                         const NormalConfig& normals, double intensity_sigma,
                         double depth_sigma, std::uint64_t seed,
                         int threads) {
  Capture c;
  c.extrinsics.offset = sensor.extrinsics;
  c.first = std::make_shared<const CuePyramid>(BuildPyramid(
      frame.intensity, frame.depth, sensor.intrinsics, scales, normals,
      threads));
  if (intensity_sigma <= 0.0 && depth_sigma <= 0.0) {
    c.second = c.first;
    return c;
  }
  Grid<double> intensity = frame.intensity;
  Grid<double> depth = frame.depth;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : intensity.data()) v += intensity_sigma * normal(rng);
  for (double& d : depth.data()) {
    const double n = normal(rng);
    if (d > 0.0) d += depth_sigma * n;
  }
  c.second = std::make_shared<const CuePyramid>(BuildPyramid(
      intensity, depth, sensor.intrinsics, scales, normals, threads));
  return c;
}

AlignOutcome AlignCaptures(const SelfAlignInput& input, AlignMode mode,
                           const Pose& start, const SolverConfig& config) {
  const std::vector<Pose> initial = {Pose(), start};
  SolveResult result;
  try {
    switch (mode) {
      case AlignMode::kPinhole:
        result = SolveHierarchical(
            TwoNodeProblem(Require(input.pinhole, "pinhole"), start), initial,
            config);
        break;
      case AlignMode::kSpherical:
        result = SolveHierarchical(
            TwoNodeProblem(Require(input.spherical, "spherical"), start),
            initial, config);
        break;
      case AlignMode::kCoupled:
      case AlignMode::kConsecutive:
        result = SolveFusion(
            TwoNodeProblem(Require(input.pinhole, "pinhole"), start),
            TwoNodeProblem(Require(input.spherical, "spherical"), start),
            mode == AlignMode::kCoupled ? FusionMode::kCoupled
                                        : FusionMode::kConsecutive,
            initial, config);
        break;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    return {start.translation().norm(), RotationAngle(start.rotation()), true};
  }
  const Pose& p = result.poses[1];
  return {p.translation().norm(), RotationAngle(p.rotation()), false};
}

std::vector<double> Linspace(double max, int steps) {
  if (steps < 1) throw Error(ErrorKind::kConfig, "grid needs >= 1 step");
  if (!(max >= 0.0) || !std::isfinite(max)) {
    throw Error(ErrorKind::kConfig, "grid maximum must be finite and >= 0");
  }
  std::vector<double> v(steps, 0.0);
  for (int k = 0; k < steps; ++k) {
    v[k] = steps == 1 ? max : max * k / (steps - 1);
  }
  return v;
}

BasinGrid SweepBasin(const SelfAlignInput& input, const BasinSpec& spec,
                     const SolverConfig& config) {
  if (spec.translations.empty() || spec.rotations.empty() ||
      spec.modes.empty()) {
    throw Error(ErrorKind::kConfig, "empty perturbation grid");
  }
  for (const double r : spec.rotations) {
    if (!(r >= 0.0 && r < std::numbers::pi)) {
      throw Error(ErrorKind::kConfig, "rotations must lie in [0, pi)");
    }
  }
  for (const double t : spec.translations) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw Error(ErrorKind::kConfig, "translations must be finite and >= 0");
    }
  }
  BasinGrid grid;
  grid.translations = spec.translations;
  grid.rotations = spec.rotations;
  grid.threshold = spec.threshold;
  const int nr = static_cast<int>(spec.rotations.size());
  const int nt = static_cast<int>(spec.translations.size());

  std::vector<Pose> starts;
  for (int r = 0; r < nr; ++r) {
    for (int t = 0; t < nt; ++t) {
      std::mt19937_64 rng(spec.seed * 1000003ULL + r * nt + t);
      const Eigen::Vector3d dir_t = RandomUnit(rng);
      const Eigen::Vector3d dir_r = RandomUnit(rng);
      starts.push_back(Exp(Perturbation::FromTranslationRotation(
          spec.translations[t] * dir_t, spec.rotations[r] * dir_r)));
    }
  }
  for (AlignMode mode : spec.modes) {
    grid.modes.push_back(AlignModeName(mode));
    std::vector<std::vector<AlignOutcome>> cells(nr,
                                                 std::vector<AlignOutcome>(nt));
    for (int r = 0; r < nr; ++r) {
      for (int t = 0; t < nt; ++t) {
        cells[r][t] = AlignCaptures(input, mode, starts[r * nt + t], config);
      }
    }
    grid.cells.push_back(std::move(cells));
  }
  return grid;
}

void WriteBasinGrid(const BasinGrid& grid, std::ostream& out) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "# photoba basin grid: rows = rotations, columns = translations,\n"
      << "# cells = log10(mean(translation error [m], rotation error [rad]))\n";
  out << "translations";
  for (const double t : grid.translations) out << ' ' << num(t);
  out << "\nrotations";
  for (const double r : grid.rotations) out << ' ' << num(r);
  out << "\nthreshold " << num(grid.threshold) << '\n';
  for (std::size_t m = 0; m < grid.modes.size(); ++m) {
    out << "mode " << grid.modes[m] << '\n';
    for (const auto& row : grid.cells[m]) {
      for (std::size_t t = 0; t < row.size(); ++t) {
        // Exact zero error maps to the smallest positive double.
        const double e = std::max(row[t].mean(), 4.9406564584124654e-324);
        out << (t ? " " : "") << num(std::log10(e));
      }
      out << '\n';
    }
  }
}

}  // namespace photoba
