#include "photoba/photometric_ba.h"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "photoba/error.h"
#include "photoba/parallel.h"

namespace photoba {
namespace {

constexpr std::size_t kPointsPerTask = 4096;

using Matrix12d = Eigen::Matrix<double, 12, 12>;
using Vector12d = Eigen::Matrix<double, 12, 1>;

// Source points of every frame of every sensor at one level.
struct LevelData {
  int level = 0;
  double scale = 1.0;
  std::vector<std::vector<std::vector<SourcePoint>>> points;  // [s][frame]
};

struct Task {
  int sensor;
  int src;
  int dst;
  std::size_t begin;
  std::size_t end;
};

struct Partial {
  Matrix12d h = Matrix12d::Zero();
  Vector12d b = Vector12d::Zero();
  double error = 0.0;
  std::size_t count = 0;
};

LevelData PrepareLevel(const BAProblem& problem, int level,
                       const SolverConfig& config) {
  if (level < 0 || level >= problem.num_levels()) {
    throw Error(ErrorKind::kConfig,
                "level " + std::to_string(level) + " out of range");
  }
  LevelData data;
  data.level = level;
  data.scale = problem.sensors.front().graph.nodes.front().pyramid->scales[level];
  data.points.resize(problem.sensors.size());
  for (std::size_t s = 0; s < problem.sensors.size(); ++s) {
    const auto& nodes = problem.sensors[s].graph.nodes;
    data.points[s].resize(nodes.size());
    ParallelFor(nodes.size(), config.threads, [&](std::size_t f) {
      data.points[s][f] = CollectSourcePoints(nodes[f].pyramid->levels[level],
                                              config.pixel_stride);
    });
  }
  return data;
}

std::vector<Task> MakeTasks(const BAProblem& problem, const LevelData& data) {
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < problem.sensors.size(); ++s) {
    for (const Edge& e : problem.sensors[s].graph.edges) {
      for (const auto& [src, dst] : {std::pair{e.i, e.j}, std::pair{e.j, e.i}}) {
        const std::size_t n = data.points[s][src].size();
        for (std::size_t begin = 0; begin < n; begin += kPointsPerTask) {
          tasks.push_back({static_cast<int>(s), src, dst, begin,
                           std::min(n, begin + kPointsPerTask)});
        }
      }
    }
  }
  return tasks;
}

int VariableIndex(int pose, int gauge) {
  if (pose == gauge) return -1;
  return pose < gauge ? pose : pose - 1;
}

NormalEquations Accumulate(const BAProblem& problem, const LevelData& data,
                           std::span<const Pose> poses,
                           const SolverConfig& config, bool with_jacobians) {
  const std::vector<Task> tasks = MakeTasks(problem, data);
  std::vector<Partial> partials(tasks.size());
  const double tolerance = config.occlusion_depth_tolerance / data.scale;

  ParallelFor(tasks.size(), config.threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    const SensorTrack& track = problem.sensors[task.sensor];
    const CueImage& dst = track.graph.nodes[task.dst].pyramid->levels[data.level];
    const PairContext ctx(poses[task.src], poses[task.dst],
                          track.extrinsics.offset, dst.intrinsics());
    const Vector5d omega = track.omega.value_or(config.omega).Diagonal();
    const double delta = track.huber_delta.value_or(config.huber_delta);
    const auto& points = data.points[task.sensor][task.src];

    Partial& acc = partials[t];
    ResidualBlock block;
    Eigen::Matrix<double, 5, 12> jac;
    for (std::size_t k = task.begin; k < task.end; ++k) {
      if (!EvaluateBlock(ctx, points[k], dst, with_jacobians, &block)) continue;
      if (IsOccluded(block, tolerance)) continue;
      const Vector5d weighted = omega.cwiseProduct(block.residual);
      const double sq = block.residual.dot(weighted);
      const double w = HuberWeight(std::sqrt(sq), delta);
      acc.error += HuberCost(sq, delta);
      ++acc.count;
      if (!with_jacobians) continue;
      jac.leftCols<6>() = block.jac_i;
      jac.rightCols<6>() = block.jac_j;
      const Eigen::Matrix<double, 12, 5> jt_w =
          jac.transpose() * (w * omega).asDiagonal();
      acc.h.noalias() += jt_w * jac;
      acc.b.noalias() += jt_w * block.residual;
    }
  });

  const int gauge = problem.gauge;
  const int dim = 6 * (problem.num_poses() - 1);
  NormalEquations ne;
  if (with_jacobians) {
    ne.hessian = Eigen::MatrixXd::Zero(dim, dim);
    ne.gradient = Eigen::VectorXd::Zero(dim);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Partial& p = partials[t];
    ne.error += p.error;
    ne.valid_blocks += p.count;
    if (!with_jacobians || p.count == 0) continue;
    const int var[2] = {VariableIndex(tasks[t].src, gauge),
                        VariableIndex(tasks[t].dst, gauge)};
    for (int a = 0; a < 2; ++a) {
      if (var[a] < 0) continue;
      ne.gradient.segment<6>(6 * var[a]) += p.b.segment<6>(6 * a);
      for (int c = 0; c < 2; ++c) {
        if (var[c] < 0) continue;
        ne.hessian.block<6, 6>(6 * var[a], 6 * var[c]) +=
            p.h.block<6, 6>(6 * a, 6 * c);
      }
    }
  }
  return ne;
}

// Union-find over all sensors' edges; every pose must reach the gauge and
// at least one edge must exist.
void CheckConnectivity(const BAProblem& problem) {
  const int n = problem.num_poses();
  std::size_t edges = 0;
  for (const SensorTrack& track : problem.sensors) {
    edges += track.graph.edges.size();
  }
  if (edges == 0) {
    throw Error(ErrorKind::kUnderConstrained, "the match graph has no edges");
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const SensorTrack& track : problem.sensors) {
    for (const Edge& e : track.graph.edges) parent[find(e.i)] = find(e.j);
  }
  const int root = find(problem.gauge);
  std::vector<int> detached;
  for (int k = 0; k < n; ++k) {
    if (find(k) != root) detached.push_back(k);
  }
  if (detached.empty()) return;
  std::string names;
  for (const int k : detached) names += (names.empty() ? "" : ", ") + std::to_string(k);
  throw Error(ErrorKind::kUnderConstrained,
              "poses {" + names + "} are not connected to gauge pose " +
                  std::to_string(problem.gauge));
}

void CheckObserved(const BAProblem& problem, const NormalEquations& ne,
                   int level) {
  const int n = problem.num_poses();
  for (int k = 0; k < n; ++k) {
    const int v = VariableIndex(k, problem.gauge);
    if (v < 0) continue;
    if (ne.hessian.block<6, 6>(6 * v, 6 * v).diagonal().maxCoeff() <= 0.0) {
      throw Error(ErrorKind::kUnderConstrained,
                  "pose " + std::to_string(k) +
                      " has no valid residual blocks at level " +
                      std::to_string(level));
    }
  }
}

bool ApplyStep(const BAProblem& problem, std::span<const Pose> poses,
               const Eigen::VectorXd& step, std::vector<Pose>* out) {
  out->assign(poses.begin(), poses.end());
  for (int k = 0; k < problem.num_poses(); ++k) {
    const int v = VariableIndex(k, problem.gauge);
    if (v < 0) continue;
    const Perturbation p =
        Perturbation::FromVector(step.segment<6>(6 * v));
    if (!(p.dq.squaredNorm() < 1.0) || !p.dt.allFinite()) return false;
    (*out)[k] = BoxPlus(poses[k], p);
  }
  return true;
}

}  // namespace

Vector5d CueWeights::Diagonal() const {
  Vector5d d;
  d << intensity, depth, normal;
  return d;
}

void CueWeights::Validate() const {
  if (!(intensity > 0.0) || !(depth > 0.0) || !(normal.minCoeff() > 0.0)) {
    throw Error(ErrorKind::kConfig, "cue weights must be positive");
  }
}

void SolverConfig::Validate() const {
  omega.Validate();
  if (!(huber_delta > 0.0)) {
    throw Error(ErrorKind::kConfig, "huber_delta must be positive");
  }
  if (!(lm_initial_lambda > 0.0) || !(lm_lambda_up > 1.0) ||
      !(lm_lambda_down > 0.0 && lm_lambda_down < 1.0) ||
      !(lm_max_lambda > lm_initial_lambda)) {
    throw Error(ErrorKind::kConfig, "invalid damping controls");
  }
  if (max_iterations_per_level.empty() ||
      *std::min_element(max_iterations_per_level.begin(),
                        max_iterations_per_level.end()) < 1) {
    throw Error(ErrorKind::kConfig, "iteration caps must be >= 1");
  }
  if (!(termination_rel_decrease > 0.0 && termination_rel_decrease < 1.0)) {
    throw Error(ErrorKind::kConfig,
                "termination_rel_decrease must lie in (0, 1)");
  }
  if (!(occlusion_depth_tolerance > 0.0)) {
    throw Error(ErrorKind::kConfig, "occlusion tolerance must be positive");
  }
  if (pixel_stride < 1 || num_levels < 0 || threads < 1) {
    throw Error(ErrorKind::kConfig, "stride, levels and threads must be >= 1");
  }
}

int SolverConfig::IterationCap(int schedule_index) const {
  const int last = static_cast<int>(max_iterations_per_level.size()) - 1;
  return max_iterations_per_level[std::min(schedule_index, last)];
}

double HuberWeight(double norm, double delta) {
  return norm <= delta ? 1.0 : delta / norm;
}

double HuberCost(double squared_norm, double delta) {
  if (squared_norm <= delta * delta) return squared_norm;
  return 2.0 * delta * std::sqrt(squared_norm) - delta * delta;
}

int BAProblem::num_poses() const {
  return sensors.empty() ? 0
                         : static_cast<int>(sensors.front().graph.nodes.size());
}

int BAProblem::num_levels() const {
  if (sensors.empty() || sensors.front().graph.nodes.empty()) return 0;
  return sensors.front().graph.nodes.front().pyramid->num_levels();
}

void BAProblem::Validate() const {
  if (sensors.empty()) throw Error(ErrorKind::kConfig, "problem has no sensors");
  const int n = num_poses();
  if (n < 1) throw Error(ErrorKind::kConfig, "problem has no poses");
  if (gauge < 0 || gauge >= n) {
    throw Error(ErrorKind::kConfig, "gauge index out of range");
  }
  int levels = -1;
  for (const SensorTrack& track : sensors) {
    if (static_cast<int>(track.graph.nodes.size()) != n) {
      throw Error(ErrorKind::kConfig,
                  "sensors disagree on the number of poses");
    }
    for (const FrameNode& node : track.graph.nodes) {
      if (!node.pyramid || node.pyramid->num_levels() == 0) {
        throw Error(ErrorKind::kConfig, "frame node without pyramid");
      }
      if (levels < 0) levels = node.pyramid->num_levels();
      if (node.pyramid->num_levels() != levels) {
        throw Error(ErrorKind::kConfig, "pyramids differ in level count");
      }
    }
    for (const Edge& e : track.graph.edges) {
      if (e.i == e.j || e.i < 0 || e.j < 0 || e.i >= n || e.j >= n) {
        throw Error(ErrorKind::kConfig, "edge with invalid endpoints");
      }
    }
    if (track.omega) track.omega->Validate();
    if (track.huber_delta && !(*track.huber_delta > 0.0)) {
      throw Error(ErrorKind::kConfig, "huber_delta must be positive");
    }
  }
}

std::vector<Pose> InitialPoses(const BAProblem& problem) {
  std::vector<Pose> poses;
  if (problem.sensors.empty()) return poses;
  for (const FrameNode& node : problem.sensors.front().graph.nodes) {
    poses.push_back(node.pose_guess);
  }
  return poses;
}

std::string FormatIterationRecord(const IterationRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d %d %.6e %.17g %zu %d", r.level,
                r.iteration, r.lambda, r.error, r.valid_blocks,
                r.accepted ? 1 : 0);
  return buf;
}

Objective EvaluateObjective(const BAProblem& problem,
                            std::span<const Pose> poses, int level,
                            const SolverConfig& config) {
  problem.Validate();
  const LevelData data = PrepareLevel(problem, level, config);
  const NormalEquations ne = Accumulate(problem, data, poses, config, false);
  return {ne.error, ne.valid_blocks};
}

NormalEquations BuildNormalEquations(const BAProblem& problem,
                                     std::span<const Pose> poses, int level,
                                     const SolverConfig& config) {
  problem.Validate();
  const LevelData data = PrepareLevel(problem, level, config);
  return Accumulate(problem, data, poses, config, true);
}

ResidualBlock EvaluatePixel(const CueImage& source,
                            const CueImage& destination, const Pose& xi,
                            const Pose& xj, const Pose& extrinsics, int x,
                            int y, bool with_jacobians) {
  ResidualBlock block;
  block.pixel = Eigen::Vector2d(x, y);
  if (!source.intensity().Contains(x, y) || !source.IsValid(x, y)) {
    return block;
  }
  SourcePoint sp;
  sp.pixel = block.pixel;
  sp.point = UnprojectUnchecked(source.intrinsics(), sp.pixel,
                                source.depth()(x, y));
  sp.normal = source.normals()(x, y);
  sp.intensity = source.intensity()(x, y);
  const PairContext ctx(xi, xj, extrinsics, destination.intrinsics());
  EvaluateBlock(ctx, sp, destination, with_jacobians, &block);
  return block;
}

Grid<BlockStatus> SuppressOcclusions(const CueImage& source,
                                     const CueImage& destination,
                                     const Pose& xi, const Pose& xj,
                                     const Pose& extrinsics,
                                     double tolerance) {
  Grid<BlockStatus> status(source.width(), source.height(),
                           BlockStatus::kInvalid);
  for (int y = 0; y < source.height(); ++y) {
    for (int x = 0; x < source.width(); ++x) {
      const ResidualBlock b =
          EvaluatePixel(source, destination, xi, xj, extrinsics, x, y, false);
      if (!b.valid) continue;
      status(x, y) =
          IsOccluded(b, tolerance) ? BlockStatus::kOccluded : BlockStatus::kValid;
    }
  }
  return status;
}

LevelResult SolveLevel(const BAProblem& problem, std::vector<Pose> poses,
                       int level, const SolverConfig& config,
                       int max_iterations, const IterationLogger& logger) {
  config.Validate();
  problem.Validate();
  if (static_cast<int>(poses.size()) != problem.num_poses()) {
    throw Error(ErrorKind::kConfig, "pose count does not match the problem");
  }
  CheckConnectivity(problem);

  const auto start = std::chrono::steady_clock::now();
  LevelResult result;
  result.level = level;
  const LevelData data = PrepareLevel(problem, level, config);
  result.scale = data.scale;

  auto record = [&](int iteration, double lambda, const NormalEquations& ne,
                    bool accepted) {
    IterationRecord r{level, iteration, lambda, ne.error, ne.valid_blocks,
                      accepted};
    result.log.push_back(r);
    if (logger) logger(r);
  };

  NormalEquations current = Accumulate(problem, data, poses, config, true);
  if (problem.num_poses() > 1) CheckObserved(problem, current, level);
  result.accepted_errors.push_back(current.error);
  record(0, config.lm_initial_lambda, current, true);

  double lambda = config.lm_initial_lambda;
  std::vector<Pose> candidate;
  int iteration = 0;
  while (iteration < max_iterations && problem.num_poses() > 1 &&
         current.error > 0.0) {
    ++iteration;
    Eigen::MatrixXd damped = current.hessian;
    damped.diagonal() += lambda * current.hessian.diagonal();
    const Eigen::LLT<Eigen::MatrixXd> llt(damped);
    if (llt.info() != Eigen::Success) {
      lambda *= config.lm_lambda_up;
      record(iteration, lambda, current, false);
      if (lambda > config.lm_max_lambda) break;
      continue;
    }
    const Eigen::VectorXd step = llt.solve(-current.gradient);
    // Decrease of the local quadratic model of F.
    const double predicted =
        -(2.0 * current.gradient.dot(step) +
          step.dot(current.hessian * step));
    if (!(predicted > config.termination_rel_decrease * current.error)) {
      record(iteration, lambda, current, false);
      break;
    }
    NormalEquations next;
    bool accepted = false;
    if (ApplyStep(problem, poses, step, &candidate)) {
      next = Accumulate(problem, data, candidate, config, true);
      accepted = next.valid_blocks > 0 && next.error < current.error;
    }
    if (!accepted) {
      lambda *= config.lm_lambda_up;
      record(iteration, lambda, next.valid_blocks > 0 ? next : current, false);
      if (lambda > config.lm_max_lambda) break;
      continue;
    }
    const double rel = (current.error - next.error) / current.error;
    poses.swap(candidate);
    current = std::move(next);
    lambda = std::max(lambda * config.lm_lambda_down, 1e-12);
    result.accepted_errors.push_back(current.error);
    record(iteration, lambda, current, true);
    if (rel < config.termination_rel_decrease) break;
  }

  result.iterations = iteration;
  result.poses = std::move(poses);
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

SolveResult SolveHierarchical(const BAProblem& problem,
                              std::vector<Pose> initial,
                              const SolverConfig& config,
                              const IterationLogger& logger) {
  config.Validate();
  problem.Validate();
  const int total = problem.num_levels();
  const int used = config.num_levels == 0
                       ? total
                       : std::min(config.num_levels, total);
  SolveResult out;
  out.poses = std::move(initial);
  for (int k = 0; k < used; ++k) {
    const int level = total - used + k;
    LevelResult lr = SolveLevel(problem, out.poses, level, config,
                                config.IterationCap(k), logger);
    out.poses = lr.poses;
    out.levels.push_back(std::move(lr));
  }
  return out;
}

const char* FusionModeName(FusionMode mode) {
  return mode == FusionMode::kCoupled ? "coupled" : "consecutive";
}

FusionMode ParseFusionMode(const std::string& name) {
  if (name == "coupled") return FusionMode::kCoupled;
  if (name == "consecutive") return FusionMode::kConsecutive;
  throw Error(ErrorKind::kConfig, "unknown fusion mode '" + name + "'");
}

SolveResult SolveFusion(const BAProblem& rgbd, const BAProblem& lidar,
                        FusionMode mode, std::vector<Pose> initial,
                        const SolverConfig& config,
                        const IterationLogger& logger) {
  rgbd.Validate();
  lidar.Validate();
  if (rgbd.num_poses() != lidar.num_poses()) {
    throw Error(ErrorKind::kConfig,
                "RGB-D and LiDAR problems have different trajectory lengths");
  }
  if (mode == FusionMode::kCoupled) {
    if (rgbd.num_levels() != lidar.num_levels()) {
      throw Error(ErrorKind::kConfig,
                  "coupled fusion needs equal pyramid depths");
    }
    BAProblem joint = rgbd;
    joint.sensors.insert(joint.sensors.end(), lidar.sensors.begin(),
                         lidar.sensors.end());
    return SolveHierarchical(joint, std::move(initial), config, logger);
  }
  SolveResult first =
      SolveHierarchical(lidar, std::move(initial), config, logger);
  SolveResult second = SolveHierarchical(rgbd, first.poses, config, logger);
  first.levels.insert(first.levels.end(),
                      std::make_move_iterator(second.levels.begin()),
                      std::make_move_iterator(second.levels.end()));
  first.poses = std::move(second.poses);
  return first;
}

}  // namespace photoba
