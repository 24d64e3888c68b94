#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "photoba/cue_image.h"
#include "photoba/geometry.h"
#include "photoba/match_graph.h"
#include "photoba/residual.h"
#include "photoba/sensor_model.h"

namespace photoba {

// Diagonal information weights of the stacked cue residual.
struct CueWeights {
  double intensity = 1.0;
  double depth = 10.0;  // 1/m^2
  Eigen::Vector3d normal = Eigen::Vector3d::Ones();

  Vector5d Diagonal() const;
  void Validate() const;
};

struct SolverConfig {
  // Huber threshold on the Omega-weighted norm of the stacked residual.
  double huber_delta = 0.1;
  CueWeights omega;
  double lm_initial_lambda = 1e-3;
  double lm_lambda_up = 10.0;
  double lm_lambda_down = 0.5;
  double lm_max_lambda = 1e10;
  // Iteration caps, coarsest scheduled level first; the last entry repeats.
  std::vector<int> max_iterations_per_level = {10, 5, 3};
  double termination_rel_decrease = 1e-4;
  // At full resolution; divided by the level scale.
  double occlusion_depth_tolerance = 0.05;
  int pixel_stride = 1;
  // Number of finest levels to schedule; 0 schedules every level.
  int num_levels = 0;
  int threads = 1;

  void Validate() const;
  int IterationCap(int schedule_index) const;
};

// Huber on a residual norm: weight 1 below delta, delta / norm above.
double HuberWeight(double norm, double delta);
// rho(s) for s = ||e||^2: s below delta^2, 2 delta sqrt(s) - delta^2 above.
double HuberCost(double squared_norm, double delta);

// One sensor's frames and match graph. Node k observes platform pose k.
struct SensorTrack {
  MatchGraph graph;
  SensorExtrinsics extrinsics;
  std::optional<CueWeights> omega;
  std::optional<double> huber_delta;
};

struct BAProblem {
  std::vector<SensorTrack> sensors;
  int gauge = 0;  // pose held fixed

  int num_poses() const;
  int num_levels() const;
  // Throws kConfig on inconsistent pose counts, missing pyramids, bad gauge.
  void Validate() const;
};

// Pose guesses of the first sensor's nodes.
std::vector<Pose> InitialPoses(const BAProblem& problem);

struct IterationRecord {
  int level = 0;
  int iteration = 0;
  double lambda = 0.0;
  double error = 0.0;
  std::size_t valid_blocks = 0;
  bool accepted = false;
};

// "level iteration lambda error valid_blocks accepted"
std::string FormatIterationRecord(const IterationRecord& r);

using IterationLogger = std::function<void(const IterationRecord&)>;

struct LevelResult {
  int level = 0;
  double scale = 1.0;
  std::vector<Pose> poses;
  // Error at the start of the level followed by every accepted step.
  std::vector<double> accepted_errors;
  int iterations = 0;
  double seconds = 0.0;
  std::vector<IterationRecord> log;
};

struct SolveResult {
  std::vector<Pose> poses;
  std::vector<LevelResult> levels;
};

struct Objective {
  double error = 0.0;
  std::size_t valid_blocks = 0;
};

// Normal equations over the non-gauge poses (6 unknowns each, gauge
// skipped): H = sum J^T W J, b = sum J^T W e.
struct NormalEquations {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double error = 0.0;
  std::size_t valid_blocks = 0;
};

// Every edge contributes both directions i -> j and j -> i.
Objective EvaluateObjective(const BAProblem& problem,
                            std::span<const Pose> poses, int level,
                            const SolverConfig& config);
NormalEquations BuildNormalEquations(const BAProblem& problem,
                                     std::span<const Pose> poses, int level,
                                     const SolverConfig& config);

// Residual and Jacobians of source pixel (x, y) of `source` against
// `destination`. `valid` is false when the source pixel or the block is
// invalid.
ResidualBlock EvaluatePixel(const CueImage& source,
                            const CueImage& destination, const Pose& xi,
                            const Pose& xj, const Pose& extrinsics, int x,
                            int y, bool with_jacobians);

enum class BlockStatus : std::uint8_t { kInvalid, kOccluded, kValid };

// Status of every source pixel for the pair at the current poses.
Grid<BlockStatus> SuppressOcclusions(const CueImage& source,
                                     const CueImage& destination,
                                     const Pose& xi, const Pose& xj,
                                     const Pose& extrinsics, double tolerance);

// Levenberg-Marquardt on one pyramid level. Throws kUnderConstrained when
// a pose is not connected to the gauge or has no valid residuals.
LevelResult SolveLevel(const BAProblem& problem, std::vector<Pose> poses,
                       int level, const SolverConfig& config,
                       int max_iterations, const IterationLogger& logger = {});

// Coarse-to-fine over the scheduled levels, each seeded by the previous.
SolveResult SolveHierarchical(const BAProblem& problem,
                              std::vector<Pose> initial,
                              const SolverConfig& config,
                              const IterationLogger& logger = {});

enum class FusionMode { kCoupled, kConsecutive };

const char* FusionModeName(FusionMode mode);
FusionMode ParseFusionMode(const std::string& name);

// Coupled: one solve on F_rgbd + F_lidar. Consecutive: LiDAR solve, then an
// RGB-D solve seeded with its result.
SolveResult SolveFusion(const BAProblem& rgbd, const BAProblem& lidar,
                        FusionMode mode, std::vector<Pose> initial,
                        const SolverConfig& config,
                        const IterationLogger& logger = {});

}  // namespace photoba
