#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <utility>
#include <vector>

#include "photoba/geometry.h"

namespace photoba {

struct TimedPose {
  double timestamp = 0.0;  // seconds
  Pose pose;
};

using Trajectory = std::vector<TimedPose>;

// Throws kConfig unless timestamps are finite and strictly increasing.
void ValidateTrajectory(const Trajectory& trajectory);

inline constexpr double kDefaultMaxDt = 0.02;

// Greedy nearest-timestamp matching: candidate pairs are taken in order of
// |dt|, each estimate and each reference pose at most once. Pairs are
// returned sorted by estimate index. Throws kNoAssociation when nothing
// matches within max_dt.
std::vector<std::pair<std::size_t, std::size_t>> Associate(
    const Trajectory& est, const Trajectory& ref, double max_dt = kDefaultMaxDt);

// Rigid transform (R, t) minimizing sum ||ref - (R est + t)||^2, via the
// unit-quaternion closed form. Throws kDegenerateAlignment for fewer than
// three points or a collinear set.
Pose HornAlign(const std::vector<Eigen::Vector3d>& est,
               const std::vector<Eigen::Vector3d>& ref);

struct AteResult {
  double rmse = 0.0;           // translation, meters
  double rotation_rmse = 0.0;  // auxiliary, radians
  std::size_t pairs = 0;
  Pose alignment;  // applied to the estimate
};

AteResult ComputeAte(const Trajectory& est, const Trajectory& ref,
                     double max_dt = kDefaultMaxDt);

inline double AteRmse(const Trajectory& est, const Trajectory& ref,
                      double max_dt = kDefaultMaxDt) {
  return ComputeAte(est, ref, max_dt).rmse;
}

}  // namespace photoba
