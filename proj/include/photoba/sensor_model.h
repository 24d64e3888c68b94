#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "photoba/geometry.h"

namespace photoba {

enum class ProjectionModel { kPinhole, kSpherical };

const char* ProjectionModelName(ProjectionModel model);
ProjectionModel ParseProjectionModel(const std::string& name);

using Matrix23d = Eigen::Matrix<double, 2, 3>;

// Pixel coordinates put pixel centers on integers: column x of an image of
// width W covers [x - 0.5, x + 0.5), so the image spans [-0.5, W - 0.5).
//
// Pinhole: fx, fy in pixels, (cx, cy) principal point, depth = z.
// Spherical: fx, fy in pixels per radian of azimuth / elevation, (cx, cy)
// the pixel where azimuth and elevation are zero, depth = range.
struct Intrinsics {
  ProjectionModel model = ProjectionModel::kPinhole;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 2;
  int height = 2;
  double depth_min = 0.1;
  double depth_max = 100.0;

  // Throws kConfig when an invariant is violated.
  void Validate() const;

  // Intrinsics for an image downscaled by `scale` to width x height pixels.
  Intrinsics Scaled(double scale, int scaled_width, int scaled_height) const;

  // True for spherical images spanning the full 360 degrees of azimuth,
  // whose columns are cyclic.
  bool WrapsAzimuth() const;

  bool InBounds(const Eigen::Vector2d& u) const;
  bool InDepthRange(double d) const { return d >= depth_min && d <= depth_max; }
};

struct SensorExtrinsics {
  // Maps sensor coordinates into the platform frame.
  Pose offset;
};

// Continuous pixel coordinates, or nullopt when the point falls outside the
// image, behind a pinhole camera, or outside [depth_min, depth_max].
std::optional<Eigen::Vector2d> Project(const Intrinsics& k,
                                       const Eigen::Vector3d& p);

// Throws kInvalidDepth when d is outside [depth_min, depth_max].
Eigen::Vector3d Unproject(const Intrinsics& k, const Eigen::Vector2d& u,
                          double d);
Eigen::Vector3d UnprojectUnchecked(const Intrinsics& k,
                                   const Eigen::Vector2d& u, double d);

// Depth for pinhole (z), range for spherical (Euclidean norm).
double DepthOf(const Intrinsics& k, const Eigen::Vector3d& p);

// d Project / d p. Throws kSingularJacobian at p.z <= 0 (pinhole) or on the
// vertical axis (spherical).
Matrix23d ProjectiveJacobian(const Intrinsics& k, const Eigen::Vector3d& p);
std::optional<Matrix23d> TryProjectiveJacobian(const Intrinsics& k,
                                               const Eigen::Vector3d& p);

}  // namespace photoba
