#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "photoba/cue_image.h"
#include "photoba/geometry.h"
#include "photoba/sensor_model.h"

namespace photoba {

using Matrix56d = Eigen::Matrix<double, 5, 6>;

// A valid source pixel, unprojected into its sensor frame.
struct SourcePoint {
  Eigen::Vector2d pixel;
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  double intensity = 0.0;
};

std::vector<SourcePoint> CollectSourcePoints(const CueImage& image,
                                             int stride = 1);

// Transforms for one directed pair i -> j of a sensor with offset O = (R_o,
// t_o) on a platform with poses X_i, X_j:
//   p_u    = R_o p + t_o
//   q      = R_j^T (R_i p_u + t_i - t_j)
//   p_bar  = R_o^T (q - t_o)
class PairContext {
 public:
  PairContext(const Pose& xi, const Pose& xj, const Pose& extrinsics,
              const Intrinsics& destination);

  const Intrinsics& destination() const { return destination_; }

  Eigen::Vector3d PlatformPoint(const Eigen::Vector3d& p) const {
    return ro_ * p + to_;
  }
  Eigen::Vector3d PlatformInJ(const Eigen::Vector3d& p_u) const {
    return r_ji_ * p_u + t_ji_;
  }
  Eigen::Vector3d SensorInJ(const Eigen::Vector3d& q) const {
    return ro_t_ * (q - to_);
  }
  Eigen::Vector3d RotateNormal(const Eigen::Vector3d& n) const {
    return normal_rotation_ * n;
  }

  const Eigen::Matrix3d& ro() const { return ro_; }
  const Eigen::Matrix3d& ro_t() const { return ro_t_; }
  const Eigen::Matrix3d& r_ji() const { return r_ji_; }
  // R_o^T R_j^T R_i
  const Eigen::Matrix3d& ro_t_r_ji() const { return ro_t_r_ji_; }

 private:
  Intrinsics destination_;
  Eigen::Matrix3d ro_;
  Eigen::Matrix3d ro_t_;
  Eigen::Vector3d to_;
  Eigen::Matrix3d r_ji_;
  Eigen::Vector3d t_ji_;
  Eigen::Matrix3d ro_t_r_ji_;
  Eigen::Matrix3d normal_rotation_;
};

struct Reprojection {
  Eigen::Vector2d pixel;  // u'
  Eigen::Vector3d point;  // p_bar, destination sensor frame
};

std::optional<Reprojection> Reproject(const Eigen::Vector2d& u, double d,
                                      const Pose& xi, const Pose& xj,
                                      const SensorExtrinsics& extrinsics,
                                      const Intrinsics& source,
                                      const Intrinsics& destination);

struct ResidualBlock {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::Vector2d projected = Eigen::Vector2d::Zero();
  Vector5d residual = Vector5d::Zero();
  Matrix56d jac_i = Matrix56d::Zero();
  Matrix56d jac_j = Matrix56d::Zero();
  double predicted_depth = 0.0;
  double measured_depth = 0.0;
  bool valid = false;
};

// Predicted surface lies behind the measured one by more than `tolerance`.
inline bool IsOccluded(const ResidualBlock& b, double tolerance) {
  return b.predicted_depth - b.measured_depth > tolerance;
}

// Residual e = [g_i - g_j(u'), zeta(p_bar) - d_j(u'), n_bar - n_j(u')] and,
// optionally, its Jacobians w.r.t. right perturbations of X_i and X_j.
//
// `Sampler` provides std::optional<CueSample> Sample(const Eigen::Vector2d&)
// for the destination image. Returns false (block invalid) when the point
// does not project, the sample is unavailable, or the projective Jacobian
// is singular.
template <typename Sampler>
bool EvaluateBlock(const PairContext& ctx, const SourcePoint& source,
                   const Sampler& destination, bool with_jacobians,
                   ResidualBlock* block) {
  block->valid = false;
  block->pixel = source.pixel;
  const Intrinsics& k = ctx.destination();
  const Eigen::Vector3d p_u = ctx.PlatformPoint(source.point);
  const Eigen::Vector3d q = ctx.PlatformInJ(p_u);
  const Eigen::Vector3d p_bar = ctx.SensorInJ(q);
  const auto projected = Project(k, p_bar);
  if (!projected) return false;
  const auto sample = destination.Sample(*projected);
  if (!sample) return false;

  const bool pinhole = k.model == ProjectionModel::kPinhole;
  const double zeta = pinhole ? p_bar.z() : p_bar.norm();
  const Eigen::Vector3d n_bar = ctx.RotateNormal(source.normal);

  block->projected = *projected;
  block->predicted_depth = zeta;
  block->measured_depth = sample->value[1];
  block->residual[0] = source.intensity - sample->value[0];
  block->residual[1] = zeta - sample->value[1];
  block->residual.tail<3>() = n_bar - sample->value.template tail<3>();

  if (with_jacobians) {
    const auto proj_jac = TryProjectiveJacobian(k, p_bar);
    if (!proj_jac) return false;
    // d p_bar / d dx_i = R_o^T R_j^T R_i [I | -2 skew(p_u)]
    Eigen::Matrix<double, 3, 6> d_i;
    d_i.leftCols<3>() = ctx.ro_t_r_ji();
    d_i.rightCols<3>() = -2.0 * ctx.ro_t_r_ji() * Skew(p_u);
    // d p_bar / d dx_j = R_o^T [-I | 2 skew(q)]
    Eigen::Matrix<double, 3, 6> d_j;
    d_j.leftCols<3>() = -ctx.ro_t();
    d_j.rightCols<3>() = 2.0 * ctx.ro_t() * Skew(q);

    const Eigen::Matrix<double, 5, 3> image_term = sample->gradient * *proj_jac;
    block->jac_i.noalias() = -image_term * d_i;
    block->jac_j.noalias() = -image_term * d_j;

    const Eigen::RowVector3d zeta_row =
        pinhole ? Eigen::RowVector3d(0.0, 0.0, 1.0)
                : Eigen::RowVector3d(p_bar.transpose() / zeta);
    block->jac_i.row(1).noalias() += zeta_row * d_i;
    block->jac_j.row(1).noalias() += zeta_row * d_j;

    // Normals only see rotation.
    const Eigen::Vector3d n_platform = ctx.ro() * source.normal;
    block->jac_i.block<3, 3>(2, 3).noalias() +=
        -2.0 * ctx.ro_t_r_ji() * Skew(n_platform);
    block->jac_j.block<3, 3>(2, 3).noalias() +=
        2.0 * ctx.ro_t() * Skew(ctx.r_ji() * n_platform);
  }
  block->valid = true;
  return true;
}

}  // namespace photoba
