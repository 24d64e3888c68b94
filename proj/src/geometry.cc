#include "photoba/geometry.h"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "photoba/error.h"

namespace photoba {

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {}

Pose Pose::FromQuaternion(const Eigen::Quaterniond& q,
                          const Eigen::Vector3d& translation) {
  return Pose(q.normalized().toRotationMatrix(), translation);
}

Eigen::Quaterniond Pose::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  return q;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::inverse() const {
  Pose out(rotation_.transpose(), -rotation_.transpose() * translation_);
  out.chain_length_ = chain_length_;
  return out;
}

Pose Pose::operator*(const Pose& other) const {
  Pose out(rotation_ * other.rotation_,
           rotation_ * other.translation_ + translation_);
  out.chain_length_ = std::max(chain_length_, other.chain_length_) + 1;
  if (out.chain_length_ >= kReorthonormalizeInterval) {
    out = out.orthonormalized();
  }
  return out;
}

Eigen::Vector3d Pose::operator*(const Eigen::Vector3d& p) const {
  return rotation_ * p + translation_;
}

Pose Pose::orthonormalized() const {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) = -u.col(2);
  return Pose(u * v.transpose(), translation_);
}

Perturbation Perturbation::FromVector(const Vector6d& v) {
  Perturbation p;
  p.dt = v.head<3>();
  p.dq = v.tail<3>();
  return p;
}

Perturbation Perturbation::FromTranslationRotation(
    const Eigen::Vector3d& translation, const Eigen::Vector3d& rotation) {
  Perturbation p;
  p.dt = translation;
  const double angle = rotation.norm();
  if (angle > 0) p.dq = std::sin(0.5 * angle) * rotation / angle;
  return p;
}

Vector6d Perturbation::vector() const {
  Vector6d v;
  v << dt, dq;
  return v;
}

Pose Exp(const Perturbation& v) {
  const double sq = v.dq.squaredNorm();
  if (!(sq < 1.0)) {
    throw Error(ErrorKind::kInvalidPerturbation,
                "quaternion imaginary part has norm >= 1");
  }
  if (sq == 0.0) return Pose(Eigen::Matrix3d::Identity(), v.dt);
  const Eigen::Quaterniond q(std::sqrt(1.0 - sq), v.dq.x(), v.dq.y(),
                             v.dq.z());
  return Pose(q.toRotationMatrix(), v.dt);
}

Pose BoxPlus(const Pose& x, const Perturbation& v) { return x * Exp(v); }

Pose Relative(const Pose& xi, const Pose& xj) { return xj.inverse() * xi; }

Eigen::Matrix3d Skew(const Eigen::Vector3d& p) {
  Eigen::Matrix3d s;
  s << 0, -p.z(), p.y(),  //
      p.z(), 0, -p.x(),   //
      -p.y(), p.x(), 0;
  return s;
}

double RotationAngle(const Eigen::Matrix3d& rotation) {
  // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
  const Eigen::Vector3d axis(rotation(2, 1) - rotation(1, 2),
                             rotation(0, 2) - rotation(2, 0),
                             rotation(1, 0) - rotation(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (rotation.trace() - 1.0));
}

Eigen::Matrix<double, 3, 6> PointPerturbationJacobian(
    const Pose& x, const Eigen::Vector3d& p) {
  Eigen::Matrix<double, 3, 6> j;
  j.leftCols<3>() = x.rotation();
  j.rightCols<3>() = -2.0 * x.rotation() * Skew(p);
  return j;
}

}  // namespace photoba
