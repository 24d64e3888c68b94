#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace photoba {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Rigid transform in SE(3), stored as a rotation matrix plus translation.
//
// Composition chains are tracked; once a chain reaches
// kReorthonormalizeInterval products the rotation is projected back onto
// SO(3) (polar decomposition) so that drift stays below 1e-9.
class Pose {
 public:
  static constexpr int kReorthonormalizeInterval = 1000;

  Pose() = default;
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose Identity() { return Pose(); }
  static Pose FromQuaternion(const Eigen::Quaterniond& q,
                             const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  // Unit quaternion with non-negative real part.
  Eigen::Quaterniond quaternion() const;
  Eigen::Matrix4d matrix() const;

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const;

  Pose orthonormalized() const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
  int chain_length_ = 0;
};

// Minimal perturbation [dt, dq]: dq is the imaginary part of a unit
// quaternion, so ||dq|| < 1 is required.
struct Perturbation {
  Eigen::Vector3d dt = Eigen::Vector3d::Zero();
  Eigen::Vector3d dq = Eigen::Vector3d::Zero();

  static Perturbation FromVector(const Vector6d& v);
  // Rotation given as a rotation vector (axis * angle, |angle| < pi).
  static Perturbation FromTranslationRotation(
      const Eigen::Vector3d& translation, const Eigen::Vector3d& rotation);
  Vector6d vector() const;
};

// Throws kInvalidPerturbation when ||v.dq|| >= 1.
Pose Exp(const Perturbation& v);

// X * exp(v). Right-perturbation convention used by every Jacobian.
Pose BoxPlus(const Pose& x, const Perturbation& v);

// X_j^-1 * X_i.
Pose Relative(const Pose& xi, const Pose& xj);

Eigen::Matrix3d Skew(const Eigen::Vector3d& p);

// Angle of the axis-angle representation, in [0, pi].
double RotationAngle(const Eigen::Matrix3d& rotation);

// d(BoxPlus(X, v) * p)/dv at v = 0, i.e. R [I | -2 skew(p)].
Eigen::Matrix<double, 3, 6> PointPerturbationJacobian(const Pose& x,
                                                      const Eigen::Vector3d& p);

}  // namespace photoba
