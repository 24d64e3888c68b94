#include "photoba/sensor_model.h"

#include <cmath>
#include <numbers>

#include "photoba/error.h"

namespace photoba {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinPlanarSquaredNorm = 1e-18;

}  // namespace

const char* ProjectionModelName(ProjectionModel model) {
  return model == ProjectionModel::kPinhole ? "pinhole" : "spherical";
}

ProjectionModel ParseProjectionModel(const std::string& name) {
  if (name == "pinhole") return ProjectionModel::kPinhole;
  if (name == "spherical") return ProjectionModel::kSpherical;
  throw Error(ErrorKind::kConfig, "unknown projection model '" + name + "'");
}

void Intrinsics::Validate() const {
  if (fx == 0.0 || fy == 0.0 || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorKind::kConfig, "intrinsics: fx and fy must be non-zero");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorKind::kConfig, "intrinsics: non-finite principal point");
  }
  if (width < 2 || height < 2) {
    throw Error(ErrorKind::kConfig, "intrinsics: image must be at least 2x2");
  }
  if (!(depth_min > 0.0) || !(depth_min < depth_max)) {
    throw Error(ErrorKind::kConfig,
                "intrinsics: need 0 < depth_min < depth_max");
  }
}

Intrinsics Intrinsics::Scaled(double scale, int scaled_width,
                              int scaled_height) const {
  Intrinsics out = *this;
  out.fx = fx * scale;
  out.fy = fy * scale;
  // A level pixel averages a 1/scale footprint; its center sits half a
  // source pixel in from the footprint corner.
  out.cx = (cx + 0.5) * scale - 0.5;
  out.cy = (cy + 0.5) * scale - 0.5;
  out.width = scaled_width;
  out.height = scaled_height;
  return out;
}

bool Intrinsics::WrapsAzimuth() const {
  return model == ProjectionModel::kSpherical &&
         std::abs(kTwoPi * std::abs(fx) - width) <= 1.0;
}

bool Intrinsics::InBounds(const Eigen::Vector2d& u) const {
  return u.x() >= -0.5 && u.x() < width - 0.5 && u.y() >= -0.5 &&
         u.y() < height - 0.5;
}

std::optional<Eigen::Vector2d> Project(const Intrinsics& k,
                                       const Eigen::Vector3d& p) {
  Eigen::Vector2d u;
  if (k.model == ProjectionModel::kPinhole) {
    if (!(p.z() > 0.0) || !k.InDepthRange(p.z())) return std::nullopt;
    u.x() = k.fx * p.x() / p.z() + k.cx;
    u.y() = k.fy * p.y() / p.z() + k.cy;
  } else {
    if (!k.InDepthRange(p.norm())) return std::nullopt;
    const double azimuth = std::atan2(p.y(), p.x());
    const double elevation = std::atan2(p.z(), std::hypot(p.x(), p.y()));
    u.x() = k.fx * azimuth + k.cx;
    u.y() = k.fy * elevation + k.cy;
    if (k.WrapsAzimuth()) {
      u.x() -= k.width * std::floor((u.x() + 0.5) / k.width);
    }
  }
  if (!k.InBounds(u)) return std::nullopt;
  return u;
}

Eigen::Vector3d UnprojectUnchecked(const Intrinsics& k,
                                   const Eigen::Vector2d& u, double d) {
  if (k.model == ProjectionModel::kPinhole) {
    return Eigen::Vector3d((u.x() - k.cx) / k.fx * d, (u.y() - k.cy) / k.fy * d,
                           d);
  }
  const double azimuth = (u.x() - k.cx) / k.fx;
  const double elevation = (u.y() - k.cy) / k.fy;
  const double c = std::cos(elevation);
  return d * Eigen::Vector3d(c * std::cos(azimuth), c * std::sin(azimuth),
                             std::sin(elevation));
}

Eigen::Vector3d Unproject(const Intrinsics& k, const Eigen::Vector2d& u,
                          double d) {
  if (!k.InDepthRange(d)) {
    throw Error(ErrorKind::kInvalidDepth,
                "depth " + std::to_string(d) + " outside sensor range");
  }
  return UnprojectUnchecked(k, u, d);
}

double DepthOf(const Intrinsics& k, const Eigen::Vector3d& p) {
  return k.model == ProjectionModel::kPinhole ? p.z() : p.norm();
}

std::optional<Matrix23d> TryProjectiveJacobian(const Intrinsics& k,
                                               const Eigen::Vector3d& p) {
  Matrix23d j;
  if (k.model == ProjectionModel::kPinhole) {
    if (!(p.z() > 0.0)) return std::nullopt;
    // (1/vz^2) [vz 0 -vx; 0 vz -vy] K with v = K p, written out.
    const double inv_z = 1.0 / p.z();
    j << k.fx * inv_z, 0.0, -k.fx * p.x() * inv_z * inv_z,  //
        0.0, k.fy * inv_z, -k.fy * p.y() * inv_z * inv_z;
    return j;
  }
  const double planar_sq = p.x() * p.x() + p.y() * p.y();
  if (planar_sq < kMinPlanarSquaredNorm) return std::nullopt;
  const double planar = std::sqrt(planar_sq);
  const double norm_sq = planar_sq + p.z() * p.z();
  j << -k.fx * p.y() / planar_sq, k.fx * p.x() / planar_sq, 0.0,
      -k.fy * p.x() * p.z() / (planar * norm_sq),
      -k.fy * p.y() * p.z() / (planar * norm_sq), k.fy * planar / norm_sq;
  return j;
}

Matrix23d ProjectiveJacobian(const Intrinsics& k, const Eigen::Vector3d& p) {
  auto j = TryProjectiveJacobian(k, p);
  if (!j) {
    throw Error(ErrorKind::kSingularJacobian,
                "projective Jacobian undefined at this point");
  }
  return *j;
}

}  // namespace photoba
