#include "photoba/evaluation.h"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "photoba/error.h"

namespace photoba {
namespace {

// Largest-to-smallest singular values of the centered point set.
Eigen::Vector3d Spread(const std::vector<Eigen::Vector3d>& points,
                       const Eigen::Vector3d& centroid) {
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    scatter += (p - centroid) * (p - centroid).transpose();
  }
  return Eigen::JacobiSVD<Eigen::Matrix3d>(scatter).singularValues();
}

bool Collinear(const Eigen::Vector3d& spread) {
  return !(spread[0] > 0.0) || spread[1] <= 1e-12 * spread[0];
}

}  // namespace

void ValidateTrajectory(const Trajectory& trajectory) {
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    if (!std::isfinite(trajectory[k].timestamp)) {
      throw Error(ErrorKind::kConfig,
                  "non-finite timestamp at pose " + std::to_string(k));
    }
    if (k > 0 && !(trajectory[k].timestamp > trajectory[k - 1].timestamp)) {
      throw Error(ErrorKind::kConfig,
                  "timestamps not strictly increasing at pose " +
                      std::to_string(k));
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> Associate(
    const Trajectory& est, const Trajectory& ref, double max_dt) {
  if (est.empty() || ref.empty()) {
    throw Error(ErrorKind::kNoAssociation, "empty trajectory");
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t a = 0; a < est.size(); ++a) {
    for (std::size_t b = 0; b < ref.size(); ++b) {
      const double dt = std::abs(est[a].timestamp - ref[b].timestamp);
      if (dt <= max_dt) candidates.emplace_back(dt, a, b);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> est_used(est.size(), false);
  std::vector<bool> ref_used(ref.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [dt, a, b] : candidates) {
    if (est_used[a] || ref_used[b]) continue;
    est_used[a] = ref_used[b] = true;
    pairs.emplace_back(a, b);
  }
  if (pairs.empty()) {
    throw Error(ErrorKind::kNoAssociation,
                "no timestamps match within " + std::to_string(max_dt) + " s");
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

Pose HornAlign(const std::vector<Eigen::Vector3d>& est,
               const std::vector<Eigen::Vector3d>& ref) {
  if (est.size() != ref.size()) {
    throw Error(ErrorKind::kConfig, "point sets differ in size");
  }
  if (est.size() < 3) {
    throw Error(ErrorKind::kDegenerateAlignment,
                "alignment needs at least 3 points, got " +
                    std::to_string(est.size()));
  }
  Eigen::Vector3d ce = Eigen::Vector3d::Zero();
  Eigen::Vector3d cr = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < est.size(); ++k) {
    ce += est[k];
    cr += ref[k];
  }
  ce /= static_cast<double>(est.size());
  cr /= static_cast<double>(ref.size());
  if (Collinear(Spread(est, ce)) || Collinear(Spread(ref, cr))) {
    throw Error(ErrorKind::kDegenerateAlignment,
                "points are collinear or coincident");
  }

  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < est.size(); ++k) {
    m += (est[k] - ce) * (ref[k] - cr).transpose();
  }
  const double sxx = m(0, 0), sxy = m(0, 1), sxz = m(0, 2);
  const double syx = m(1, 0), syy = m(1, 1), syz = m(1, 2);
  const double szx = m(2, 0), szy = m(2, 1), szz = m(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  const Eigen::Vector4d v = eig.eigenvectors().col(3);
  const Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  return Pose(r, cr - r * ce);
}

AteResult ComputeAte(const Trajectory& est, const Trajectory& ref,
                     double max_dt) {
  const auto pairs = Associate(est, ref, max_dt);
  std::vector<Eigen::Vector3d> pe, pr;
  for (const auto& [a, b] : pairs) {
    pe.push_back(est[a].pose.translation());
    pr.push_back(ref[b].pose.translation());
  }
  AteResult out;
  out.pairs = pairs.size();
  out.alignment = HornAlign(pe, pr);
  double sq = 0.0;
  double rot_sq = 0.0;
  for (const auto& [a, b] : pairs) {
    const Pose aligned = out.alignment * est[a].pose;
    sq += (aligned.translation() - ref[b].pose.translation()).squaredNorm();
    const double angle = RotationAngle(aligned.rotation().transpose() *
                                       ref[b].pose.rotation());
    rot_sq += angle * angle;
  }
  out.rmse = std::sqrt(sq / pairs.size());
  out.rotation_rmse = std::sqrt(rot_sq / pairs.size());
  return out;
}

}  // namespace photoba
