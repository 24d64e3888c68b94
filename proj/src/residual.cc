#include "photoba/residual.h"

#include <algorithm>

namespace photoba {

std::vector<SourcePoint> CollectSourcePoints(const CueImage& image,
                                             int stride) {
  stride = std::max(stride, 1);
  std::vector<SourcePoint> points;
  for (int y = 0; y < image.height(); y += stride) {
    for (int x = 0; x < image.width(); x += stride) {
      if (!image.IsValid(x, y)) continue;
      SourcePoint sp;
      sp.pixel = Eigen::Vector2d(x, y);
      sp.point = UnprojectUnchecked(image.intrinsics(), sp.pixel,
                                    image.depth()(x, y));
      sp.normal = image.normals()(x, y);
      sp.intensity = image.intensity()(x, y);
      points.push_back(sp);
    }
  }
  return points;
}

PairContext::PairContext(const Pose& xi, const Pose& xj,
                         const Pose& extrinsics, const Intrinsics& destination)
    : destination_(destination),
      ro_(extrinsics.rotation()),
      ro_t_(extrinsics.rotation().transpose()),
      to_(extrinsics.translation()) {
  const Eigen::Matrix3d rj_t = xj.rotation().transpose();
  r_ji_ = rj_t * xi.rotation();
  t_ji_ = rj_t * (xi.translation() - xj.translation());
  ro_t_r_ji_ = ro_t_ * r_ji_;
  normal_rotation_ = ro_t_r_ji_ * ro_;
}

std::optional<Reprojection> Reproject(const Eigen::Vector2d& u, double d,
                                      const Pose& xi, const Pose& xj,
                                      const SensorExtrinsics& extrinsics,
                                      const Intrinsics& source,
                                      const Intrinsics& destination) {
  if (!IsValidDepth(d) || !source.InDepthRange(d)) return std::nullopt;
  const PairContext ctx(xi, xj, extrinsics.offset, destination);
  const Eigen::Vector3d p = UnprojectUnchecked(source, u, d);
  const Eigen::Vector3d p_bar =
      ctx.SensorInJ(ctx.PlatformInJ(ctx.PlatformPoint(p)));
  const auto pixel = Project(destination, p_bar);
  if (!pixel) return std::nullopt;
  return Reprojection{*pixel, p_bar};
}

}  // namespace photoba
