#include "photoba/cue_image.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "photoba/error.h"
#include "photoba/parallel.h"

namespace photoba {
namespace {

// Guards floor() against products like 0.125 * 740 landing a hair below an
// integer.
constexpr double kFloorEpsilon = 1e-9;

int FloorIndex(double v) {
  return static_cast<int>(std::floor(v + kFloorEpsilon));
}

int WrapColumn(int x, int width) {
  const int m = x % width;
  return m < 0 ? m + width : m;
}

}  // namespace

CueImage::CueImage(Grid<double> intensity, Grid<double> depth,
                   Grid<Eigen::Vector3d> normals, const Intrinsics& intrinsics,
                   double max_depth_jump)
    : intrinsics_(intrinsics),
      max_depth_jump_(max_depth_jump),
      intensity_(std::move(intensity)),
      depth_(std::move(depth)),
      normals_(std::move(normals)) {
  intrinsics_.Validate();
  const int w = intrinsics_.width;
  const int h = intrinsics_.height;
  if (intensity_.width() != w || intensity_.height() != h ||
      depth_.width() != w || depth_.height() != h || normals_.width() != w ||
      normals_.height() != h) {
    throw Error(ErrorKind::kConfig,
                "cue image channels do not match the intrinsics size");
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double& d = depth_(x, y);
      if (!IsValidDepth(d) || !intrinsics_.InDepthRange(d)) d = 0.0;
      if (d == 0.0) normals_(x, y) = InvalidNormal();
    }
  }
  ComputeDerived();
}

void CueImage::ComputeDerived() {
  const int w = width();
  const int h = height();
  const bool wraps = intrinsics_.WrapsAzimuth();
  cues_ = Grid<Vector5d>(w, h, Vector5d::Zero());
  gradients_ = Grid<Matrix52d>(w, h, Matrix52d::Zero());
  valid_ = Grid<std::uint8_t>(w, h, 0);
  usable_ = Grid<std::uint8_t>(w, h, 0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = intensity_(x, y);
      const double d = depth_(x, y);
      const Eigen::Vector3d& n = normals_(x, y);
      const bool ok = std::isfinite(g) && IsValidDepth(d) && IsValidNormal(n);
      valid_(x, y) = ok ? 1 : 0;
      if (ok) cues_(x, y) << g, d, n;
    }
  }
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid_(x, y)) continue;
      int xl = x - 1;
      int xr = x + 1;
      if (wraps) {
        xl = WrapColumn(xl, w);
        xr = WrapColumn(xr, w);
      } else if (xl < 0 || xr >= w) {
        continue;
      }
      if (!valid_(xl, y) || !valid_(xr, y) || !valid_(x, y - 1) ||
          !valid_(x, y + 1)) {
        continue;
      }
      if (!OnTangentPlane(x, y, xl, y) || !OnTangentPlane(x, y, xr, y) ||
          !OnTangentPlane(x, y, x, y - 1) || !OnTangentPlane(x, y, x, y + 1)) {
        continue;
      }
      usable_(x, y) = 1;
      gradients_(x, y).col(0) = 0.5 * (cues_(xr, y) - cues_(xl, y));
      gradients_(x, y).col(1) = 0.5 * (cues_(x, y + 1) - cues_(x, y - 1));
    }
  }
}

bool CueImage::OnTangentPlane(int x, int y, int nx, int ny) const {
  const Eigen::Vector3d p =
      UnprojectUnchecked(intrinsics_, Eigen::Vector2d(x, y), depth_(x, y));
  const Eigen::Vector3d& n = normals_(x, y);
  const Eigen::Vector3d ray =
      UnprojectUnchecked(intrinsics_, Eigen::Vector2d(nx, ny), 1.0);
  const double denom = n.dot(ray);
  if (std::abs(denom) < 1e-9) return false;
  const double predicted = n.dot(p) / denom;
  const double measured = depth_(nx, ny);
  return predicted > 0.0 &&
         std::abs(predicted - measured) <= max_depth_jump_ * measured;
}

std::size_t CueImage::CountValid() const {
  return static_cast<std::size_t>(
      std::count(valid_.data().begin(), valid_.data().end(), 1));
}

std::optional<CueSample> CueImage::Sample(const Eigen::Vector2d& u) const {
  const int w = width();
  const int h = height();
  if (!std::isfinite(u.x()) || !std::isfinite(u.y())) return std::nullopt;
  const double fx0 = std::floor(u.x());
  const double fy0 = std::floor(u.y());
  const double ax = u.x() - fx0;
  const double ay = u.y() - fy0;
  int x0 = static_cast<int>(fx0);
  int x1 = x0 + 1;
  const int y0 = static_cast<int>(fy0);
  const int y1 = y0 + 1;
  if (y0 < 0 || y1 >= h) return std::nullopt;
  if (intrinsics_.WrapsAzimuth()) {
    x0 = WrapColumn(x0, w);
    x1 = WrapColumn(x1, w);
  } else if (x0 < 0 || x1 >= w) {
    return std::nullopt;
  }
  if (!usable_(x0, y0) || !usable_(x1, y0) || !usable_(x0, y1) ||
      !usable_(x1, y1)) {
    return std::nullopt;
  }
  const double w00 = (1.0 - ax) * (1.0 - ay);
  const double w10 = ax * (1.0 - ay);
  const double w01 = (1.0 - ax) * ay;
  const double w11 = ax * ay;
  CueSample s;
  s.value = w00 * cues_(x0, y0) + w10 * cues_(x1, y0) + w01 * cues_(x0, y1) +
            w11 * cues_(x1, y1);
  s.gradient = w00 * gradients_(x0, y0) + w10 * gradients_(x1, y0) +
               w01 * gradients_(x0, y1) + w11 * gradients_(x1, y1);
  return s;
}

std::optional<ChannelSample> CueImage::Sample(const Eigen::Vector2d& u,
                                              Cue channel) const {
  const auto s = Sample(u);
  if (!s) return std::nullopt;
  const int c = static_cast<int>(channel);
  return ChannelSample{s->value[c], s->gradient.row(c).transpose()};
}

Grid<Eigen::Vector3d> EstimateNormals(const Grid<double>& depth,
                                      const Intrinsics& intrinsics,
                                      const NormalConfig& config,
                                      int threads) {
  const int w = depth.width();
  const int h = depth.height();
  if (w != intrinsics.width || h != intrinsics.height) {
    throw Error(ErrorKind::kConfig, "depth grid does not match intrinsics");
  }
  const bool wraps = intrinsics.WrapsAzimuth();

  auto depth_ok = [&](double d) {
    return IsValidDepth(d) && intrinsics.InDepthRange(d);
  };
  Grid<Eigen::Vector3d> points(w, h, Eigen::Vector3d::Zero());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (depth_ok(depth(x, y))) {
        points(x, y) =
            UnprojectUnchecked(intrinsics, Eigen::Vector2d(x, y), depth(x, y));
      }
    }
  }

  Grid<Eigen::Vector3d> normals(w, h, InvalidNormal());
  ParallelFor(static_cast<std::size_t>(h), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const double d = depth(x, y);
      if (!depth_ok(d)) continue;
      const double radius =
          std::clamp(config.k_tau / d, config.min_radius, config.max_radius);
      const int reach = static_cast<int>(std::ceil(radius));
      const double radius_sq = radius * radius;

      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
      int count = 0;
      for (int dy = -reach; dy <= reach; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) continue;
        for (int dx = -reach; dx <= reach; ++dx) {
          if (dx * dx + dy * dy >= radius_sq) continue;
          int nx = x + dx;
          if (wraps) {
            nx = WrapColumn(nx, w);
          } else if (nx < 0 || nx >= w) {
            continue;
          }
          const double nd = depth(nx, ny);
          if (!depth_ok(nd) || std::abs(nd - d) > config.max_depth_jump * d) {
            continue;
          }
          const Eigen::Vector3d& p = points(nx, ny);
          sum += p;
          outer += p * p.transpose();
          ++count;
        }
      }
      if (count < std::max(config.min_points, 3)) continue;
      const Eigen::Vector3d mean = sum / count;
      const Eigen::Matrix3d scatter =
          outer / count - mean * mean.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
      const Eigen::Vector3d lambda = eig.eigenvalues();
      if (!(lambda[1] > config.min_eigen_ratio * lambda[2])) continue;
      Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
      if (n.dot(points(x, y)) > 0.0) n = -n;
      normals(x, y) = n;
    }
  });
  return normals;
}

namespace {

CueImage Downscale(const Grid<double>& intensity, const Grid<double>& depth,
                   const Grid<Eigen::Vector3d>& normals,
                   const Intrinsics& intrinsics, double scale,
                   double max_depth_jump, int threads) {
  const int w = intensity.width();
  const int h = intensity.height();
  const int lw = FloorIndex(w * scale);
  const int lh = FloorIndex(h * scale);
  if (lw < 2 || lh < 2) {
    throw Error(ErrorKind::kConfig, "pyramid scale " + std::to_string(scale) +
                                        " yields an image smaller than 2x2");
  }
  Grid<double> li(lw, lh, std::nan(""));
  Grid<double> ld(lw, lh, 0.0);
  Grid<Eigen::Vector3d> ln(lw, lh, InvalidNormal());

  ParallelFor(static_cast<std::size_t>(lh), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    const int sy0 = FloorIndex(y / scale);
    const int sy1 = std::min(h, FloorIndex((y + 1) / scale));
    std::vector<double> depths;
    for (int x = 0; x < lw; ++x) {
      const int sx0 = FloorIndex(x / scale);
      const int sx1 = std::min(w, FloorIndex((x + 1) / scale));
      double isum = 0.0;
      int icount = 0;
      Eigen::Vector3d nsum = Eigen::Vector3d::Zero();
      int ncount = 0;
      depths.clear();
      for (int sy = sy0; sy < sy1; ++sy) {
        for (int sx = sx0; sx < sx1; ++sx) {
          const double g = intensity(sx, sy);
          if (std::isfinite(g)) {
            isum += g;
            ++icount;
          }
          const double d = depth(sx, sy);
          if (!IsValidDepth(d) || !intrinsics.InDepthRange(d)) continue;
          depths.push_back(d);
          if (IsValidNormal(normals(sx, sy))) {
            nsum += normals(sx, sy);
            ++ncount;
          }
        }
      }
      if (icount > 0) li(x, y) = isum / icount;
      if (depths.empty()) continue;
      const auto mid = depths.begin() + (depths.size() - 1) / 2;
      std::nth_element(depths.begin(), mid, depths.end());
      ld(x, y) = *mid;
      if (ncount > 0) {
        const Eigen::Vector3d mean = nsum / ncount;
        if (mean.norm() >= 0.5) ln(x, y) = mean.normalized();
      }
    }
  });
  return CueImage(std::move(li), std::move(ld), std::move(ln),
                  intrinsics.Scaled(scale, lw, lh), max_depth_jump);
}

}  // namespace

CuePyramid BuildPyramid(const Grid<double>& intensity,
                        const Grid<double>& depth, const Intrinsics& intrinsics,
                        std::span<const double> scales,
                        const NormalConfig& config, int threads) {
  if (scales.empty()) {
    throw Error(ErrorKind::kConfig, "pyramid needs at least one scale");
  }
  for (std::size_t k = 0; k < scales.size(); ++k) {
    if (!(scales[k] > 0.0 && scales[k] <= 1.0)) {
      throw Error(ErrorKind::kConfig, "pyramid scales must lie in (0, 1]");
    }
    if (k > 0 && !(scales[k] > scales[k - 1])) {
      throw Error(ErrorKind::kConfig,
                  "pyramid scales must be strictly increasing");
    }
  }
  intrinsics.Validate();
  if (intensity.width() != intrinsics.width ||
      intensity.height() != intrinsics.height ||
      depth.width() != intrinsics.width || depth.height() != intrinsics.height) {
    throw Error(ErrorKind::kConfig, "input images do not match intrinsics");
  }

  const Grid<Eigen::Vector3d> normals =
      EstimateNormals(depth, intrinsics, config, threads);
  CuePyramid pyramid;
  for (const double s : scales) {
    if (s == 1.0) {
      pyramid.levels.emplace_back(intensity, depth, normals, intrinsics,
                                  config.max_depth_jump);
    } else {
      pyramid.levels.push_back(
          Downscale(intensity, depth, normals, intrinsics, s,
                    config.max_depth_jump, threads));
    }
    pyramid.scales.push_back(s);
  }
  return pyramid;
}

}  // namespace photoba
