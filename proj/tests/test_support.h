#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <memory>
#include <random>
#include <vector>
#include <string>

#include "photoba/cue_image.h"
#include "photoba/geometry.h"
#include "photoba/match_graph.h"
#include "photoba/photometric_ba.h"
#include "photoba/residual.h"
#include "photoba/synthetic.h"

namespace photoba::testing {

inline Eigen::Vector3d RandomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Rotation angle uniform in [0, max_angle], translation uniform in a cube.
inline Pose RandomPose(std::mt19937_64& rng, double max_translation,
                       double max_angle) {
  const Eigen::AngleAxisd aa(Uniform(rng, 0.0, max_angle), RandomUnit(rng));
  const Eigen::Vector3d t(Uniform(rng, -max_translation, max_translation),
                          Uniform(rng, -max_translation, max_translation),
                          Uniform(rng, -max_translation, max_translation));
  return Pose(aa.toRotationMatrix(), t);
}

// Within `rel` of the larger magnitude, or within the absolute floor.
inline bool NearlyEqual(double a, double b, double rel, double abs_floor) {
  const double diff = std::abs(a - b);
  return diff <= abs_floor || diff <= rel * std::max(std::abs(a), std::abs(b));
}

// Smooth destination field with exact derivatives, so that analytic
// Jacobians can be compared against finite differences without the
// mismatch between bilinear values and interpolated gradient images.
struct AnalyticField {
  double scale = 0.05;

  std::optional<CueSample> Sample(const Eigen::Vector2d& u) const {
    const double x = scale * u.x();
    const double y = scale * u.y();
    CueSample s;
    s.value << 0.5 + 0.3 * std::sin(x) * std::cos(0.7 * y),
        3.0 + std::sin(0.5 * x + 0.3 * y),
        0.2 * std::cos(x + y), 0.3 * std::sin(x - 0.4 * y),
        -0.9 + 0.1 * std::cos(0.6 * x) * std::sin(y);
    s.gradient << 0.3 * std::cos(x) * std::cos(0.7 * y),
        -0.21 * std::sin(x) * std::sin(0.7 * y),
        0.5 * std::cos(0.5 * x + 0.3 * y), 0.3 * std::cos(0.5 * x + 0.3 * y),
        -0.2 * std::sin(x + y), -0.2 * std::sin(x + y),
        0.3 * std::cos(x - 0.4 * y), -0.12 * std::cos(x - 0.4 * y),
        -0.06 * std::sin(0.6 * x) * std::sin(y),
        0.1 * std::cos(0.6 * x) * std::cos(y);
    s.gradient *= scale;
    return s;
  }
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("photoba_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Analytic Jacobians of one residual block against central differences
// of the residual under right perturbations of X_i and X_j.
struct JacobianCheck {
  double worst_excess = 0.0;  // largest |a - fd| / allowed
  int entries = 0;
  bool ok() const { return worst_excess <= 1.0; }
};

template <typename Sampler>
JacobianCheck CheckBlockJacobians(const Intrinsics& k, const Pose& xi,
                                  const Pose& xj, const Pose& extrinsics,
                                  const SourcePoint& source,
                                  const Sampler& field, double rel,
                                  double abs_floor, double step = 1e-6) {
  JacobianCheck out;
  ResidualBlock analytic;
  if (!EvaluateBlock(PairContext(xi, xj, extrinsics, k), source, field, true,
                     &analytic)) {
    out.worst_excess = std::numeric_limits<double>::infinity();
    return out;
  }
  for (int pose = 0; pose < 2; ++pose) {
    for (int c = 0; c < 6; ++c) {
      Vector6d e = Vector6d::Zero();
      e[c] = step;
      Vector5d r[2];
      for (int s = 0; s < 2; ++s) {
        const Perturbation d = Perturbation::FromVector(s == 0 ? e : -e);
        const Pose pi = pose == 0 ? BoxPlus(xi, d) : xi;
        const Pose pj = pose == 1 ? BoxPlus(xj, d) : xj;
        ResidualBlock b;
        if (!EvaluateBlock(PairContext(pi, pj, extrinsics, k), source, field,
                           false, &b)) {
          out.worst_excess = std::numeric_limits<double>::infinity();
          return out;
        }
        r[s] = b.residual;
      }
      const Vector5d fd = (r[0] - r[1]) / (2 * step);
      const auto& jac = pose == 0 ? analytic.jac_i : analytic.jac_j;
      for (int row = 0; row < 5; ++row) {
        const double a = jac(row, c);
        const double allowed =
            std::max(abs_floor, rel * std::max(std::abs(a), std::abs(fd[row])));
        out.worst_excess =
            std::max(out.worst_excess, std::abs(a - fd[row]) / allowed);
        ++out.entries;
      }
    }
  }
  return out;
}

// Random residual configuration: a source point in front of the sensor,
// poses a short hop apart, an arbitrary sensor offset, and a destination
// projection away from the image border and the azimuth seam.
struct JacobianCase {
  Intrinsics intrinsics;
  Pose xi;
  Pose xj;
  Pose extrinsics;
  SourcePoint source;
};

inline JacobianCase RandomJacobianCase(const Intrinsics& k,
                                       std::mt19937_64& rng) {
  for (;;) {
    JacobianCase c;
    c.intrinsics = k;
    c.extrinsics = RandomPose(rng, 0.3, 3.0);
    c.xi = RandomPose(rng, 5.0, 3.1);
    c.xj = c.xi * c.extrinsics * RandomPose(rng, 0.15, 0.2) *
           c.extrinsics.inverse();
    const double margin = 6.0;
    c.source.pixel = Eigen::Vector2d(Uniform(rng, margin, k.width - margin),
                                     Uniform(rng, margin, k.height - margin));
    const double d = Uniform(rng, 1.0, 6.0);
    c.source.point = UnprojectUnchecked(k, c.source.pixel, d);
    Eigen::Vector3d n = RandomUnit(rng);
    if (n.dot(c.source.point) > 0) n = -n;
    c.source.normal = n;
    c.source.intensity = Uniform(rng, 0.0, 1.0);
    const PairContext ctx(c.xi, c.xj, c.extrinsics, k);
    const Eigen::Vector3d p_bar =
        ctx.SensorInJ(ctx.PlatformInJ(ctx.PlatformPoint(c.source.point)));
    const auto u = Project(k, p_bar);
    if (!u) continue;
    if (u->x() < margin || u->x() > k.width - margin || u->y() < margin ||
        u->y() > k.height - margin) {
      continue;
    }
    if (!TryProjectiveJacobian(k, p_bar)) continue;
    return c;
  }
}

// Pyramid of a noiseless rendered view.
inline std::shared_ptr<const CuePyramid> RenderPyramid(
    const Scene& scene, const Intrinsics& k, const Pose& sensor_pose,
    const std::vector<double>& scales, int threads = 1) {
  const RenderedView view = Render(scene, k, sensor_pose, threads);
  return std::make_shared<const CuePyramid>(BuildPyramid(
      view.intensity, view.depth, k, scales, NormalConfig(), threads));
}

// Frame node whose pyramid is rendered at `pose`, with identity extrinsics.
inline FrameNode RenderNode(const Scene& scene, const Intrinsics& k, int id,
                            const Pose& pose,
                            const std::vector<double>& scales) {
  FrameNode node;
  node.id = id;
  node.pose_guess = pose;
  node.timestamp = 0.1 * id;
  node.pyramid = RenderPyramid(scene, k, pose, scales);
  return node;
}

// One sensor observing the platform poses `truth` through `extrinsics`,
// with pose guesses `guess` and a graph built from the guesses.
inline SensorTrack RenderedTrack(const Scene& scene, const Intrinsics& k,
                                 const Pose& extrinsics,
                                 const std::vector<Pose>& truth,
                                 const std::vector<Pose>& guess,
                                 const std::vector<double>& scales,
                                 bool sequential = true, int threads = 4) {
  std::vector<FrameNode> nodes;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    FrameNode node;
    node.id = static_cast<int>(i);
    node.pose_guess = guess[i];
    node.timestamp = 0.1 * static_cast<double>(i);
    node.pyramid =
        RenderPyramid(scene, k, truth[i] * extrinsics, scales, threads);
    nodes.push_back(std::move(node));
  }
  SensorTrack track;
  track.extrinsics.offset = extrinsics;
  track.graph = BuildGraph(std::move(nodes), GraphCriteria(), sequential,
                           extrinsics, threads);
  return track;
}

inline std::vector<Pose> PosesOf(const Trajectory& t) {
  std::vector<Pose> out;
  for (const TimedPose& p : t) out.push_back(p.pose);
  return out;
}

}  // namespace photoba::testing
