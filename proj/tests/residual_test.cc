#include "photoba/residual.h"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "photoba/photometric_ba.h"
#include "photoba/synthetic.h"
#include "test_support.h"

namespace photoba {
namespace {

using testing::AnalyticField;
using testing::RandomPose;

Intrinsics Camera() { return PinholeIntrinsics(128, 96, 100.0); }
Intrinsics Panorama() {
  return SphericalIntrinsics(256, 64, std::numbers::pi / 2);
}

TEST(Reproject, SelfReprojectionIsIdentity) {
  const Intrinsics k = Camera();
  std::mt19937_64 rng(61);
  for (int n = 0; n < 50; ++n) {
    const Pose x = RandomPose(rng, 3, 3);
    const Eigen::Vector2d u(testing::Uniform(rng, 0, 127),
                            testing::Uniform(rng, 0, 95));
    const auto r = Reproject(u, 2.0, x, x, SensorExtrinsics(), k, k);
    ASSERT_TRUE(r);
    EXPECT_LT((r->pixel - u).norm(), 1e-9);
    EXPECT_LT((r->point - Unproject(k, u, 2.0)).norm(), 1e-12);
  }
}

TEST(Reproject, ForwardMotionTowardPlaneMovesPixelsOutward) {
  const Intrinsics k = Camera();
  const double plane = 4.0;
  const double tz = 0.5;
  const Pose xj(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, tz));
  for (const Eigen::Vector2d u :
       {Eigen::Vector2d(20, 30), Eigen::Vector2d(100, 80),
        Eigen::Vector2d(63.5, 10)}) {
    const auto r = Reproject(u, plane, Pose(), xj, SensorExtrinsics(), k, k);
    ASSERT_TRUE(r);
    // Homography of a fronto-parallel plane under forward motion.
    const Eigen::Vector2d c(k.cx, k.cy);
    const Eigen::Vector2d expected = c + (u - c) * plane / (plane - tz);
    EXPECT_LT((r->pixel - expected).norm(), 1e-10);
    EXPECT_GE((r->pixel - c).norm(), (u - c).norm());
  }
}

TEST(Reproject, MatchesDenseMatrixComposition) {
  std::mt19937_64 rng(67);
  for (const Intrinsics& k : {Camera(), Panorama()}) {
    int checked = 0;
    while (checked < 200) {
      const Pose ext = RandomPose(rng, 0.3, 3);
      const Pose xi = RandomPose(rng, 2, 3);
      const Pose xj = xi * RandomPose(rng, 0.2, 0.3);
      const Eigen::Vector2d u(testing::Uniform(rng, 0, k.width - 1),
                              testing::Uniform(rng, 0, k.height - 1));
      const double d = testing::Uniform(rng, 1, 6);
      const auto r = Reproject(u, d, xi, xj, SensorExtrinsics{ext}, k, k);
      const Eigen::Matrix4d m = (xj.matrix() * ext.matrix()).inverse() *
                                xi.matrix() * ext.matrix();
      const Eigen::Vector4d p =
          m * Unproject(k, u, d).homogeneous();
      const auto expected = Project(k, p.head<3>());
      ASSERT_EQ(bool(r), bool(expected));
      if (!r) continue;
      EXPECT_LT((r->point - p.head<3>()).norm(), 1e-10);
      EXPECT_LT((r->pixel - *expected).norm(), 1e-9);
      ++checked;
    }
  }
}

TEST(Reproject, InvalidDepthIsRejected) {
  const Intrinsics k = Camera();
  EXPECT_FALSE(Reproject(Eigen::Vector2d(5, 5), 0.0, Pose(), Pose(),
                         SensorExtrinsics(), k, k));
  EXPECT_FALSE(Reproject(Eigen::Vector2d(5, 5), 50.0, Pose(), Pose(),
                         SensorExtrinsics(), k, k));
}

Scene TexturedWall(double z) {
  Scene scene;
  Surface wall = Surface::Plane(Eigen::Vector3d::UnitZ(), z, 0.6);
  wall.texture = {{0.3, 3.0}, {0.1, 9.0}};
  scene.surfaces.push_back(wall);
  return scene;
}

CueImage RenderedImage(const Scene& scene, const Intrinsics& k,
                       const Pose& pose, double intensity_offset = 0.0) {
  RenderedView v = Render(scene, k, pose);
  for (double& g : v.intensity.data()) g += intensity_offset;
  const std::vector<double> scales = {1.0};
  return BuildPyramid(v.intensity, v.depth, k, scales, NormalConfig())
      .levels[0];
}

TEST(CueResidual, IdenticalFramesGiveZero) {
  const CueImage img = RenderedImage(TexturedWall(3), Camera(), Pose());
  for (int y = 2; y < 94; y += 7) {
    for (int x = 2; x < 126; x += 7) {
      const ResidualBlock b =
          EvaluatePixel(img, img, Pose(), Pose(), Pose(), x, y, false);
      ASSERT_TRUE(b.valid) << x << "," << y;
      EXPECT_LT(b.residual.cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(CueResidual, IntensityOffset) {
  const Intrinsics k = Camera();
  const CueImage src = RenderedImage(TexturedWall(3), k, Pose());
  const CueImage dst = RenderedImage(TexturedWall(3), k, Pose(), 0.1);
  const ResidualBlock b =
      EvaluatePixel(src, dst, Pose(), Pose(), Pose(), 40, 50, false);
  ASSERT_TRUE(b.valid);
  EXPECT_NEAR(b.residual[0], -0.1, 1e-12);
  EXPECT_LT(b.residual.tail<4>().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CueResidual, DisplacementAlongPlaneNormal) {
  const Intrinsics k = Camera();
  const CueImage img = RenderedImage(TexturedWall(3), k, Pose());
  const Pose xj(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 0.01));
  for (const auto& [x, y] : {std::pair(64, 48), std::pair(30, 20),
                             std::pair(100, 70)}) {
    const ResidualBlock b = EvaluatePixel(img, img, Pose(), xj, Pose(), x, y,
                                          false);
    ASSERT_TRUE(b.valid);
    EXPECT_NEAR(b.residual[1], -0.01, 1e-9);
  }
}

TEST(CueResidual, SphericalDepthIsRange) {
  const Intrinsics k = Panorama();
  Scene room;
  Surface box = Surface::Box(Eigen::Vector3d(-4, -3, -2),
                             Eigen::Vector3d(4, 3, 2), 0.5);
  box.texture = {{0.3, 2.0}};
  room.surfaces.push_back(box);
  const CueImage img = RenderedImage(room, k, Pose());
  const Pose xj(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.02, 0, 0));
  const ResidualBlock b = EvaluatePixel(img, img, Pose(), xj, Pose(),
                                        int(k.cx), int(k.cy), false);
  ASSERT_TRUE(b.valid);
  // Range, not z, of the point seen from the displaced pose.
  const int x = int(k.cx);
  const int y = int(k.cy);
  const Eigen::Vector3d p =
      Unproject(k, Eigen::Vector2d(x, y), img.depth()(x, y));
  EXPECT_NEAR(b.predicted_depth, (p - xj.translation()).norm(), 1e-12);
  EXPECT_LT(b.predicted_depth, img.depth()(x, y) - 0.019);
}

TEST(CueJacobians, MatchFiniteDifferences) {
  std::mt19937_64 rng(71);
  const AnalyticField field;
  for (const Intrinsics& k : {Camera(), Panorama()}) {
    for (int n = 0; n < 100; ++n) {
      const testing::JacobianCase c = testing::RandomJacobianCase(k, rng);
      const testing::JacobianCheck check = testing::CheckBlockJacobians(
          k, c.xi, c.xj, c.extrinsics, c.source, field, 1e-4, 1e-7);
      EXPECT_TRUE(check.ok()) << ProjectionModelName(k.model) << " case " << n
                              << " excess " << check.worst_excess;
      EXPECT_EQ(check.entries, 60);
    }
  }
}

// Constant destination cues: the image-gradient terms vanish and only the
// depth and normal mappings remain.
struct ConstantField {
  std::optional<CueSample> Sample(const Eigen::Vector2d&) const {
    CueSample s;
    s.value << 0.5, 3.0, 0, 0, -1;
    s.gradient.setZero();
    return s;
  }
};

TEST(CueJacobians, ConstantDestination) {
  const Intrinsics k = Camera();
  SourcePoint sp;
  sp.pixel = Eigen::Vector2d(40, 30);
  sp.point = Unproject(k, sp.pixel, 2.0);
  sp.normal = Eigen::Vector3d(0.2, -0.1, -1).normalized();
  sp.intensity = 0.4;
  ResidualBlock b;
  ASSERT_TRUE(EvaluateBlock(PairContext(Pose(), Pose(), Pose(), k), sp,
                            ConstantField(), true, &b));
  EXPECT_EQ(b.jac_i.row(0), Eigen::RowVectorXd::Zero(6));
  EXPECT_EQ(b.jac_j.row(0), Eigen::RowVectorXd::Zero(6));
  // Depth row: [0 0 1] d p_bar / d dx.
  Eigen::Matrix<double, 1, 6> expected_i;
  expected_i << 0, 0, 1, (-2.0 * Skew(sp.point)).row(2);
  EXPECT_LT((b.jac_i.row(1) - expected_i).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((b.jac_j.row(1) + expected_i).cwiseAbs().maxCoeff(), 1e-12);
  // Normal rows: rotation only, -2 skew(n) for X_i at coincident poses.
  EXPECT_LT((b.jac_i.block<3, 3>(2, 0).cwiseAbs().maxCoeff()), 1e-15);
  EXPECT_LT((b.jac_i.block<3, 3>(2, 3) + 2.0 * Skew(sp.normal))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_LT((b.jac_j.block<3, 3>(2, 3) - 2.0 * Skew(sp.normal))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(CueJacobians, NormalTranslationBlockIsGradientTermOnly) {
  const Intrinsics k = Camera();
  SourcePoint sp;
  sp.pixel = Eigen::Vector2d(70, 40);
  sp.point = Unproject(k, sp.pixel, 2.5);
  sp.normal = Eigen::Vector3d(0, 0.3, -1).normalized();
  sp.intensity = 0.4;
  const AnalyticField field;
  ResidualBlock b;
  ASSERT_TRUE(EvaluateBlock(PairContext(Pose(), Pose(), Pose(), k), sp, field,
                            true, &b));
  const Eigen::Vector2d u = *Project(k, sp.point);
  const CueSample s = *field.Sample(u);
  const Matrix23d jp = ProjectiveJacobian(k, sp.point);
  const Eigen::Matrix3d expected = -s.gradient.bottomRows<3>() * jp;
  EXPECT_LT((b.jac_i.block<3, 3>(2, 0) - expected).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Occlusion, FrameAgainstItselfHasNone) {
  Scene scene = TexturedWall(4);
  scene.surfaces.push_back(Surface::Box(Eigen::Vector3d(-0.3, -0.3, 1.8),
                                        Eigen::Vector3d(0.3, 0.3, 2.4), 0.8));
  const CueImage img = RenderedImage(scene, Camera(), Pose());
  const auto status =
      SuppressOcclusions(img, img, Pose(), Pose(), Pose(), 0.05);
  for (const BlockStatus s : status.data()) {
    EXPECT_NE(s, BlockStatus::kOccluded);
  }
}

TEST(Occlusion, WallBehindBoxMatchesRayCast) {
  Scene scene = TexturedWall(4);
  scene.surfaces.push_back(Surface::Box(Eigen::Vector3d(-0.3, -0.3, 1.8),
                                        Eigen::Vector3d(0.3, 0.3, 2.4), 0.8));
  const Intrinsics k = Camera();
  const Pose xj(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.6, 0, 0));
  const CueImage src = RenderedImage(scene, k, Pose());
  const CueImage dst = RenderedImage(scene, k, xj);
  const auto status = SuppressOcclusions(src, dst, Pose(), xj, Pose(), 0.05);

  int hidden = 0;
  int hidden_flagged = 0;
  int visible = 0;
  int visible_flagged = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (status(x, y) == BlockStatus::kInvalid) continue;
      const Eigen::Vector3d p = Unproject(k, Eigen::Vector2d(x, y),
                                          src.depth()(x, y));
      const Eigen::Vector3d dir = p - xj.translation();
      const auto hit = CastRay(scene, xj.translation(), dir.normalized());
      ASSERT_TRUE(hit);
      if (hit->t < dir.norm() - 1e-3) {
        ++hidden;
        if (status(x, y) == BlockStatus::kOccluded) ++hidden_flagged;
      } else {
        ++visible;
        if (status(x, y) == BlockStatus::kOccluded) ++visible_flagged;
      }
    }
  }
  EXPECT_GT(hidden, 100);
  EXPECT_GT(hidden_flagged, 0.99 * hidden);
  EXPECT_LT(visible_flagged, 0.01 * visible);
}

TEST(Occlusion, InvalidDestinationDepthInvalidatesEverything) {
  const Intrinsics k = Camera();
  const CueImage src = RenderedImage(TexturedWall(3), k, Pose());
  const CueImage dst(Grid<double>(128, 96, 0.5), Grid<double>(128, 96, 0.0),
                     Grid<Eigen::Vector3d>(128, 96, InvalidNormal()), k);
  for (double tol : {1e-3, 0.05, 10.0}) {
    const auto status = SuppressOcclusions(src, dst, Pose(), Pose(), Pose(), tol);
    for (const BlockStatus s : status.data()) {
      EXPECT_EQ(s, BlockStatus::kInvalid);
    }
  }
}

}  // namespace
}  // namespace photoba
