#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "photoba/dataset_io.h"
#include "photoba/evaluation.h"
#include "photoba/geometry.h"
#include "photoba/image.h"
#include "photoba/sensor_model.h"

namespace photoba {

// One sinusoidal albedo component:
// amplitude * (sin(f x) + sin(f y + 1) + sin(f z + 2)) / 3.
struct TextureWave {
  double amplitude = 0.0;
  double frequency = 1.0;  // rad/m
};

struct Surface {
  enum class Kind { kPlane, kBox };
  Kind kind = Kind::kPlane;
  // Plane: points x with normal . x = offset.
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  // Axis-aligned box, visible from outside and from inside.
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Ones();
  double albedo = 0.5;
  std::vector<TextureWave> texture;

  static Surface Plane(const Eigen::Vector3d& normal, double offset,
                       double albedo);
  static Surface Box(const Eigen::Vector3d& min, const Eigen::Vector3d& max,
                     double albedo);
  double AlbedoAt(const Eigen::Vector3d& x) const;
};

struct Scene {
  std::vector<Surface> surfaces;
  Eigen::Vector3d light = Eigen::Vector3d(0.4, 0.3, 0.85).normalized();
  double ambient = 0.35;

  // Throws kConfig for an empty scene or a malformed surface.
  void Validate() const;
};

struct RayHit {
  double t = 0.0;
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // unit, facing the ray origin
  int surface = -1;
};

// Nearest intersection with t > t_min along origin + t * direction.
std::optional<RayHit> CastRay(const Scene& scene, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& direction,
                              double t_min = 1e-9);

// albedo * (ambient + (1 - ambient) * max(0, n . light)), clamped to [0, 1].
double Shade(const Scene& scene, const RayHit& hit);

struct RenderedView {
  Grid<double> intensity;
  Grid<double> depth;  // depth (pinhole) or range (spherical); 0 = no hit
  Grid<Eigen::Vector3d> normals;  // sensor frame, NaN where no hit
};

// Ray casts one view. `sensor_pose` maps sensor coordinates to the world.
RenderedView Render(const Scene& scene, const Intrinsics& intrinsics,
                    const Pose& sensor_pose, int threads = 1);

// Adds zero-mean Gaussian noise to intensity and valid depths.
void AddNoise(RenderedView* view, double intensity_sigma, double depth_sigma,
              std::uint64_t seed);

// Room [-4,4] x [-3,3] x [0,3] (z up) with textured walls and a few boxes.
Scene BoxRoomScene();

// 128 x 96 style pinhole (x right, y down, z forward) with the principal
// point at the image center.
Intrinsics PinholeIntrinsics(int width, int height, double focal);
// Full-turn panorama (x forward, z up) covering +-vertical_fov/2.
Intrinsics SphericalIntrinsics(int width, int height, double vertical_fov);

// Platform frame = camera frame. The LiDAR sits 0.1 m above the camera
// with its x axis along the camera's optical axis and z up.
Pose LidarExtrinsics();

// Ground-truth platform poses inside the box room, timestamps 0.1 s apart.
Trajectory BoxRoomTrajectory(int poses);

// Per-axis Gaussian noise: translation sigma_t meters, rotation vector
// sigma_r radians. Deterministic for a given seed.
Trajectory PerturbTrajectory(const Trajectory& trajectory, double sigma_t,
                             double sigma_r, std::uint64_t seed);

struct SyntheticSensor {
  SensorConfig config;
  double intensity_noise = 0.0;
  double depth_noise = 0.0;
};

struct SyntheticSpec {
  Scene scene;
  std::vector<SyntheticSensor> sensors;
  Trajectory groundtruth;
  Trajectory initial;
  std::vector<double> pyramid_scales = {0.125, 0.25, 0.5};
  std::uint64_t seed = 1;
};

// Renders every sensor at every ground-truth pose and writes manifest.json,
// trajectory.txt (the initial guess), groundtruth.txt and the images.
// Returns the manifest path.
std::filesystem::path GenerateSynthetic(const SyntheticSpec& spec,
                                        const std::filesystem::path& dir,
                                        int threads = 1);

// Box room with an RGB-D camera, a LiDAR, or both.
SyntheticSpec BoxRoomSpec(int poses, bool rgbd, bool lidar, double sigma_t,
                          double sigma_r, std::uint64_t seed);

// Scene spec file; see docs/formats.md.
SyntheticSpec SyntheticSpecFromJson(const std::string& text);

}  // namespace photoba
