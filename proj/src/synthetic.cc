#include "photoba/synthetic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "photoba/config_json.h"
#include "photoba/error.h"
#include "photoba/parallel.h"

namespace photoba {
namespace fs = std::filesystem;
namespace {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Slab test. Returns the entry face when the origin is outside, the exit
// face when it is inside.
std::optional<RayHit> IntersectBox(const Surface& box, const Eigen::Vector3d& o,
                                   const Eigen::Vector3d& d, double t_min) {
  double t_near = -kNoHit;
  double t_far = kNoHit;
  int near_axis = -1;
  int far_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t1 = (box.min[a] - o[a]) / d[a];
    double t2 = (box.max[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > t_near) {
      t_near = t1;
      near_axis = a;
    }
    if (t2 < t_far) {
      t_far = t2;
      far_axis = a;
    }
  }
  if (t_near > t_far || t_far <= t_min) return std::nullopt;
  const bool outside = t_near > t_min;
  RayHit hit;
  hit.t = outside ? t_near : t_far;
  const int axis = outside ? near_axis : far_axis;
  if (axis < 0) return std::nullopt;
  hit.normal = Eigen::Vector3d::Zero();
  hit.normal[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
  return hit;
}

std::optional<RayHit> IntersectPlane(const Surface& plane,
                                     const Eigen::Vector3d& o,
                                     const Eigen::Vector3d& d, double t_min) {
  const double denom = plane.normal.dot(d);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = (plane.offset - plane.normal.dot(o)) / denom;
  if (!(t > t_min)) return std::nullopt;
  RayHit hit;
  hit.t = t;
  hit.normal = denom < 0.0 ? plane.normal : Eigen::Vector3d(-plane.normal);
  return hit;
}

// Camera-to-world rotation for a camera at `heading` (yaw about world z,
// 0 looking along +x), tilted by pitch and roll.
Eigen::Matrix3d CameraRotation(double heading, double pitch, double roll) {
  const Eigen::Vector3d forward(std::cos(heading), std::sin(heading), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  Eigen::Matrix3d level;
  level.col(0) = down.cross(forward);
  level.col(1) = down;
  level.col(2) = forward;
  const Eigen::Matrix3d tilt =
      (Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
       Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()))
          .toRotationMatrix();
  return level * tilt;
}

std::uint64_t FrameSeed(std::uint64_t seed, std::size_t sensor,
                        std::size_t frame) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sensor),
                    static_cast<std::uint32_t>(frame)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::Vector3d Vec3(const nlohmann::json& j, const char* key) {
  const auto v = JsonGet<std::vector<double>>(j, key);
  if (v.size() != 3) {
    throw Error(ErrorKind::kParse, std::string("'") + key + "' needs 3 values");
  }
  return {v[0], v[1], v[2]};
}

Surface SurfaceFromJson(const nlohmann::json& j) {
  const std::string type = JsonGet<std::string>(j, "type");
  Surface s;
  if (type == "plane") {
    s = Surface::Plane(Vec3(j, "normal"), JsonGet<double>(j, "offset"), 0.5);
  } else if (type == "box") {
    s = Surface::Box(Vec3(j, "min"), Vec3(j, "max"), 0.5);
  } else {
    throw Error(ErrorKind::kParse, "unknown surface type '" + type + "'");
  }
  JsonRead(j, "albedo", &s.albedo);
  if (j.contains("texture")) {
    for (const auto& w : j["texture"]) {
      s.texture.push_back(
          {JsonGet<double>(w, "amplitude"), JsonGet<double>(w, "frequency")});
    }
  }
  return s;
}

}  // namespace

Surface Surface::Plane(const Eigen::Vector3d& normal, double offset,
                       double albedo) {
  Surface s;
  s.kind = Kind::kPlane;
  s.normal = normal.normalized();
  s.offset = offset / normal.norm();
  s.albedo = albedo;
  return s;
}

Surface Surface::Box(const Eigen::Vector3d& min, const Eigen::Vector3d& max,
                     double albedo) {
  Surface s;
  s.kind = Kind::kBox;
  s.min = min;
  s.max = max;
  s.albedo = albedo;
  return s;
}

double Surface::AlbedoAt(const Eigen::Vector3d& x) const {
  double a = albedo;
  for (const TextureWave& w : texture) {
    const double f = w.frequency;
    a += w.amplitude *
         (std::sin(f * x.x()) + std::sin(f * x.y() + 1.0) +
          std::sin(f * x.z() + 2.0)) /
         3.0;
  }
  return a;
}

void Scene::Validate() const {
  if (surfaces.empty()) throw Error(ErrorKind::kConfig, "empty scene");
  for (const Surface& s : surfaces) {
    if (s.kind == Surface::Kind::kPlane && !(s.normal.norm() > 0.5)) {
      throw Error(ErrorKind::kConfig, "plane with a zero normal");
    }
    if (s.kind == Surface::Kind::kBox && !(s.max.array() > s.min.array()).all()) {
      throw Error(ErrorKind::kConfig, "box with max <= min");
    }
  }
  if (!(light.norm() > 0.0)) throw Error(ErrorKind::kConfig, "zero light");
}

std::optional<RayHit> CastRay(const Scene& scene, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& direction, double t_min) {
  std::optional<RayHit> best;
  for (std::size_t k = 0; k < scene.surfaces.size(); ++k) {
    const Surface& s = scene.surfaces[k];
    auto hit = s.kind == Surface::Kind::kBox
                   ? IntersectBox(s, origin, direction, t_min)
                   : IntersectPlane(s, origin, direction, t_min);
    if (hit && (!best || hit->t < best->t)) {
      hit->surface = static_cast<int>(k);
      best = hit;
    }
  }
  if (best) best->point = origin + best->t * direction;
  return best;
}

double Shade(const Scene& scene, const RayHit& hit) {
  const double lambert =
      std::max(0.0, hit.normal.dot(scene.light.normalized()));
  const double albedo = scene.surfaces[hit.surface].AlbedoAt(hit.point);
  return std::clamp(albedo * (scene.ambient + (1.0 - scene.ambient) * lambert),
                    0.0, 1.0);
}

RenderedView Render(const Scene& scene, const Intrinsics& k,
                    const Pose& sensor_pose, int threads) {
  scene.Validate();
  k.Validate();
  RenderedView view{Grid<double>(k.width, k.height, 0.0),
                    Grid<double>(k.width, k.height, 0.0),
                    Grid<Eigen::Vector3d>(k.width, k.height, InvalidNormal())};
  const Eigen::Matrix3d& r = sensor_pose.rotation();
  const Eigen::Vector3d& origin = sensor_pose.translation();
  ParallelFor(k.height, threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < k.width; ++x) {
      // Unit depth along the ray: the hit distance t is then the depth
      // (pinhole) or the range (spherical).
      const Eigen::Vector3d ray = UnprojectUnchecked(k, Eigen::Vector2d(x, y), 1.0);
      const auto hit = CastRay(scene, origin, r * ray);
      if (!hit) continue;
      view.intensity(x, y) = Shade(scene, *hit);
      if (!k.InDepthRange(hit->t)) continue;
      view.depth(x, y) = hit->t;
      view.normals(x, y) = r.transpose() * hit->normal;
    }
  });
  return view;
}

void AddNoise(RenderedView* view, double intensity_sigma, double depth_sigma,
              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : view->intensity.data()) {
    const double n = normal(rng);
    v += intensity_sigma * n;
  }
  for (double& d : view->depth.data()) {
    const double n = normal(rng);
    if (d > 0.0) d += depth_sigma * n;
  }
}

Scene BoxRoomScene() {
  Scene scene;
  scene.ambient = 0.6;
  auto textured = [](Surface s, double low, double high) {
    s.texture = {{low, 1.3}, {high, 4.7}};
    return s;
  };
  scene.surfaces.push_back(textured(
      Surface::Box({-4.0, -3.0, 0.0}, {4.0, 3.0, 3.0}, 0.5), 0.4, 0.2));
  scene.surfaces.push_back(textured(
      Surface::Box({1.5, -1.2, 0.0}, {2.3, -0.4, 1.0}, 0.3), 0.3, 0.15));
  scene.surfaces.push_back(textured(
      Surface::Box({2.5, 0.5, 0.0}, {3.2, 1.5, 1.6}, 0.7), 0.3, 0.15));
  scene.surfaces.push_back(textured(
      Surface::Box({0.6, 0.9, 0.0}, {1.1, 1.4, 0.6}, 0.45), 0.3, 0.15));
  scene.surfaces.push_back(textured(
      Surface::Box({-2.5, -2.8, 0.0}, {-1.5, -2.0, 1.2}, 0.6), 0.3, 0.15));
  scene.surfaces.push_back(textured(
      Surface::Box({-3.6, 1.8, 0.8}, {-2.8, 2.6, 1.5}, 0.35), 0.3, 0.15));
  return scene;
}

Intrinsics PinholeIntrinsics(int width, int height, double focal) {
  Intrinsics k;
  k.model = ProjectionModel::kPinhole;
  k.fx = k.fy = focal;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  k.width = width;
  k.height = height;
  k.depth_min = 0.1;
  k.depth_max = 12.0;
  return k;
}

Intrinsics SphericalIntrinsics(int width, int height, double vertical_fov) {
  Intrinsics k;
  k.model = ProjectionModel::kSpherical;
  k.fx = width / (2.0 * std::numbers::pi);
  k.fy = -height / vertical_fov;  // rows grow downward, elevation upward
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  k.width = width;
  k.height = height;
  k.depth_min = 0.1;
  k.depth_max = 12.0;
  return k;
}

Pose LidarExtrinsics() {
  Eigen::Matrix3d r;
  r << 0, -1, 0,
       0, 0, -1,
       1, 0, 0;
  return Pose(r, Eigen::Vector3d(0.0, -0.1, 0.0));
}

Trajectory BoxRoomTrajectory(int poses) {
  Trajectory out;
  for (int k = 0; k < poses; ++k) {
    const double s = poses > 1 ? static_cast<double>(k) / (poses - 1) : 0.0;
    const Eigen::Vector3d position(-1.2 + 0.8 * s, -0.4 + 0.5 * s,
                                   1.4 + 0.1 * std::sin(3.0 * s));
    const double heading = -0.15 + 0.35 * s;
    const double pitch = 0.05 * std::sin(2.0 * std::numbers::pi * s);
    const double roll = 0.03 * std::cos(2.0 * std::numbers::pi * s);
    out.push_back({0.1 * k, Pose(CameraRotation(heading, pitch, roll),
                                 position)});
  }
  return out;
}

Trajectory PerturbTrajectory(const Trajectory& trajectory, double sigma_t,
                             double sigma_r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory out = trajectory;
  for (TimedPose& tp : out) {
    Eigen::Vector3d dt, dr;
    for (int a = 0; a < 3; ++a) dt[a] = sigma_t * normal(rng);
    for (int a = 0; a < 3; ++a) dr[a] = sigma_r * normal(rng);
    tp.pose = BoxPlus(tp.pose, Perturbation::FromTranslationRotation(dt, dr));
  }
  return out;
}

fs::path GenerateSynthetic(const SyntheticSpec& spec, const fs::path& dir,
                           int threads) {
  spec.scene.Validate();
  if (spec.sensors.empty()) {
    throw Error(ErrorKind::kConfig, "synthetic dataset without sensors");
  }
  if (spec.groundtruth.empty() ||
      spec.initial.size() != spec.groundtruth.size()) {
    throw Error(ErrorKind::kConfig,
                "initial and ground-truth trajectories must be non-empty and "
                "of equal length");
  }
  ValidateTrajectory(spec.groundtruth);
  ValidateTrajectory(spec.initial);

  DatasetManifest manifest;
  manifest.trajectory = "trajectory.txt";
  manifest.groundtruth = "groundtruth.txt";
  manifest.pyramid_scales = spec.pyramid_scales;
  for (std::size_t s = 0; s < spec.sensors.size(); ++s) {
    const SyntheticSensor& sensor = spec.sensors[s];
    SensorConfig config = sensor.config;
    config.intensity_dir = config.id + "/intensity";
    config.depth_dir = config.id + "/depth";
    fs::create_directories(dir / config.intensity_dir);
    fs::create_directories(dir / config.depth_dir);
    for (std::size_t k = 0; k < spec.groundtruth.size(); ++k) {
      const TimedPose& gt = spec.groundtruth[k];
      RenderedView view = Render(spec.scene, config.intrinsics,
                                 gt.pose * config.extrinsics, threads);
      if (sensor.intensity_noise > 0.0 || sensor.depth_noise > 0.0) {
        AddNoise(&view, sensor.intensity_noise, sensor.depth_noise,
                 FrameSeed(spec.seed, s, k));
      }
      const std::string name = FrameFileName(gt.timestamp);
      WritePgm(IntensityToRaster(view.intensity),
               dir / config.intensity_dir / name);
      WritePgm(DepthToRaster(view.depth, config.depth_scale),
               dir / config.depth_dir / name);
    }
    manifest.sensors.push_back(config);
  }
  SaveTrajectory(spec.initial, dir / manifest.trajectory);
  SaveTrajectory(spec.groundtruth, dir / manifest.groundtruth);
  const fs::path path = dir / "manifest.json";
  SaveManifest(manifest, path);
  return path;
}

SyntheticSpec BoxRoomSpec(int poses, bool rgbd, bool lidar, double sigma_t,
                          double sigma_r, std::uint64_t seed) {
  if (poses < 1) throw Error(ErrorKind::kConfig, "need at least one pose");
  if (!rgbd && !lidar) throw Error(ErrorKind::kConfig, "no sensor selected");
  SyntheticSpec spec;
  spec.scene = BoxRoomScene();
  spec.seed = seed;
  if (rgbd) {
    SyntheticSensor s;
    s.config.id = "rgbd";
    s.config.intrinsics = PinholeIntrinsics(128, 96, 100.0);
    s.config.depth_scale = 2e-4;
    spec.sensors.push_back(s);
  }
  if (lidar) {
    SyntheticSensor s;
    s.config.id = "lidar";
    s.config.intrinsics = SphericalIntrinsics(256, 64, std::numbers::pi / 2.0);
    s.config.extrinsics = LidarExtrinsics();
    s.config.depth_scale = 2e-4;
    spec.sensors.push_back(s);
  }
  spec.groundtruth = BoxRoomTrajectory(poses);
  spec.initial = PerturbTrajectory(spec.groundtruth, sigma_t, sigma_r, seed);
  return spec;
}

SyntheticSpec SyntheticSpecFromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("scene spec: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kParse, "scene spec: not an object");

  int poses = 10;
  JsonRead(j, "poses", &poses);
  double sigma_t = 0.0;
  double sigma_r_deg = 0.0;
  std::uint64_t seed = 1;
  JsonRead(j, "seed", &seed);
  if (j.contains("perturbation")) {
    JsonRead(j["perturbation"], "sigma_t", &sigma_t);
    JsonRead(j["perturbation"], "sigma_r_deg", &sigma_r_deg);
  }
  SyntheticSpec spec =
      BoxRoomSpec(std::max(poses, 1), true, false, sigma_t,
                  sigma_r_deg * std::numbers::pi / 180.0, seed);

  if (j.contains("scene")) {
    const auto& js = j["scene"];
    Scene scene;
    if (js.contains("light")) scene.light = Vec3(js, "light");
    JsonRead(js, "ambient", &scene.ambient);
    if (js.contains("surfaces")) {
      for (const auto& s : js["surfaces"]) {
        scene.surfaces.push_back(SurfaceFromJson(s));
      }
    }
    scene.Validate();
    spec.scene = scene;
  }
  if (j.contains("sensors")) {
    spec.sensors.clear();
    for (const auto& js : j["sensors"]) {
      SyntheticSensor s;
      s.config.id = JsonGet<std::string>(js, "id");
      s.config.intrinsics = IntrinsicsFromJson(JsonGet<nlohmann::json>(js, "intrinsics"));
      if (js.contains("extrinsics")) {
        s.config.extrinsics = PoseFromJson(js["extrinsics"]);
      }
      JsonRead(js, "depth_scale", &s.config.depth_scale);
      JsonRead(js, "intensity_noise", &s.intensity_noise);
      JsonRead(js, "depth_noise", &s.depth_noise);
      if (!(s.config.depth_scale > 0.0)) {
        throw Error(ErrorKind::kConfig, "depth_scale must be positive");
      }
      spec.sensors.push_back(s);
    }
  }
  if (j.contains("groundtruth")) {
    Trajectory gt;
    for (const auto& row : j["groundtruth"]) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != 8) {
        throw Error(ErrorKind::kParse, "groundtruth rows need 8 values");
      }
      gt.push_back({v[0], Pose::FromQuaternion(
                              Eigen::Quaterniond(v[7], v[4], v[5], v[6]).normalized(),
                              Eigen::Vector3d(v[1], v[2], v[3]))});
    }
    ValidateTrajectory(gt);
    spec.groundtruth = gt;
    spec.initial = PerturbTrajectory(gt, sigma_t,
                                     sigma_r_deg * std::numbers::pi / 180.0, seed);
  }
  JsonRead(j, "pyramid_scales", &spec.pyramid_scales);
  std::sort(spec.pyramid_scales.begin(), spec.pyramid_scales.end());
  return spec;
}

}  // namespace photoba
