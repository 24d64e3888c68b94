#include "photoba/dataset_io.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "photoba/config_json.h"
#include "photoba/error.h"
#include "photoba/parallel.h"

namespace photoba {
namespace fs = std::filesystem;
namespace {

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string HeaderToken(std::istream& in) {
  std::string token;
  for (;;) {
    const int c = in.get();
    if (c == EOF) return token;
    if (c == '#' && token.empty()) {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      if (token.empty()) continue;
      return token;
    }
    token.push_back(static_cast<char>(c));
  }
}

int HeaderInt(std::istream& in, const fs::path& path) {
  const std::string t = HeaderToken(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::kParse, "bad PGM header in " + path.string());
}

}  // namespace

void SaveTrajectory(const Trajectory& trajectory, const fs::path& path) {
  std::string text = "# timestamp tx ty tz qx qy qz qw\n";
  char buf[512];
  for (const TimedPose& tp : trajectory) {
    const Eigen::Vector3d& t = tp.pose.translation();
    const Eigen::Quaterniond q = tp.pose.quaternion();
    std::snprintf(buf, sizeof(buf),
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  tp.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(),
                  q.w());
    text += buf;
  }
  WriteText(text, path);
}

Trajectory LoadTrajectory(const fs::path& path) {
  std::istringstream in(ReadText(path));
  Trajectory out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) {
        throw Error(ErrorKind::kParse, path.string() + ":" +
                                           std::to_string(number) +
                                           ": expected 8 numbers");
      }
    }
    std::string rest;
    if (ls >> rest) {
      throw Error(ErrorKind::kParse, path.string() + ":" +
                                         std::to_string(number) +
                                         ": trailing tokens");
    }
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 1e-12)) {
      throw Error(ErrorKind::kParse, path.string() + ":" +
                                         std::to_string(number) +
                                         ": zero quaternion");
    }
    out.push_back({v[0], Pose::FromQuaternion(q.normalized(),
                                              Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  try {
    ValidateTrajectory(out);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return out;
}

Raster ReadPgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  if (HeaderToken(in) != "P5") {
    throw Error(ErrorKind::kParse, path.string() + " is not a binary PGM");
  }
  Raster r;
  r.width = HeaderInt(in, path);
  r.height = HeaderInt(in, path);
  r.maxval = HeaderInt(in, path);
  if (r.width <= 0 || r.height <= 0 || r.maxval <= 0 || r.maxval > 65535) {
    throw Error(ErrorKind::kParse, "bad PGM header in " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  const int bytes = r.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(ErrorKind::kParse, "truncated PGM " + path.string());
  }
  r.pixels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.pixels[k] = bytes == 2 ? static_cast<std::uint16_t>(raw[2 * k] << 8 |
                                                          raw[2 * k + 1])
                             : raw[k];
  }
  return r;
}

void WritePgm(const Raster& r, const fs::path& path) {
  const int bytes = r.maxval > 255 ? 2 : 1;
  std::string text = "P5\n" + std::to_string(r.width) + " " +
                     std::to_string(r.height) + "\n" +
                     std::to_string(r.maxval) + "\n";
  for (const std::uint16_t p : r.pixels) {
    if (bytes == 2) text.push_back(static_cast<char>(p >> 8));
    text.push_back(static_cast<char>(p & 0xff));
  }
  WriteText(text, path);
}

Grid<double> IntensityFromRaster(const Raster& r) {
  Grid<double> g(r.width, r.height);
  for (std::size_t k = 0; k < r.pixels.size(); ++k) {
    g.data()[k] = static_cast<double>(r.pixels[k]) / r.maxval;
  }
  return g;
}

Raster IntensityToRaster(const Grid<double>& intensity) {
  Raster r{intensity.width(), intensity.height(), 65535, {}};
  r.pixels.reserve(intensity.size());
  for (const double v : intensity.data()) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    r.pixels.push_back(static_cast<std::uint16_t>(std::lround(c * 65535.0)));
  }
  return r;
}

Grid<double> DepthFromRaster(const Raster& r, double scale) {
  Grid<double> g(r.width, r.height);
  for (std::size_t k = 0; k < r.pixels.size(); ++k) {
    g.data()[k] = r.pixels[k] * scale;
  }
  return g;
}

Raster DepthToRaster(const Grid<double>& depth, double scale) {
  Raster r{depth.width(), depth.height(), 65535, {}};
  r.pixels.reserve(depth.size());
  for (const double d : depth.data()) {
    const double raw = IsValidDepth(d) ? std::round(d / scale) : 0.0;
    r.pixels.push_back(raw >= 1.0 && raw <= 65535.0
                           ? static_cast<std::uint16_t>(raw)
                           : 0);
  }
  return r;
}

std::string FrameFileName(double timestamp) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f.pgm", timestamp);
  return buf;
}

std::string SerializeManifest(const DatasetManifest& m) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const SensorConfig& s : m.sensors) {
    sensors.push_back({{"id", s.id},
                       {"intrinsics", IntrinsicsToJson(s.intrinsics)},
                       {"extrinsics", PoseToJson(s.extrinsics)},
                       {"depth_scale", s.depth_scale},
                       {"intensity_dir", s.intensity_dir},
                       {"depth_dir", s.depth_dir}});
  }
  nlohmann::json j = {{"sensors", sensors},
                      {"trajectory", m.trajectory},
                      {"pyramid_scales", m.pyramid_scales},
                      {"solver", SolverConfigToJson(m.solver)},
                      {"graph", GraphCriteriaToJson(m.graph, m.sequential)}};
  if (!m.groundtruth.empty()) j["groundtruth"] = m.groundtruth;
  return j.dump(2) + "\n";
}

DatasetManifest ParseManifest(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("manifest: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kParse, "manifest: not an object");
  DatasetManifest m;
  if (!j.contains("sensors") || !j["sensors"].is_array() ||
      j["sensors"].empty()) {
    throw Error(ErrorKind::kParse, "manifest: 'sensors' must be a non-empty list");
  }
  for (const auto& js : j["sensors"]) {
    SensorConfig s;
    s.id = JsonGet<std::string>(js, "id");
    if (!js.contains("intrinsics")) {
      throw Error(ErrorKind::kParse, "sensor '" + s.id + "': missing intrinsics");
    }
    try {
      s.intrinsics = IntrinsicsFromJson(js["intrinsics"]);
    } catch (const Error& e) {
      throw Error(e.kind(), "sensor '" + s.id + "': " + e.what());
    }
    if (js.contains("extrinsics")) s.extrinsics = PoseFromJson(js["extrinsics"]);
    JsonRead(js, "depth_scale", &s.depth_scale);
    if (!(s.depth_scale > 0.0)) {
      throw Error(ErrorKind::kConfig,
                  "sensor '" + s.id + "': depth_scale must be positive");
    }
    s.intensity_dir = s.id + "/intensity";
    s.depth_dir = s.id + "/depth";
    JsonRead(js, "intensity_dir", &s.intensity_dir);
    JsonRead(js, "depth_dir", &s.depth_dir);
    for (const SensorConfig& other : m.sensors) {
      if (other.id == s.id) {
        throw Error(ErrorKind::kConfig, "duplicate sensor id '" + s.id + "'");
      }
    }
    m.sensors.push_back(s);
  }
  JsonRead(j, "trajectory", &m.trajectory);
  JsonRead(j, "groundtruth", &m.groundtruth);
  JsonRead(j, "pyramid_scales", &m.pyramid_scales);
  std::sort(m.pyramid_scales.begin(), m.pyramid_scales.end());
  if (j.contains("solver")) ApplySolverJson(j["solver"], &m.solver);
  if (j.contains("graph")) ApplyGraphJson(j["graph"], &m.graph, &m.sequential);
  m.solver.Validate();
  return m;
}

DatasetManifest LoadManifest(const fs::path& path) {
  try {
    return ParseManifest(ReadText(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void SaveManifest(const DatasetManifest& manifest, const fs::path& path) {
  WriteText(SerializeManifest(manifest), path);
}

Dataset LoadDataset(const fs::path& manifest_path, int threads) {
  Dataset ds;
  ds.manifest = LoadManifest(manifest_path);
  ds.root = manifest_path.parent_path();
  ds.initial = LoadTrajectory(ds.root / ds.manifest.trajectory);
  if (!ds.manifest.groundtruth.empty()) {
    ds.groundtruth = LoadTrajectory(ds.root / ds.manifest.groundtruth);
  }
  const std::size_t n = ds.initial.size();
  ds.frames.resize(ds.manifest.sensors.size());
  for (std::size_t s = 0; s < ds.manifest.sensors.size(); ++s) {
    const SensorConfig& sensor = ds.manifest.sensors[s];
    auto& frames = ds.frames[s];
    frames.resize(n);
    ParallelFor(n, threads, [&](std::size_t k) {
      const double t = ds.initial[k].timestamp;
      const std::string name = FrameFileName(t);
      const fs::path ipath = ds.root / sensor.intensity_dir / name;
      const fs::path dpath = ds.root / sensor.depth_dir / name;
      for (const fs::path& p : {ipath, dpath}) {
        if (!fs::exists(p)) {
          throw Error(ErrorKind::kIo, "sensor '" + sensor.id +
                                          "': missing image " + p.string());
        }
      }
      const Raster ir = ReadPgm(ipath);
      const Raster dr = ReadPgm(dpath);
      for (const auto& [r, p] : {std::pair{&ir, ipath}, std::pair{&dr, dpath}}) {
        if (r->width != sensor.intrinsics.width ||
            r->height != sensor.intrinsics.height) {
          throw Error(ErrorKind::kConfig,
                      "sensor '" + sensor.id + "': " + p.string() + " is " +
                          std::to_string(r->width) + "x" +
                          std::to_string(r->height) + ", intrinsics say " +
                          std::to_string(sensor.intrinsics.width) + "x" +
                          std::to_string(sensor.intrinsics.height));
        }
      }
      frames[k] = {t, IntensityFromRaster(ir),
                   DepthFromRaster(dr, sensor.depth_scale)};
    });
  }
  return ds;
}

std::vector<FrameNode> BuildFrameNodes(const Dataset& dataset, int sensor,
                                       const NormalConfig& normals,
                                       int threads) {
  if (sensor < 0 || sensor >= static_cast<int>(dataset.frames.size())) {
    throw Error(ErrorKind::kConfig, "sensor index out of range");
  }
  const SensorConfig& config = dataset.manifest.sensors[sensor];
  const auto& frames = dataset.frames[sensor];
  std::vector<FrameNode> nodes(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    FrameNode& node = nodes[k];
    node.id = static_cast<int>(k);
    node.pose_guess = dataset.initial[k].pose;
    node.timestamp = frames[k].timestamp;
    node.sensor_id = config.id;
    node.pyramid = std::make_shared<const CuePyramid>(BuildPyramid(
        frames[k].intensity, frames[k].depth, config.intrinsics,
        dataset.manifest.pyramid_scales, normals, threads));
  }
  return nodes;
}

}  // namespace photoba
