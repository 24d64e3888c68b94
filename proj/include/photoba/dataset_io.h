#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "photoba/cue_image.h"
#include "photoba/evaluation.h"
#include "photoba/match_graph.h"
#include "photoba/photometric_ba.h"
#include "photoba/sensor_model.h"

namespace photoba {

// "timestamp tx ty tz qx qy qz qw" per line, '#' comments, values printed
// with 17 significant digits.
void SaveTrajectory(const Trajectory& trajectory,
                    const std::filesystem::path& path);
// Throws kIo when unreadable, kParse with the line number on a malformed
// line, kConfig when timestamps are not strictly increasing.
Trajectory LoadTrajectory(const std::filesystem::path& path);

// Single-channel binary PGM (P5), 8-bit or big-endian 16-bit.
struct Raster {
  int width = 0;
  int height = 0;
  int maxval = 65535;
  std::vector<std::uint16_t> pixels;  // row-major
};

Raster ReadPgm(const std::filesystem::path& path);
void WritePgm(const Raster& raster, const std::filesystem::path& path);

// Intensity in [0, 1] from any bit depth, and back to 16 bits.
Grid<double> IntensityFromRaster(const Raster& raster);
Raster IntensityToRaster(const Grid<double>& intensity);
// Depth raster: 0 is invalid, meters = raw * scale. Depths that do not fit
// in 16 bits are written as invalid.
Grid<double> DepthFromRaster(const Raster& raster, double scale);
Raster DepthToRaster(const Grid<double>& depth, double scale);

// Image file name of a frame: "%.6f.pgm" of its timestamp.
std::string FrameFileName(double timestamp);

struct SensorConfig {
  std::string id;
  Intrinsics intrinsics;
  Pose extrinsics;           // sensor -> platform
  double depth_scale = 1e-3;  // meters per raw unit
  std::string intensity_dir;  // relative to the manifest directory
  std::string depth_dir;
};

struct DatasetManifest {
  std::vector<SensorConfig> sensors;
  std::string trajectory = "trajectory.txt";
  std::string groundtruth;  // empty when absent
  std::vector<double> pyramid_scales = {0.125, 0.25, 0.5};
  SolverConfig solver;
  GraphCriteria graph;
  bool sequential = true;
};

// JSON text; see docs/formats.md. ParseManifest throws kParse on malformed
// text and kConfig on invalid values.
std::string SerializeManifest(const DatasetManifest& manifest);
DatasetManifest ParseManifest(const std::string& text);
DatasetManifest LoadManifest(const std::filesystem::path& path);
void SaveManifest(const DatasetManifest& manifest,
                  const std::filesystem::path& path);

struct LoadedFrame {
  double timestamp = 0.0;
  Grid<double> intensity;
  Grid<double> depth;  // meters, 0 invalid
};

struct Dataset {
  DatasetManifest manifest;
  std::filesystem::path root;
  Trajectory initial;
  std::optional<Trajectory> groundtruth;
  std::vector<std::vector<LoadedFrame>> frames;  // [sensor][pose]
};

// Loads every frame referenced by the trajectory, for every sensor.
// Missing file: kIo. Size differing from the intrinsics: kConfig.
// Unparseable manifest: kParse. Each message names the offending entry.
Dataset LoadDataset(const std::filesystem::path& manifest_path,
                    int threads = 1);

// Frame nodes of one sensor with pyramids built at the manifest scales and
// pose guesses from the initial trajectory.
std::vector<FrameNode> BuildFrameNodes(const Dataset& dataset, int sensor,
                                       const NormalConfig& normals,
                                       int threads = 1);

}  // namespace photoba
