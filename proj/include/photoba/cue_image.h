#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "photoba/image.h"
#include "photoba/sensor_model.h"

namespace photoba {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix52d = Eigen::Matrix<double, 5, 2>;

// Channel order of the five-channel cue vector.
enum class Cue { kIntensity = 0, kDepth = 1, kNormalX = 2, kNormalY = 3,
                 kNormalZ = 4 };

inline constexpr int kNumCues = 5;

inline bool IsValidDepth(double d) { return d > 0.0 && std::isfinite(d); }
inline bool IsValidNormal(const Eigen::Vector3d& n) { return n.allFinite(); }
inline Eigen::Vector3d InvalidNormal() {
  return Eigen::Vector3d::Constant(std::nan(""));
}

// Bilinearly interpolated cues at a continuous pixel. Gradient column 0 is
// d/dx (along columns), column 1 is d/dy (along rows).
struct CueSample {
  Vector5d value;
  Matrix52d gradient;
};

struct ChannelSample {
  double value;
  Eigen::Vector2d gradient;
};

struct NormalConfig {
  // Neighborhood radius in pixels: clamp(k_tau / depth, min_radius,
  // max_radius).
  double k_tau = 4.0;
  double min_radius = 2.0;
  double max_radius = 8.0;
  int min_points = 5;
  // The fit is degenerate (collinear support) when the middle scatter
  // eigenvalue is below this fraction of the largest one.
  double min_eigen_ratio = 1e-3;
  // Neighbors whose depth differs by more than this fraction of the center
  // depth belong to another surface and are skipped.
  double max_depth_jump = 0.1;
};

// One pyramid level: intensity in [0,1], depth in meters (<= 0 invalid),
// unit normals facing the sensor (NaN invalid), plus the central-difference
// gradients of every channel.
class CueImage {
 public:
  CueImage() = default;
  // Depths outside the intrinsics' range become invalid; normals of invalid
  // depths become invalid. A neighbor whose depth is off the pixel's tangent
  // plane by more than max_depth_jump (relative) marks a depth
  // discontinuity, and the pixel gets no gradient.
  CueImage(Grid<double> intensity, Grid<double> depth,
           Grid<Eigen::Vector3d> normals, const Intrinsics& intrinsics,
           double max_depth_jump = 0.1);

  int width() const { return intrinsics_.width; }
  int height() const { return intrinsics_.height; }
  const Intrinsics& intrinsics() const { return intrinsics_; }
  const Grid<double>& intensity() const { return intensity_; }
  const Grid<double>& depth() const { return depth_; }
  const Grid<Eigen::Vector3d>& normals() const { return normals_; }

  // Pixel carries finite intensity, valid depth, and a valid normal.
  bool IsValid(int x, int y) const { return valid_(x, y) != 0; }
  // Valid with a defined gradient: not on the border, four valid neighbors
  // on its tangent plane.
  bool IsUsable(int x, int y) const { return usable_(x, y) != 0; }
  std::size_t CountValid() const;

  Vector5d Cues(int x, int y) const { return cues_(x, y); }
  const Matrix52d& Gradient(int x, int y) const { return gradients_(x, y); }

  // Bilinear interpolation of the cues and of the precomputed gradient
  // images; nullopt when any of the four contributing pixels is not usable.
  std::optional<CueSample> Sample(const Eigen::Vector2d& u) const;
  std::optional<ChannelSample> Sample(const Eigen::Vector2d& u,
                                      Cue channel) const;

 private:
  void ComputeDerived();
  bool OnTangentPlane(int x, int y, int nx, int ny) const;

  Intrinsics intrinsics_;
  double max_depth_jump_ = 0.1;
  Grid<double> intensity_;
  Grid<double> depth_;
  Grid<Eigen::Vector3d> normals_;
  Grid<Vector5d> cues_;
  Grid<Matrix52d> gradients_;
  Grid<std::uint8_t> valid_;
  Grid<std::uint8_t> usable_;
};

// Levels ordered coarsest first; scales[k] is the scale of levels[k].
struct CuePyramid {
  std::vector<CueImage> levels;
  std::vector<double> scales;

  int num_levels() const { return static_cast<int>(levels.size()); }
};

Grid<Eigen::Vector3d> EstimateNormals(const Grid<double>& depth,
                                      const Intrinsics& intrinsics,
                                      const NormalConfig& config,
                                      int threads = 1);

// Scales must be strictly increasing and in (0, 1]. Normals are estimated
// once at full resolution, then every channel is downscaled over the level
// footprint: intensity by mean, depth by lower median of valid pixels,
// normals by renormalized mean.
CuePyramid BuildPyramid(const Grid<double>& intensity,
                        const Grid<double>& depth, const Intrinsics& intrinsics,
                        std::span<const double> scales,
                        const NormalConfig& config, int threads = 1);

}  // namespace photoba
