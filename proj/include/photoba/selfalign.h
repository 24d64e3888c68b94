#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "photoba/cue_image.h"
#include "photoba/dataset_io.h"
#include "photoba/geometry.h"
#include "photoba/photometric_ba.h"

namespace photoba {

// Two captures of one sensor taken from the same platform pose.
struct Capture {
  std::shared_ptr<const CuePyramid> first;
  std::shared_ptr<const CuePyramid> second;
  SensorExtrinsics extrinsics;
};

struct SelfAlignInput {
  std::optional<Capture> pinhole;
  std::optional<Capture> spherical;
};

enum class AlignMode { kPinhole, kSpherical, kCoupled, kConsecutive };

const char* AlignModeName(AlignMode mode);
AlignMode ParseAlignMode(const std::string& name);

// Builds both pyramids of a capture from one loaded frame. The second
// capture gets independent Gaussian noise (seeded) so that the two views
// are not bit-identical; zero sigmas reuse the same images.
Capture CaptureFromFrame(const LoadedFrame& frame, const SensorConfig& sensor,
                         const std::vector<double>& scales,
                         const NormalConfig& normals, double intensity_sigma,
                         double depth_sigma, std::uint64_t seed,
                         int threads = 1);

struct AlignOutcome {
  double translation_error = 0.0;  // m
  double rotation_error = 0.0;     // rad
  bool failed = false;             // solver raised an error

  double mean() const { return 0.5 * (translation_error + rotation_error); }
};

// Aligns the second capture, started at `start`, against the first held at
// the identity. The true relative pose is the identity.
AlignOutcome AlignCaptures(const SelfAlignInput& input, AlignMode mode,
                           const Pose& start, const SolverConfig& config);

struct BasinSpec {
  std::vector<double> translations;  // m
  std::vector<double> rotations;     // rad
  std::vector<AlignMode> modes;
  std::uint64_t seed = 1;
  double threshold = 1e-2;  // converged when mean error is below
};

// `steps` values evenly spaced over [0, max].
std::vector<double> Linspace(double max, int steps);

struct BasinGrid {
  std::vector<double> translations;
  std::vector<double> rotations;
  std::vector<std::string> modes;
  double threshold = 1e-2;
  // [mode][rotation][translation]
  std::vector<std::vector<std::vector<AlignOutcome>>> cells;

  bool Converged(int mode, int r, int t) const {
    return cells[mode][r][t].mean() < threshold;
  }
};

// Cell (r, t) starts from a perturbation of magnitude translations[t] and
// rotations[r] along unit directions drawn from the seed and the cell
// index, identical for every mode.
BasinGrid SweepBasin(const SelfAlignInput& input, const BasinSpec& spec,
                     const SolverConfig& config);

// Text grid: see docs/formats.md. Cells hold log10 of the mean error.
void WriteBasinGrid(const BasinGrid& grid, std::ostream& out);

}  // namespace photoba
