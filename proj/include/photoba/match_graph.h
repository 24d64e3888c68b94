#pragma once

#include <iosfwd>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "photoba/cue_image.h"
#include "photoba/geometry.h"

namespace photoba {

struct FrameNode {
  int id = 0;
  Pose pose_guess;
  std::shared_ptr<const CuePyramid> pyramid;
  double timestamp = 0.0;
  std::string sensor_id;
};

enum class EdgeKind { kCovisibility, kOdometry };

const char* EdgeKindName(EdgeKind kind);

// Undirected; stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  EdgeKind kind = EdgeKind::kCovisibility;

  bool operator==(const Edge&) const = default;
};

struct MatchGraph {
  std::vector<FrameNode> nodes;
  std::vector<Edge> edges;  // sorted by (i, j)

  bool HasEdge(int a, int b) const;
};

struct GraphCriteria {
  double max_angle = 30.0 * std::numbers::pi / 180.0;  // radians
  double max_translation = 1.0;                         // meters
  double min_overlap_ratio = 1.0 / 3.0;
  int overlap_stride = 2;
};

// Fraction of the valid pixels of i's level `level` (sampled every `stride`
// pixels) whose reprojection lands inside j's image. `extrinsics` maps the
// sensor into the platform frame the node poses refer to.
double OverlapRatio(const FrameNode& i, const FrameNode& j, int level,
                    int stride = 2, const Pose& extrinsics = Pose());

// Covisibility edge iff rotation angle < max_angle, translation norm <
// max_translation and the overlap ratio in both directions (coarsest level)
// is at least min_overlap_ratio. With `sequential`, consecutive ids are
// joined by odometry edges when not already covisible. Node ids must be
// 0..N-1 in order.
MatchGraph BuildGraph(std::vector<FrameNode> nodes,
                      const GraphCriteria& criteria, bool sequential,
                      const Pose& extrinsics = Pose(), int threads = 1);

// One edge per line: "i j kind".
void WriteGraph(const MatchGraph& graph, std::ostream& out);

}  // namespace photoba
