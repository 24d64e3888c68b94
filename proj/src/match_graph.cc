#include "photoba/match_graph.h"

#include <algorithm>
#include <ostream>

#include "photoba/error.h"
#include "photoba/parallel.h"

namespace photoba {

const char* EdgeKindName(EdgeKind kind) {
  return kind == EdgeKind::kCovisibility ? "covisibility" : "odometry";
}

bool MatchGraph::HasEdge(int a, int b) const {
  const int i = std::min(a, b);
  const int j = std::max(a, b);
  return std::any_of(edges.begin(), edges.end(),
                     [&](const Edge& e) { return e.i == i && e.j == j; });
}

double OverlapRatio(const FrameNode& i, const FrameNode& j, int level,
                    int stride, const Pose& extrinsics) {
  if (!i.pyramid || !j.pyramid) {
    throw Error(ErrorKind::kConfig, "frame node without pyramid");
  }
  if (level < 0 || level >= i.pyramid->num_levels() ||
      level >= j.pyramid->num_levels()) {
    throw Error(ErrorKind::kConfig, "overlap level out of range");
  }
  stride = std::max(stride, 1);
  const CueImage& src = i.pyramid->levels[level];
  const Intrinsics& dst = j.pyramid->levels[level].intrinsics();
  // Sensor-to-sensor transform (X_j O)^-1 (X_i O).
  const Pose rel = Relative(i.pose_guess * extrinsics, j.pose_guess * extrinsics);

  std::size_t total = 0;
  std::size_t hits = 0;
  for (int y = 0; y < src.height(); y += stride) {
    for (int x = 0; x < src.width(); x += stride) {
      if (!IsValidDepth(src.depth()(x, y))) continue;
      ++total;
      const Eigen::Vector3d p = UnprojectUnchecked(
          src.intrinsics(), Eigen::Vector2d(x, y), src.depth()(x, y));
      if (Project(dst, rel * p)) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

MatchGraph BuildGraph(std::vector<FrameNode> nodes,
                      const GraphCriteria& criteria, bool sequential,
                      const Pose& extrinsics, int threads) {
  if (nodes.empty()) {
    throw Error(ErrorKind::kConfig, "cannot build a graph without nodes");
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].id != static_cast<int>(k)) {
      throw Error(ErrorKind::kConfig, "node ids must be 0..N-1 in order");
    }
  }

  const int n = static_cast<int>(nodes.size());
  std::vector<std::pair<int, int>> candidates;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) candidates.emplace_back(a, b);
  }
  std::vector<std::uint8_t> covisible(candidates.size(), 0);
  ParallelFor(candidates.size(), threads, [&](std::size_t c) {
    const auto [a, b] = candidates[c];
    const Pose rel = Relative(nodes[a].pose_guess, nodes[b].pose_guess);
    if (!(RotationAngle(rel.rotation()) < criteria.max_angle)) return;
    if (!(rel.translation().norm() < criteria.max_translation)) return;
    const double ab = OverlapRatio(nodes[a], nodes[b], 0,
                                   criteria.overlap_stride, extrinsics);
    if (ab < criteria.min_overlap_ratio) return;
    const double ba = OverlapRatio(nodes[b], nodes[a], 0,
                                   criteria.overlap_stride, extrinsics);
    if (ba < criteria.min_overlap_ratio) return;
    covisible[c] = 1;
  });

  MatchGraph graph;
  graph.nodes = std::move(nodes);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto [a, b] = candidates[c];
    if (covisible[c]) {
      graph.edges.push_back({a, b, EdgeKind::kCovisibility});
    } else if (sequential && b == a + 1) {
      graph.edges.push_back({a, b, EdgeKind::kOdometry});
    }
  }
  return graph;
}

void WriteGraph(const MatchGraph& graph, std::ostream& out) {
  for (const Edge& e : graph.edges) {
    out << e.i << ' ' << e.j << ' ' << EdgeKindName(e.kind) << '\n';
  }
}

}  // namespace photoba
