#pragma once

#include <span>
#include <vector>

#include "stg/graph.hpp"

namespace stg {

/// Generalized IoU. Returns 1 when the enclosing box has zero area.
double giou(const BBox& a, const BBox& b);
double iou(const BBox& a, const BBox& b);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_sim(std::span<const float> a, std::span<const float> b);

enum class Kernel { kBox, kFeature };

struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  Kernel kernel = Kernel::kBox;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  bool empty() const { return rows == 0 || cols == 0; }
};

SimilarityMatrix pairwise_similarity(std::span<const Node> src, std::span<const Node> dst, Kernel kernel);

struct TemporalLink {
  NodeRef src;
  NodeRef dst;
  int relation_id = 0;

  bool operator==(const TemporalLink&) const = default;
};

/// Connectivity and relation ids of the cross-frame edges between two frames.
struct TemporalEdgeSet {
  std::vector<TemporalLink> links;

  std::size_t size() const { return links.size(); }
};

/// Row-wise and column-wise argmax matches (ties to the smallest index), each
/// emitted as a forward and a backward directed edge. Duplicates are kept.
std::vector<TemporalLink> best_match_edges(const SimilarityMatrix& m, int src_frame, int dst_frame, int relation_id);

/// The temporal edge operator between two frames: best matches under the box
/// kernel followed by best matches under the feature kernel.
TemporalEdgeSet build_temporal_edges(const FrameGraph& a, const FrameGraph& b, const GraphMetadata& meta);

struct HorizonSchedule {
  HorizonMode mode = HorizonMode::kExponential;
  int exponent = 0;
  std::vector<int> horizons;
};

/// Horizons are offsets between frame positions; values >= num_frames are dropped.
HorizonSchedule make_schedule(HorizonMode mode, int exponent, int num_frames);

/// Disjoint union of frame nodes, all spatial edges, and temporal edges for
/// every (t, t + w) pair, in (t, w, kernel) order.
VideoGraph assemble_video_graph(const std::vector<FrameGraph>& frames, const HorizonSchedule& schedule,
                                GraphMetadata meta);

/// Single-threaded counterparts kept as the baseline for the parallel kernels.
namespace reference {
SimilarityMatrix pairwise_similarity(std::span<const Node> src, std::span<const Node> dst, Kernel kernel);
VideoGraph assemble_video_graph(const std::vector<FrameGraph>& frames, const HorizonSchedule& schedule,
                                GraphMetadata meta);
}  // namespace reference

}  // namespace stg
