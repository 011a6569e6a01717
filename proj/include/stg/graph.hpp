#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stg {

/// Raised when a graph, box or label violates a declared invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Feature = std::vector<float>;

/// Axis-aligned box in normalized image coordinates.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const BBox&) const = default;
};

/// Smallest box enclosing both inputs.
BBox enclosing(const BBox& a, const BBox& b);

struct Node {
  Feature feature;
  BBox box;
  int class_id = 0;
  double confidence = 1.0;
  // Ground-truth track identity from the synthetic generator; -1 when
  // unknown or spurious. Never read by the decoder.
  int track_id = -1;

  bool operator==(const Node&) const = default;
};

struct SpatialEdge {
  int src = 0;
  int dst = 0;
  Feature feature;
  BBox box;
  int relation_id = 0;

  bool operator==(const SpatialEdge&) const = default;
};

struct FrameGraph {
  int frame_index = 0;
  std::vector<Node> nodes;
  std::vector<SpatialEdge> spatial_edges;

  bool operator==(const FrameGraph&) const = default;
};

struct NodeRef {
  int frame_index = 0;
  int node_index = 0;

  bool operator==(const NodeRef&) const = default;
  auto operator<=>(const NodeRef&) const = default;
};

/// Temporal relation classes. Their ids are offset by the spatial vocabulary
/// size so the two ranges never overlap.
enum class TemporalRelation : int { kBoxMatch = 0, kFeatureMatch = 1 };
inline constexpr int kNumTemporalRelations = 2;

struct TemporalEdge {
  NodeRef src;
  NodeRef dst;
  int relation_id = 0;
  Feature feature;
  BBox box;

  bool operator==(const TemporalEdge&) const = default;
};

enum class HorizonMode { kExponential, kDense, kAdjacent };

const char* to_string(HorizonMode mode);
HorizonMode parse_horizon_mode(const std::string& text);

/// Vocabulary and shape declarations shared by every graph of a dataset.
struct GraphMetadata {
  int feature_dim = 0;
  int num_object_classes = 0;
  // Classes [0, num_anatomy_classes) are anatomy, the rest are tools.
  int num_anatomy_classes = 0;
  int num_spatial_relations = 0;
  // Spatial and node/edge features share one dimension.
  bool shared_feature_dim = true;
  HorizonMode horizon_mode = HorizonMode::kExponential;
  int horizon_exponent = 0;
  std::vector<int> horizons;

  int temporal_relation_id(TemporalRelation r) const {
    return num_spatial_relations + static_cast<int>(r);
  }
  int num_relations() const { return num_spatial_relations + kNumTemporalRelations; }

  bool operator==(const GraphMetadata&) const = default;
};

struct VideoGraph {
  GraphMetadata metadata;
  std::vector<FrameGraph> frames;
  std::vector<TemporalEdge> temporal_edges;

  std::size_t num_nodes() const;
  std::size_t num_spatial_edges() const;

  bool operator==(const VideoGraph&) const = default;
};

/// Maps (frame position, node index) pairs onto a flat node numbering and
/// frame indices onto positions in the frame list.
class NodeIndexer {
 public:
  explicit NodeIndexer(const std::vector<FrameGraph>& frames);

  std::size_t num_nodes() const { return total_; }
  std::size_t offset(std::size_t position) const { return offsets_[position]; }
  // Position of a frame_index within the frame list; -1 if absent.
  int position_of(int frame_index) const;
  std::size_t flat(const NodeRef& ref) const;

 private:
  std::vector<int> frame_indices_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

void validate_box(const BBox& box, const std::string& where);
void validate_frame(const FrameGraph& frame, const GraphMetadata& meta);
/// Checks frame ordering plus every per-frame invariant.
void validate_frames(const std::vector<FrameGraph>& frames, const GraphMetadata& meta);
/// Full check including the temporal-edge feature/box/horizon laws.
void validate(const VideoGraph& graph);

}  // namespace stg
