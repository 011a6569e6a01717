#include "stg/graph.hpp"

#include <algorithm>
#include <cmath>

namespace stg {

BBox enclosing(const BBox& a, const BBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
          std::max(a.y2, b.y2)};
}

const char* to_string(HorizonMode mode) {
  switch (mode) {
    case HorizonMode::kExponential:
      return "exponential";
    case HorizonMode::kDense:
      return "dense";
    case HorizonMode::kAdjacent:
      return "adjacent";
  }
  return "exponential";
}

HorizonMode parse_horizon_mode(const std::string& text) {
  if (text == "exponential") return HorizonMode::kExponential;
  if (text == "dense") return HorizonMode::kDense;
  if (text == "adjacent") return HorizonMode::kAdjacent;
  throw ValidationError("unknown horizon mode '" + text + "'");
}

std::size_t VideoGraph::num_nodes() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.nodes.size();
  return n;
}

std::size_t VideoGraph::num_spatial_edges() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.spatial_edges.size();
  return n;
}

NodeIndexer::NodeIndexer(const std::vector<FrameGraph>& frames) {
  frame_indices_.reserve(frames.size());
  offsets_.reserve(frames.size());
  for (const auto& f : frames) {
    frame_indices_.push_back(f.frame_index);
    offsets_.push_back(total_);
    total_ += f.nodes.size();
  }
}

int NodeIndexer::position_of(int frame_index) const {
  auto it = std::lower_bound(frame_indices_.begin(), frame_indices_.end(), frame_index);
  if (it == frame_indices_.end() || *it != frame_index) return -1;
  return static_cast<int>(it - frame_indices_.begin());
}

std::size_t NodeIndexer::flat(const NodeRef& ref) const {
  int pos = position_of(ref.frame_index);
  if (pos < 0) throw ValidationError("node reference to unknown frame " + std::to_string(ref.frame_index));
  std::size_t end = static_cast<std::size_t>(pos) + 1 < offsets_.size() ? offsets_[pos + 1] : total_;
  std::size_t idx = offsets_[pos] + static_cast<std::size_t>(ref.node_index);
  if (ref.node_index < 0 || idx >= end) {
    throw ValidationError("node reference (" + std::to_string(ref.frame_index) + "," +
                          std::to_string(ref.node_index) + ") out of range");
  }
  return idx;
}

void validate_box(const BBox& b, const std::string& where) {
  for (double v : {b.x1, b.y1, b.x2, b.y2}) {
    if (!std::isfinite(v)) throw ValidationError(where + ": non-finite box coordinate");
    if (v < 0.0 || v > 1.0) throw ValidationError(where + ": box coordinate outside [0,1]");
  }
  if (b.x1 > b.x2 || b.y1 > b.y2) throw ValidationError(where + ": box corners inverted");
}

namespace {

void validate_feature(const Feature& f, int dim, const std::string& where) {
  if (dim > 0 && static_cast<int>(f.size()) != dim) {
    throw ValidationError(where + ": feature length " + std::to_string(f.size()) +
                          " does not match dimension " + std::to_string(dim));
  }
  for (float v : f) {
    if (!std::isfinite(v)) throw ValidationError(where + ": non-finite feature value");
  }
}

}  // namespace

void validate_frame(const FrameGraph& frame, const GraphMetadata& meta) {
  const std::string fw = "frame " + std::to_string(frame.frame_index);
  if (frame.frame_index < 0) throw ValidationError(fw + ": negative frame index");
  for (std::size_t i = 0; i < frame.nodes.size(); ++i) {
    const auto& n = frame.nodes[i];
    const std::string where = fw + " node " + std::to_string(i);
    validate_feature(n.feature, meta.feature_dim, where);
    validate_box(n.box, where);
    if (n.class_id < 0 || (meta.num_object_classes > 0 && n.class_id >= meta.num_object_classes)) {
      throw ValidationError(where + ": class id " + std::to_string(n.class_id) + " out of vocabulary");
    }
    if (!(n.confidence >= 0.0 && n.confidence <= 1.0)) {
      throw ValidationError(where + ": confidence outside [0,1]");
    }
  }
  const int n_nodes = static_cast<int>(frame.nodes.size());
  for (std::size_t e = 0; e < frame.spatial_edges.size(); ++e) {
    const auto& se = frame.spatial_edges[e];
    const std::string where = fw + " spatial edge " + std::to_string(e);
    if (se.src < 0 || se.src >= n_nodes || se.dst < 0 || se.dst >= n_nodes) {
      throw ValidationError(where + ": endpoint out of range");
    }
    if (se.src == se.dst) throw ValidationError(where + ": self loop");
    validate_feature(se.feature, meta.feature_dim, where);
    validate_box(se.box, where);
    if (se.relation_id < 0 ||
        (meta.num_spatial_relations > 0 && se.relation_id >= meta.num_spatial_relations)) {
      throw ValidationError(where + ": relation id " + std::to_string(se.relation_id) +
                            " out of spatial vocabulary");
    }
  }
}

void validate_frames(const std::vector<FrameGraph>& frames, const GraphMetadata& meta) {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && frames[i].frame_index <= frames[i - 1].frame_index) {
      throw ValidationError("frame " + std::to_string(frames[i].frame_index) +
                            ": frame_index not strictly increasing");
    }
    validate_frame(frames[i], meta);
  }
}

void validate(const VideoGraph& g) {
  const auto& meta = g.metadata;
  validate_frames(g.frames, meta);
  NodeIndexer index(g.frames);
  const int box_rel = meta.temporal_relation_id(TemporalRelation::kBoxMatch);
  const int feat_rel = meta.temporal_relation_id(TemporalRelation::kFeatureMatch);
  for (std::size_t e = 0; e < g.temporal_edges.size(); ++e) {
    const auto& te = g.temporal_edges[e];
    const std::string where = "temporal edge " + std::to_string(e);
    if (te.src.frame_index == te.dst.frame_index) throw ValidationError(where + ": endpoints share a frame");
    index.flat(te.src);
    index.flat(te.dst);
    const int gap = std::abs(index.position_of(te.dst.frame_index) - index.position_of(te.src.frame_index));
    if (std::find(meta.horizons.begin(), meta.horizons.end(), gap) == meta.horizons.end()) {
      throw ValidationError(where + ": frame gap " + std::to_string(gap) + " not in horizon set");
    }
    if (te.relation_id != box_rel && te.relation_id != feat_rel) {
      throw ValidationError(where + ": relation id not in temporal vocabulary");
    }
    const auto& a = g.frames[index.position_of(te.src.frame_index)].nodes[te.src.node_index];
    const auto& b = g.frames[index.position_of(te.dst.frame_index)].nodes[te.dst.node_index];
    if (te.feature.size() != a.feature.size()) throw ValidationError(where + ": feature length mismatch");
    for (std::size_t k = 0; k < te.feature.size(); ++k) {
      if (te.feature[k] != a.feature[k] + b.feature[k]) {
        throw ValidationError(where + ": feature is not the endpoint sum");
      }
    }
    if (te.box != enclosing(a.box, b.box)) throw ValidationError(where + ": box is not the endpoint enclosure");
  }
}

}  // namespace stg
