#pragma once

#include <random>
#include <vector>

#include "stg/graph.hpp"

namespace stg::testing {

inline BBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return {x1, y1, x2, y2};
}

inline Feature random_feature(int dim, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Feature f(static_cast<std::size_t>(dim));
  for (auto& v : f) v = n(rng);
  return f;
}

inline GraphMetadata small_metadata(int dim = 4) {
  GraphMetadata m;
  m.feature_dim = dim;
  m.num_object_classes = 4;
  m.num_anatomy_classes = 2;
  m.num_spatial_relations = 3;
  return m;
}

inline FrameGraph random_frame(int frame_index, int num_nodes, const GraphMetadata& meta, std::mt19937_64& rng,
                               double edge_prob = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, meta.num_object_classes - 1);
  std::uniform_int_distribution<int> rel(0, meta.num_spatial_relations - 1);
  FrameGraph f;
  f.frame_index = frame_index;
  for (int i = 0; i < num_nodes; ++i) {
    Node n;
    n.feature = random_feature(meta.feature_dim, rng);
    n.box = random_box(rng);
    n.class_id = cls(rng);
    n.confidence = 0.3 + 0.7 * u(rng);
    f.nodes.push_back(std::move(n));
  }
  for (int i = 0; i < num_nodes; ++i) {
    for (int j = 0; j < num_nodes; ++j) {
      if (i == j || u(rng) >= edge_prob) continue;
      SpatialEdge e;
      e.src = i;
      e.dst = j;
      e.feature = random_feature(meta.feature_dim, rng);
      e.box = enclosing(f.nodes[static_cast<std::size_t>(i)].box, f.nodes[static_cast<std::size_t>(j)].box);
      e.relation_id = rel(rng);
      f.spatial_edges.push_back(std::move(e));
    }
  }
  return f;
}

inline std::vector<FrameGraph> random_frames(int T, int max_nodes, const GraphMetadata& meta, std::mt19937_64& rng,
                                             int min_nodes = 0) {
  std::uniform_int_distribution<int> count(min_nodes, max_nodes);
  std::vector<FrameGraph> frames;
  for (int t = 0; t < T; ++t) frames.push_back(random_frame(t, count(rng), meta, rng));
  return frames;
}

}  // namespace stg::testing
