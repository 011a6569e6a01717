#include "stg/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stg {

namespace {

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BBox& a, const BBox& b) {
  const double hull = enclosing(a, b).area();
  if (hull <= 0.0) return 1.0;
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const double iou_term = uni > 0.0 ? inter / uni : 0.0;
  return iou_term - (hull - uni) / hull;
}

double cosine_sim(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_sim: length mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<double>(a[k]) * b[k];
    na += static_cast<double>(a[k]) * a[k];
    nb += static_cast<double>(b[k]) * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

double kernel_value(const Node& a, const Node& b, Kernel kernel) {
  return kernel == Kernel::kBox ? giou(a.box, b.box) : cosine_sim(a.feature, b.feature);
}

SimilarityMatrix empty_matrix(std::size_t rows, std::size_t cols, Kernel kernel) {
  SimilarityMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.kernel = kernel;
  m.values.assign(rows * cols, 0.0);
  return m;
}

}  // namespace

SimilarityMatrix reference::pairwise_similarity(std::span<const Node> src, std::span<const Node> dst, Kernel kernel) {
  SimilarityMatrix m = empty_matrix(src.size(), dst.size(), kernel);
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < dst.size(); ++j) m.values[i * m.cols + j] = kernel_value(src[i], dst[j], kernel);
  }
  return m;
}

SimilarityMatrix pairwise_similarity(std::span<const Node> src, std::span<const Node> dst, Kernel kernel) {
  SimilarityMatrix m = empty_matrix(src.size(), dst.size(), kernel);
  const long long total = static_cast<long long>(src.size() * dst.size());
  const std::size_t cols = m.cols;
#pragma omp parallel for schedule(static) if (total > 4096)
  for (long long k = 0; k < total; ++k) {
    const std::size_t i = static_cast<std::size_t>(k) / cols;
    const std::size_t j = static_cast<std::size_t>(k) % cols;
    m.values[static_cast<std::size_t>(k)] = kernel_value(src[i], dst[j], kernel);
  }
  return m;
}

std::vector<TemporalLink> best_match_edges(const SimilarityMatrix& m, int src_frame, int dst_frame,
                                           int relation_id) {
  std::vector<TemporalLink> out;
  if (m.empty()) return out;
  out.reserve(4 * (m.rows + m.cols));
  auto emit = [&](std::size_t i, std::size_t j) {
    const NodeRef a{src_frame, static_cast<int>(i)};
    const NodeRef b{dst_frame, static_cast<int>(j)};
    out.push_back({a, b, relation_id});
    out.push_back({b, a, relation_id});
  };
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols; ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    emit(i, best);
  }
  for (std::size_t j = 0; j < m.cols; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.rows; ++i) {
      if (m(i, j) > m(best, j)) best = i;
    }
    emit(best, j);
  }
  return out;
}

TemporalEdgeSet build_temporal_edges(const FrameGraph& a, const FrameGraph& b, const GraphMetadata& meta) {
  if (a.frame_index == b.frame_index) {
    throw std::invalid_argument("build_temporal_edges: frames must be distinct");
  }
  TemporalEdgeSet set;
  if (a.nodes.empty() || b.nodes.empty()) return set;
  for (Kernel kernel : {Kernel::kBox, Kernel::kFeature}) {
    const auto rel = meta.temporal_relation_id(kernel == Kernel::kBox ? TemporalRelation::kBoxMatch
                                                                      : TemporalRelation::kFeatureMatch);
    // Per-pair matrices are small; the parallelism lives at the frame-pair level.
    const auto m = reference::pairwise_similarity(a.nodes, b.nodes, kernel);
    auto links = best_match_edges(m, a.frame_index, b.frame_index, rel);
    set.links.insert(set.links.end(), links.begin(), links.end());
  }
  return set;
}

HorizonSchedule make_schedule(HorizonMode mode, int exponent, int num_frames) {
  if (num_frames < 1) throw std::invalid_argument("make_schedule: need at least one frame");
  if (exponent < 0) throw std::invalid_argument("make_schedule: exponent must be non-negative");
  HorizonSchedule s;
  s.mode = mode;
  s.exponent = exponent;
  switch (mode) {
    case HorizonMode::kExponential:
      for (int k = 0; k <= exponent && k < 31; ++k) {
        const int w = 1 << k;
        if (w <= num_frames - 1) s.horizons.push_back(w);
      }
      break;
    case HorizonMode::kDense:
      for (int w = 1; w <= num_frames - 1; ++w) s.horizons.push_back(w);
      break;
    case HorizonMode::kAdjacent:
      if (num_frames > 1) s.horizons.push_back(1);
      break;
  }
  return s;
}

namespace {

struct FramePair {
  std::size_t from;
  std::size_t to;
};

std::vector<FramePair> frame_pairs(std::size_t num_frames, const std::vector<int>& horizons) {
  std::vector<FramePair> pairs;
  for (std::size_t t = 0; t < num_frames; ++t) {
    for (int w : horizons) {
      const std::size_t to = t + static_cast<std::size_t>(w);
      if (to < num_frames) pairs.push_back({t, to});
    }
  }
  return pairs;
}

TemporalEdge augment(const TemporalLink& link, const Node& a, const Node& b) {
  TemporalEdge e;
  e.src = link.src;
  e.dst = link.dst;
  e.relation_id = link.relation_id;
  e.feature.resize(a.feature.size());
  for (std::size_t k = 0; k < a.feature.size(); ++k) e.feature[k] = a.feature[k] + b.feature[k];
  e.box = enclosing(a.box, b.box);
  return e;
}

// Materializes one frame pair's links; the link's src may live in either frame.
std::vector<TemporalEdge> pair_edges(const FrameGraph& fa, const FrameGraph& fb, const GraphMetadata& meta) {
  const auto set = build_temporal_edges(fa, fb, meta);
  std::vector<TemporalEdge> edges;
  edges.reserve(set.size());
  for (const auto& link : set.links) {
    const FrameGraph& fs = link.src.frame_index == fa.frame_index ? fa : fb;
    const FrameGraph& fd = link.dst.frame_index == fa.frame_index ? fa : fb;
    edges.push_back(augment(link, fs.nodes[link.src.node_index], fd.nodes[link.dst.node_index]));
  }
  return edges;
}

VideoGraph start_graph(const std::vector<FrameGraph>& frames, const HorizonSchedule& schedule, GraphMetadata meta) {
  VideoGraph g;
  meta.horizon_mode = schedule.mode;
  meta.horizon_exponent = schedule.exponent;
  meta.horizons = schedule.horizons;
  if (meta.feature_dim == 0) {
    for (const auto& f : frames) {
      if (!f.nodes.empty()) {
        meta.feature_dim = static_cast<int>(f.nodes.front().feature.size());
        break;
      }
    }
  }
  g.metadata = std::move(meta);
  g.frames = frames;
  return g;
}

}  // namespace

VideoGraph reference::assemble_video_graph(const std::vector<FrameGraph>& frames, const HorizonSchedule& schedule,
                                           GraphMetadata meta) {
  VideoGraph g = start_graph(frames, schedule, std::move(meta));
  for (const auto& p : frame_pairs(frames.size(), schedule.horizons)) {
    auto edges = pair_edges(frames[p.from], frames[p.to], g.metadata);
    std::move(edges.begin(), edges.end(), std::back_inserter(g.temporal_edges));
  }
  return g;
}

VideoGraph assemble_video_graph(const std::vector<FrameGraph>& frames, const HorizonSchedule& schedule,
                                GraphMetadata meta) {
  VideoGraph g = start_graph(frames, schedule, std::move(meta));
  const auto pairs = frame_pairs(frames.size(), schedule.horizons);
  std::vector<std::vector<TemporalEdge>> slots(pairs.size());
  const long long n = static_cast<long long>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long long k = 0; k < n; ++k) {
    const auto& p = pairs[static_cast<std::size_t>(k)];
    slots[static_cast<std::size_t>(k)] = pair_edges(frames[p.from], frames[p.to], g.metadata);
  }
  std::size_t total = 0;
  for (const auto& s : slots) total += s.size();
  g.temporal_edges.reserve(total);
  for (auto& s : slots) std::move(s.begin(), s.end(), std::back_inserter(g.temporal_edges));
  return g;
}

}  // namespace stg
