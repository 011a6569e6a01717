#include "stg/edit.hpp"

#include <map>
#include <stdexcept>

namespace stg {

EditConfig EditConfig::anatomy_defaults(const GraphMetadata& meta, double p_edit) {
  EditConfig c;
  for (int k = 0; k < meta.num_anatomy_classes; ++k) c.editable_classes.insert(k);
  c.p_edit = p_edit;
  return c;
}

std::vector<int> temporal_degrees(const VideoGraph& g) {
  NodeIndexer index(g.frames);
  std::vector<int> deg(index.num_nodes(), 0);
  for (const auto& e : g.temporal_edges) {
    ++deg[index.flat(e.src)];
    ++deg[index.flat(e.dst)];
  }
  return deg;
}

NodeScoreTable node_scores(const VideoGraph& g, const std::vector<int>& degrees, const EditConfig&) {
  NodeScoreTable t;
  t.dropout.reserve(degrees.size());
  t.score.reserve(degrees.size());
  std::size_t flat = 0;
  for (const auto& f : g.frames) {
    for (const auto& n : f.nodes) {
      const int d = degrees.at(flat++);
      const double p = d > 0 ? 1.0 / d : 1.0;
      t.dropout.push_back(p);
      t.score.push_back((1.0 - p) * n.confidence);
    }
  }
  if (flat != degrees.size()) throw std::invalid_argument("node_scores: degree table does not match graph");
  return t;
}

VideoGraph edit_graph(const VideoGraph& g, const EditConfig& config) {
  const auto scores = node_scores(g, temporal_degrees(g), config);
  NodeIndexer index(g.frames);

  // keep[flat] and the new within-frame index of each surviving node
  std::vector<char> keep(index.num_nodes(), 1);
  std::vector<int> remap(index.num_nodes(), -1);
  for (std::size_t pos = 0; pos < g.frames.size(); ++pos) {
    const auto& f = g.frames[pos];
    const std::size_t base = index.offset(pos);
    std::map<int, std::size_t> best;  // class -> local node index
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      const int cls = f.nodes[i].class_id;
      if (!config.editable_classes.contains(cls)) continue;
      auto [it, inserted] = best.try_emplace(cls, i);
      if (!inserted && scores.score[base + i] > scores.score[base + it->second]) it->second = i;
    }
    int next = 0;
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      const int cls = f.nodes[i].class_id;
      if (config.editable_classes.contains(cls) && best.at(cls) != i) {
        keep[base + i] = 0;
        continue;
      }
      remap[base + i] = next++;
    }
  }

  VideoGraph out;
  out.metadata = g.metadata;
  out.frames.reserve(g.frames.size());
  for (std::size_t pos = 0; pos < g.frames.size(); ++pos) {
    const auto& f = g.frames[pos];
    const std::size_t base = index.offset(pos);
    FrameGraph nf;
    nf.frame_index = f.frame_index;
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      if (keep[base + i]) nf.nodes.push_back(f.nodes[i]);
    }
    for (const auto& e : f.spatial_edges) {
      if (!keep[base + e.src] || !keep[base + e.dst]) continue;
      SpatialEdge ne = e;
      ne.src = remap[base + e.src];
      ne.dst = remap[base + e.dst];
      nf.spatial_edges.push_back(std::move(ne));
    }
    out.frames.push_back(std::move(nf));
  }
  for (const auto& e : g.temporal_edges) {
    const std::size_t s = index.flat(e.src);
    const std::size_t d = index.flat(e.dst);
    if (!keep[s] || !keep[d]) continue;
    TemporalEdge ne = e;
    ne.src.node_index = remap[s];
    ne.dst.node_index = remap[d];
    out.temporal_edges.push_back(std::move(ne));
  }
  return out;
}

bool draw_edit(const EditConfig& config, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(config.p_edit);
  return coin(rng);
}

VideoGraph maybe_edit(const VideoGraph& g, const EditConfig& config, std::mt19937_64& rng) {
  return draw_edit(config, rng) ? edit_graph(g, config) : g;
}

}  // namespace stg
