#include "stg/graph_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace stg {

using nlohmann::json;

namespace {

Feature feature_from_json(const json& j) {
  Feature f;
  f.reserve(j.size());
  for (const auto& v : j) f.push_back(v.get<float>());
  return f;
}

BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("box must be an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json box_to_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json node_to_json(const Node& n) {
  json j{{"feature", n.feature}, {"box", box_to_json(n.box)}, {"class_id", n.class_id},
         {"confidence", n.confidence}};
  if (n.track_id >= 0) j["track_id"] = n.track_id;
  return j;
}

json frame_to_json(const FrameGraph& f) {
  json nodes = json::array();
  for (const auto& n : f.nodes) nodes.push_back(node_to_json(n));
  json edges = json::array();
  for (const auto& e : f.spatial_edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"feature", e.feature}, {"box", box_to_json(e.box)},
                     {"relation_id", e.relation_id}});
  }
  return {{"frame_index", f.frame_index}, {"nodes", std::move(nodes)}, {"spatial_edges", std::move(edges)}};
}

BBox scale_box(BBox b, const FrameReadOptions& o) {
  if (o.image_width && o.image_height) {
    b.x1 /= *o.image_width;
    b.x2 /= *o.image_width;
    b.y1 /= *o.image_height;
    b.y2 /= *o.image_height;
  }
  return b;
}

FrameGraph frame_from_json(const json& j, const FrameReadOptions& o) {
  FrameGraph f;
  f.frame_index = j.at("frame_index").get<int>();
  for (const auto& jn : j.at("nodes")) {
    Node n;
    n.feature = feature_from_json(jn.at("feature"));
    n.box = scale_box(box_from_json(jn.at("box")), o);
    n.class_id = jn.at("class_id").get<int>();
    n.confidence = jn.value("confidence", 1.0);
    n.track_id = jn.value("track_id", -1);
    f.nodes.push_back(std::move(n));
  }
  if (j.contains("spatial_edges")) {
    for (const auto& je : j.at("spatial_edges")) {
      SpatialEdge e;
      e.src = je.at("src").get<int>();
      e.dst = je.at("dst").get<int>();
      e.feature = feature_from_json(je.at("feature"));
      e.box = scale_box(box_from_json(je.at("box")), o);
      e.relation_id = je.at("relation_id").get<int>();
      f.spatial_edges.push_back(std::move(e));
    }
  }
  return f;
}

json metadata_to_json(const GraphMetadata& m) {
  return {{"feature_dim", m.feature_dim},
          {"num_object_classes", m.num_object_classes},
          {"num_anatomy_classes", m.num_anatomy_classes},
          {"num_spatial_relations", m.num_spatial_relations},
          {"temporal_relations", {{"box_match", m.temporal_relation_id(TemporalRelation::kBoxMatch)},
                                  {"feature_match", m.temporal_relation_id(TemporalRelation::kFeatureMatch)}}},
          {"shared_feature_dim", m.shared_feature_dim},
          {"horizon_mode", to_string(m.horizon_mode)},
          {"horizon_exponent", m.horizon_exponent},
          {"horizons", m.horizons}};
}

GraphMetadata metadata_from_json(const json& j) {
  GraphMetadata m;
  m.feature_dim = j.at("feature_dim").get<int>();
  m.num_object_classes = j.at("num_object_classes").get<int>();
  m.num_anatomy_classes = j.value("num_anatomy_classes", m.num_object_classes);
  m.num_spatial_relations = j.at("num_spatial_relations").get<int>();
  m.shared_feature_dim = j.value("shared_feature_dim", true);
  m.horizon_mode = parse_horizon_mode(j.value("horizon_mode", std::string("exponential")));
  m.horizon_exponent = j.value("horizon_exponent", 0);
  m.horizons = j.at("horizons").get<std::vector<int>>();
  return m;
}

json noderef_to_json(const NodeRef& r) { return json::array({r.frame_index, r.node_index}); }

NodeRef noderef_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("node reference must be [frame_index, node_index]");
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

std::vector<FrameGraph> read_frame_graphs(std::istream& in, const FrameReadOptions& options) {
  std::vector<FrameGraph> frames;
  GraphMetadata meta;
  meta.feature_dim = options.feature_dim;
  meta.num_object_classes = options.num_object_classes;
  meta.num_spatial_relations = options.num_spatial_relations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameGraph frame;
    try {
      frame = frame_from_json(json::parse(line), options);
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed frame record: ") + e.what(), line_no);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
    if (meta.feature_dim == 0 && !frame.nodes.empty()) {
      meta.feature_dim = static_cast<int>(frame.nodes.front().feature.size());
    }
    if (!frames.empty() && frame.frame_index <= frames.back().frame_index) {
      throw FormatError("frame " + std::to_string(frame.frame_index) + ": frame_index not strictly increasing",
                        line_no);
    }
    try {
      validate_frame(frame, meta);
    } catch (const ValidationError& e) {
      throw FormatError(e.what(), line_no);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<FrameGraph> read_frame_graphs_file(const std::string& path, const FrameReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open frame-graph file '" + path + "'");
  try {
    return read_frame_graphs(in, options);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_frame_graphs(const std::vector<FrameGraph>& frames, std::ostream& out) {
  for (const auto& f : frames) out << frame_to_json(f).dump() << '\n';
}

void write_video_graph(const VideoGraph& g, std::ostream& out, const json& config) {
  json frames = json::array();
  for (const auto& f : g.frames) frames.push_back(frame_to_json(f));
  json edges = json::array();
  for (const auto& e : g.temporal_edges) {
    edges.push_back({{"src", noderef_to_json(e.src)}, {"dst", noderef_to_json(e.dst)},
                     {"relation_id", e.relation_id}, {"feature", e.feature}, {"box", box_to_json(e.box)}});
  }
  json doc{{"version", kVideoGraphFormatVersion},
           {"metadata", metadata_to_json(g.metadata)},
           {"frames", std::move(frames)},
           {"temporal_edges", std::move(edges)}};
  if (!config.is_null()) doc["config"] = config;
  out << doc.dump() << '\n';
}

VideoGraph read_video_graph(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("truncated or malformed video graph: ") + e.what());
  }
  try {
    if (!doc.contains("version")) throw FormatError("video graph has no version field");
    const int version = doc.at("version").get<int>();
    if (version != kVideoGraphFormatVersion) {
      throw FormatError("unsupported video graph version " + std::to_string(version) + " (expected " +
                        std::to_string(kVideoGraphFormatVersion) + ")");
    }
    VideoGraph g;
    g.metadata = metadata_from_json(doc.at("metadata"));
    FrameReadOptions none;
    for (const auto& jf : doc.at("frames")) g.frames.push_back(frame_from_json(jf, none));
    for (const auto& je : doc.at("temporal_edges")) {
      TemporalEdge e;
      e.src = noderef_from_json(je.at("src"));
      e.dst = noderef_from_json(je.at("dst"));
      e.relation_id = je.at("relation_id").get<int>();
      e.feature = feature_from_json(je.at("feature"));
      e.box = box_from_json(je.at("box"));
      g.temporal_edges.push_back(std::move(e));
    }
    validate(g);
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed video graph: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid video graph: ") + e.what());
  }
}

VideoGraph read_video_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open video graph file '" + path + "'");
  try {
    return read_video_graph(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

namespace {

// Fixed palette; relation ids beyond it wrap around.
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string node_name(int frame, int index) {
  return "f" + std::to_string(frame) + "_n" + std::to_string(index);
}

}  // namespace

std::string export_dot(const VideoGraph& g) {
  std::ostringstream os;
  os << "digraph video_graph {\n";
  os << "  rankdir=LR;\n";
  os << "  node [shape=ellipse];\n";
  constexpr std::size_t palette_size = sizeof(kPalette) / sizeof(kPalette[0]);
  auto color = [&](int rel) { return kPalette[static_cast<std::size_t>(rel) % palette_size]; };
  for (const auto& f : g.frames) {
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      os << "  " << node_name(f.frame_index, static_cast<int>(i)) << " [label=\"c" << f.nodes[i].class_id << "_"
         << f.frame_index << "\"];\n";
    }
  }
  for (const auto& f : g.frames) {
    for (const auto& e : f.spatial_edges) {
      os << "  " << node_name(f.frame_index, e.src) << " -> " << node_name(f.frame_index, e.dst)
         << " [color=\"" << color(e.relation_id) << "\", label=\"r" << e.relation_id << "\"];\n";
    }
  }
  for (const auto& e : g.temporal_edges) {
    os << "  " << node_name(e.src.frame_index, e.src.node_index) << " -> "
       << node_name(e.dst.frame_index, e.dst.node_index) << " [color=\"" << color(e.relation_id)
       << "\", style=dashed, label=\"r" << e.relation_id << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace stg
