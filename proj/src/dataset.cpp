#include "stg/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "stg/graph_io.hpp"

namespace stg {

using nlohmann::json;

FrameTargets propagate_labels(const Labels& labels, std::size_t num_frames, TaskKind task, int num_outputs) {
  const auto K = static_cast<std::size_t>(num_outputs);
  FrameTargets out;
  std::vector<std::vector<int>> rows;
  if (!labels.frames.empty()) {
    if (labels.frames.size() != num_frames) {
      throw std::invalid_argument("labels: " + std::to_string(labels.frames.size()) + " frame labels for " +
                                  std::to_string(num_frames) + " frames");
    }
    for (std::size_t t = 0; t < num_frames; ++t) {
      if (!labels.frames[t]) throw std::invalid_argument("labels: frame " + std::to_string(t) + " has no label");
      rows.push_back(*labels.frames[t]);
    }
  } else if (!labels.clip.empty()) {
    rows.assign(num_frames, labels.clip);
  } else {
    throw std::invalid_argument("labels: sample has neither clip nor frame labels");
  }

  if (task == TaskKind::kClipMultilabel) {
    out.multilabel = nn::Matrix<float>(num_frames, K);
    for (std::size_t t = 0; t < num_frames; ++t) {
      if (rows[t].size() != K) {
        throw std::invalid_argument("labels: label arity " + std::to_string(rows[t].size()) +
                                    " does not match " + std::to_string(K) + " outputs");
      }
      for (std::size_t k = 0; k < K; ++k) {
        const int v = rows[t][k];
        if (v != 0 && v != 1) throw std::invalid_argument("labels: multilabel entries must be 0 or 1");
        out.multilabel(t, k) = static_cast<float>(v);
      }
    }
  } else {
    for (std::size_t t = 0; t < num_frames; ++t) {
      if (rows[t].size() != 1) throw std::invalid_argument("labels: video task needs one class id per frame");
      const int c = rows[t][0];
      if (c < 0 || c >= num_outputs) {
        throw std::invalid_argument("labels: class id " + std::to_string(c) + " outside " +
                                    std::to_string(num_outputs) + " classes");
      }
      out.classes.push_back(c);
    }
  }
  return out;
}

json world_config_to_json(const WorldConfig& c) {
  return {{"num_anatomy_classes", c.num_anatomy_classes},
          {"num_tool_classes", c.num_tool_classes},
          {"tracks", c.tracks},
          {"length", c.length},
          {"feature_dim", c.feature_dim},
          {"num_spatial_relations", c.num_spatial_relations},
          {"motion_step", c.motion_step},
          {"occlusion_rate", c.occlusion_rate},
          {"mean_gap", c.mean_gap},
          {"max_gap", c.max_gap},
          {"duplicate_rate", c.duplicate_rate},
          {"duplicate_mix", c.duplicate_mix},
          {"feature_noise", c.feature_noise},
          {"label_rule", to_string(c.label_rule)},
          {"num_criteria", c.num_criteria},
          {"num_phases", c.num_phases},
          {"min_phase_length", c.min_phase_length},
          {"key_occlusion_rate", c.key_occlusion_rate},
          {"key_mean_gap", c.key_mean_gap},
          {"global_feature_dim", c.global_feature_dim},
          {"global_feature_noise", c.global_feature_noise},
          {"seed", c.seed}};
}

WorldConfig world_config_from_json(const json& j) {
  WorldConfig c;
  c.num_anatomy_classes = j.value("num_anatomy_classes", c.num_anatomy_classes);
  c.num_tool_classes = j.value("num_tool_classes", c.num_tool_classes);
  c.tracks = j.value("tracks", c.tracks);
  c.length = j.value("length", c.length);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.num_spatial_relations = j.value("num_spatial_relations", c.num_spatial_relations);
  c.motion_step = j.value("motion_step", c.motion_step);
  c.occlusion_rate = j.value("occlusion_rate", c.occlusion_rate);
  c.mean_gap = j.value("mean_gap", c.mean_gap);
  c.max_gap = j.value("max_gap", c.max_gap);
  c.duplicate_rate = j.value("duplicate_rate", c.duplicate_rate);
  c.duplicate_mix = j.value("duplicate_mix", c.duplicate_mix);
  c.feature_noise = j.value("feature_noise", c.feature_noise);
  c.label_rule = parse_label_rule(j.value("label_rule", std::string(to_string(c.label_rule))));
  c.num_criteria = j.value("num_criteria", c.num_criteria);
  c.num_phases = j.value("num_phases", c.num_phases);
  c.min_phase_length = j.value("min_phase_length", c.min_phase_length);
  c.key_occlusion_rate = j.value("key_occlusion_rate", c.key_occlusion_rate);
  c.key_mean_gap = j.value("key_mean_gap", c.key_mean_gap);
  c.global_feature_dim = j.value("global_feature_dim", c.global_feature_dim);
  c.global_feature_noise = j.value("global_feature_noise", c.global_feature_noise);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

json labels_to_json(const Labels& l, TaskKind task) {
  json j = json::object();
  if (!l.clip.empty()) j["clip"] = l.clip;
  if (!l.frames.empty()) {
    json frames = json::array();
    for (const auto& f : l.frames) {
      if (!f) {
        frames.push_back(nullptr);
      } else if (task == TaskKind::kVideoSegmentation && f->size() == 1) {
        frames.push_back((*f)[0]);
      } else {
        frames.push_back(*f);
      }
    }
    j["frames"] = std::move(frames);
  }
  return j;
}

Labels labels_from_json(const json& j) {
  Labels l;
  if (j.contains("clip")) l.clip = j.at("clip").get<std::vector<int>>();
  if (j.contains("frames")) {
    for (const auto& f : j.at("frames")) {
      if (f.is_null()) {
        l.frames.emplace_back(std::nullopt);
      } else if (f.is_number_integer()) {
        l.frames.emplace_back(std::vector<int>{f.get<int>()});
      } else {
        l.frames.emplace_back(f.get<std::vector<int>>());
      }
    }
  }
  return l;
}

json matrix_to_json(const nn::Matrix<float>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(std::vector<float>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

nn::Matrix<float> matrix_from_json(const json& j) {
  nn::Matrix<float> m;
  if (j.empty()) return m;
  m = nn::Matrix<float>(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (j[r].size() != m.cols) throw FormatError("ragged global feature matrix");
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<float>();
  }
  return m;
}

json metadata_json(const GraphMetadata& m) {
  return {{"feature_dim", m.feature_dim},
          {"num_object_classes", m.num_object_classes},
          {"num_anatomy_classes", m.num_anatomy_classes},
          {"num_spatial_relations", m.num_spatial_relations}};
}

}  // namespace

void write_manifest(const Manifest& m, const std::string& path) {
  json samples = json::array();
  for (const auto& e : m.samples) {
    json js{{"id", e.id}, {"split", e.split}, {"task", to_string(m.task)}, {"labels", labels_to_json(e.labels, m.task)}};
    if (!e.frames_path.empty()) js["frames"] = e.frames_path;
    if (!e.graph_path.empty()) js["graph"] = e.graph_path;
    if (e.global_features) js["global_features"] = matrix_to_json(*e.global_features);
    samples.push_back(std::move(js));
  }
  json doc{{"version", kManifestVersion},
           {"task", to_string(m.task)},
           {"num_outputs", m.num_outputs},
           {"metadata", metadata_json(m.metadata)},
           {"global_feature_dim", m.global_feature_dim},
           {"generator", m.generator},
           {"samples", std::move(samples)}};
  write_file_atomic(path, doc.dump(1) + "\n");
}

Manifest read_manifest(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": malformed manifest: " + e.what());
  }
  try {
    if (doc.value("version", 0) != kManifestVersion) {
      throw FormatError(path + ": unsupported manifest version");
    }
    Manifest m;
    m.task = parse_task(doc.at("task").get<std::string>());
    m.num_outputs = doc.at("num_outputs").get<int>();
    const auto& md = doc.at("metadata");
    m.metadata.feature_dim = md.at("feature_dim").get<int>();
    m.metadata.num_object_classes = md.at("num_object_classes").get<int>();
    m.metadata.num_anatomy_classes = md.value("num_anatomy_classes", m.metadata.num_object_classes);
    m.metadata.num_spatial_relations = md.at("num_spatial_relations").get<int>();
    m.global_feature_dim = doc.value("global_feature_dim", 0);
    m.generator = doc.value("generator", json::object());
    m.base_dir = std::filesystem::path(path).parent_path().string();
    for (const auto& js : doc.at("samples")) {
      ManifestEntry e;
      e.id = js.at("id").get<std::string>();
      e.split = js.value("split", std::string("train"));
      e.frames_path = js.value("frames", std::string());
      e.graph_path = js.value("graph", std::string());
      if (e.frames_path.empty() && e.graph_path.empty()) {
        throw FormatError(path + ": sample '" + e.id + "' references neither frames nor graph");
      }
      e.labels = labels_from_json(js.value("labels", json::object()));
      if (js.contains("global_features")) e.global_features = matrix_from_json(js.at("global_features"));
      m.samples.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path + ": malformed manifest: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }
}

Sample make_sample(const ManifestEntry& entry, VideoGraph graph) {
  Sample s;
  s.id = entry.id;
  s.split = entry.split;
  s.graph = std::move(graph);
  s.global_features = entry.global_features;
  s.labels = entry.labels;
  return s;
}

std::vector<Sample> load_samples(const Manifest& m, const AssemblyConfig& assembly,
                                 const std::vector<std::string>& splits) {
  namespace fs = std::filesystem;
  std::vector<Sample> out;
  FrameReadOptions opts;
  opts.feature_dim = m.metadata.feature_dim;
  opts.num_object_classes = m.metadata.num_object_classes;
  opts.num_spatial_relations = m.metadata.num_spatial_relations;
  for (const auto& e : m.samples) {
    if (!splits.empty() && std::find(splits.begin(), splits.end(), e.split) == splits.end()) continue;
    auto resolve = [&](const std::string& p) { return (fs::path(m.base_dir) / p).string(); };
    VideoGraph g;
    if (!e.graph_path.empty()) {
      g = read_video_graph_file(resolve(e.graph_path));
    } else {
      const auto frames = read_frame_graphs_file(resolve(e.frames_path), opts);
      const int T = std::max<int>(1, static_cast<int>(frames.size()));
      g = assemble_video_graph(frames, make_schedule(assembly.mode, assembly.exponent, T), m.metadata);
    }
    out.push_back(make_sample(e, std::move(g)));
  }
  return out;
}

}  // namespace stg
