#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stg/decoder.hpp"
#include "stg/graph.hpp"
#include "stg/nn/matrix.hpp"
#include "stg/synth.hpp"
#include "stg/temporal.hpp"

namespace stg {

/// Clip-level multilabel vector and/or per-frame labels. A per-frame entry is
/// a multilabel row (clip task) or a single class id (video task); nullopt
/// marks a frame without annotation.
struct Labels {
  std::vector<int> clip;
  std::vector<std::optional<std::vector<int>>> frames;
};

struct Sample {
  std::string id;
  std::string split;
  VideoGraph graph;
  std::optional<nn::Matrix<float>> global_features;
  Labels labels;
};

/// Frame-level supervision after clip-label propagation.
struct FrameTargets {
  nn::Matrix<float> multilabel;  // T x K, clip task
  std::vector<int> classes;      // T, video task
};

/// Frame labels when every frame has one; otherwise the clip label copied to
/// every frame. Partially annotated frames are an error.
FrameTargets propagate_labels(const Labels& labels, std::size_t num_frames, TaskKind task, int num_outputs);

struct ManifestEntry {
  std::string id;
  std::string split;
  std::string frames_path;  // relative to the manifest directory
  std::string graph_path;   // optional prebuilt VideoGraph
  Labels labels;
  std::optional<nn::Matrix<float>> global_features;
};

inline constexpr int kManifestVersion = 1;

struct Manifest {
  TaskKind task = TaskKind::kClipMultilabel;
  int num_outputs = 0;
  GraphMetadata metadata;
  int global_feature_dim = 0;
  nlohmann::json generator = nlohmann::json::object();
  std::vector<ManifestEntry> samples;
  // Directory the relative paths resolve against.
  std::string base_dir;
};

void write_manifest(const Manifest& manifest, const std::string& path);
Manifest read_manifest(const std::string& path);

nlohmann::json world_config_to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const nlohmann::json& j);

struct AssemblyConfig {
  HorizonMode mode = HorizonMode::kExponential;
  int exponent = 3;
};

/// Loads (and assembles when no prebuilt graph is referenced) every sample
/// whose split is in `splits`; an empty list selects all samples.
std::vector<Sample> load_samples(const Manifest& manifest, const AssemblyConfig& assembly,
                                 const std::vector<std::string>& splits = {});

Sample make_sample(const ManifestEntry& entry, VideoGraph graph);

}  // namespace stg
