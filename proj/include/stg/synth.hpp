#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stg/graph.hpp"
#include "stg/nn/matrix.hpp"

namespace stg {

enum class LabelRule {
  // Criterion k is true iff tracks k and k+1 are both visible in the last frame.
  kClipCovisibility,
  // Frames follow an ordered schedule of phases; each phase gates one key track.
  kPhaseSchedule,
};

const char* to_string(LabelRule rule);
LabelRule parse_label_rule(const std::string& text);

struct WorldConfig {
  int num_anatomy_classes = 5;
  int num_tool_classes = 3;
  int tracks = 6;
  int length = 10;
  int feature_dim = 16;
  int num_spatial_relations = 4;
  double motion_step = 0.01;
  // Per-frame probability that a visible track becomes occluded.
  double occlusion_rate = 0.0;
  // Mean occlusion gap length; 0 disables occlusion.
  double mean_gap = 0.0;
  int max_gap = 8;
  double duplicate_rate = 0.0;
  // Weight of a foreign class appearance in duplicate features.
  double duplicate_mix = 0.6;
  double feature_noise = 0.05;
  LabelRule label_rule = LabelRule::kClipCovisibility;
  int num_criteria = 3;
  int num_phases = 4;
  int min_phase_length = 4;
  // Occlusion settings for phase key tracks (phase rule only).
  double key_occlusion_rate = 0.3;
  double key_mean_gap = 5.0;
  int global_feature_dim = 8;
  double global_feature_noise = 1.0;
  // Seeds class appearances, shared by every sequence of a dataset.
  std::uint64_t seed = 7;

  void validate() const;
  int num_classes() const { return num_anatomy_classes + num_tool_classes; }
  int num_outputs() const { return label_rule == LabelRule::kClipCovisibility ? num_criteria : num_phases; }
  GraphMetadata metadata() const;
};

struct SyntheticSequence {
  std::vector<FrameGraph> frames;
  // Clip rule: multilabel vector. Phase rule: empty.
  std::vector<int> clip_labels;
  // Phase rule: class per frame. Clip rule: empty.
  std::vector<int> frame_labels;
  nn::Matrix<float> global_features;
};

SyntheticSequence generate_sequence(const WorldConfig& config, std::uint64_t sample_seed);

struct DatasetSizes {
  int train = 0;
  int val = 0;
  int test = 0;
};

/// Writes frames/<id>.jsonl per sample plus manifest.json into `out_dir`;
/// returns the manifest path. Sample i is generated from derive_seed(seed, i).
std::string generate_dataset(const WorldConfig& config, const DatasetSizes& sizes, std::uint64_t seed,
                             const std::string& out_dir);

}  // namespace stg
