#pragma once

#include <random>
#include <set>
#include <vector>

#include "stg/graph.hpp"

namespace stg {

enum class ScoreMode { kDegreeConfidence };

struct EditConfig {
  std::set<int> editable_classes;
  double p_edit = 0.5;
  ScoreMode score_mode = ScoreMode::kDegreeConfidence;

  /// Every anatomy class of the metadata is editable; tools are not.
  static EditConfig anatomy_defaults(const GraphMetadata& meta, double p_edit = 0.5);
};

/// Per-node dropout probability and keep score, in flat node order.
struct NodeScoreTable {
  std::vector<double> dropout;
  std::vector<double> score;
};

/// Number of temporal edges incident to each node (flat order).
std::vector<int> temporal_degrees(const VideoGraph& g);

/// dropout = 1/deg (1 for isolated nodes); score = (1 - dropout) * confidence.
NodeScoreTable node_scores(const VideoGraph& g, const std::vector<int>& degrees, const EditConfig& config);

/// Keeps the top-scoring node of every (frame, editable class) group, ties
/// to the lower index, and drops the rest with their incident edges.
VideoGraph edit_graph(const VideoGraph& g, const EditConfig& config);

/// One Bernoulli(p_edit) draw: edited copy on success, unchanged copy otherwise.
VideoGraph maybe_edit(const VideoGraph& g, const EditConfig& config, std::mt19937_64& rng);
bool draw_edit(const EditConfig& config, std::mt19937_64& rng);

}  // namespace stg
