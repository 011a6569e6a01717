#pragma once

#include <span>
#include <string>
#include <vector>

#include "stg/nn/matrix.hpp"

namespace stg {

/// Mean of precision@rank over the ranks of positive labels, scores sorted
/// descending with ties kept in original order. Requires a positive label.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct MapResult {
  double map = 0.0;
  // One entry per column; NaN for columns without positives.
  std::vector<double> per_criterion;
  std::vector<int> excluded_columns;
};

/// Unweighted mean of per-column AP over columns that have a positive.
MapResult map_over_criteria(const nn::Matrix<double>& scores, const nn::Matrix<int>& targets, bool warn = true);

struct F1Result {
  double mean_f1 = 0.0;
  std::vector<double> per_video;
  // Per-class F1 averaged over the videos where the class is present.
  std::vector<double> per_class;
};

/// Per video, macro F1 over the classes present in that video's ground truth;
/// averaged over videos.
F1Result video_macro_f1(const std::vector<std::vector<int>>& predicted, const std::vector<std::vector<int>>& truth);

}  // namespace stg
