#include "stg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace stg {

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("average_precision: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw std::invalid_argument("average_precision: no positive labels");
  return sum / static_cast<double>(hits);
}

MapResult map_over_criteria(const nn::Matrix<double>& scores, const nn::Matrix<int>& targets, bool warn) {
  if (scores.rows != targets.rows || scores.cols != targets.cols) {
    throw std::invalid_argument("map_over_criteria: score and target shapes differ");
  }
  if (scores.cols == 0) throw std::invalid_argument("map_over_criteria: no criteria");
  MapResult r;
  double sum = 0.0;
  int used = 0;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    std::vector<double> s(scores.rows);
    std::vector<int> y(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
      s[i] = scores(i, c);
      y[i] = targets(i, c);
    }
    if (std::none_of(y.begin(), y.end(), [](int v) { return v != 0; })) {
      if (warn) std::cerr << "warning: criterion " << c << " has no positive labels; excluded from mAP\n";
      r.per_criterion.push_back(std::numeric_limits<double>::quiet_NaN());
      r.excluded_columns.push_back(static_cast<int>(c));
      continue;
    }
    const double ap = average_precision(s, y);
    r.per_criterion.push_back(ap);
    sum += ap;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("map_over_criteria: no criterion has a positive label");
  r.map = sum / used;
  return r;
}

F1Result video_macro_f1(const std::vector<std::vector<int>>& predicted, const std::vector<std::vector<int>>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("video_macro_f1: video count mismatch");
  F1Result r;
  std::map<int, std::pair<double, int>> class_acc;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    const auto& p = predicted[v];
    const auto& t = truth[v];
    if (p.size() != t.size()) {
      throw std::invalid_argument("video_macro_f1: video " + std::to_string(v) + " has " +
                                  std::to_string(p.size()) + " predictions for " + std::to_string(t.size()) +
                                  " frames");
    }
    std::set<int> present(t.begin(), t.end());
    if (present.empty()) continue;
    double macro = 0.0;
    for (int c : present) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const bool pc = p[i] == c, tc = t[i] == c;
        tp += pc && tc;
        fp += pc && !tc;
        fn += !pc && tc;
      }
      const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
      const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
      const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
      macro += f1;
      auto& acc = class_acc[c];
      acc.first += f1;
      acc.second += 1;
    }
    r.per_video.push_back(macro / static_cast<double>(present.size()));
  }
  if (r.per_video.empty()) throw std::invalid_argument("video_macro_f1: no non-empty videos");
  r.mean_f1 = std::accumulate(r.per_video.begin(), r.per_video.end(), 0.0) / static_cast<double>(r.per_video.size());
  if (!class_acc.empty()) {
    r.per_class.assign(static_cast<std::size_t>(class_acc.rbegin()->first) + 1,
                       std::numeric_limits<double>::quiet_NaN());
    for (const auto& [c, acc] : class_acc) r.per_class[static_cast<std::size_t>(c)] = acc.first / acc.second;
  }
  return r;
}

}  // namespace stg
