#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stg/graph.hpp"
#include "stg/nn/matrix.hpp"
#include "stg/nn/params.hpp"
#include "stg/nn/tape.hpp"

namespace stg {

enum class TaskKind { kClipMultilabel, kVideoSegmentation };

const char* to_string(TaskKind task);
TaskKind parse_task(const std::string& text);

struct GnnConfig {
  int num_layers = 5;
  int hidden = 32;
  int relation_dim = 8;
  double dropout = 0.25;
  bool residual = true;
};

/// Causal dilated temporal convolution over global per-frame features.
/// Block j uses dilation 2^j.
struct TcnConfig {
  bool enabled = false;
  int input_dim = 0;
  int channels = 32;
  int kernel_size = 3;
  int levels = 4;
  bool causal = true;

  /// 1 + (kernel_size - 1) * sum of dilations.
  int receptive_field() const;
  /// Smallest level count whose receptive field covers `num_frames`.
  static int levels_for_length(int num_frames, int kernel_size = 3);
};

struct HeadConfig {
  TaskKind task = TaskKind::kClipMultilabel;
  int num_outputs = 3;
};

struct ModelConfig {
  int feature_dim = 0;
  int num_relations = 0;
  GnnConfig gnn;
  TcnConfig tcn;
  HeadConfig head;

  void validate() const;
};

/// Decoder inputs flattened from a VideoGraph. Edges list spatial edges
/// first (frame order), then temporal edges; all endpoints are flat node ids.
template <class T>
struct GraphTensors {
  nn::Matrix<T> node_features;
  nn::Matrix<T> edge_features;
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> relation;
  std::vector<int> node_frame;
  std::size_t num_frames = 0;
};

template <class T>
GraphTensors<T> to_tensors(const VideoGraph& g);

template <class T>
nn::ParamStore<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws if `params` does not hold exactly the tensors `config` needs.
template <class T>
void check_params(const ModelConfig& config, const nn::ParamStore<T>& params);

struct LayerOutput {
  nn::Var nodes;
  nn::Var edges;
};

/// One message-passing layer. Each edge s->d feeds [h_s | h_e | emb(rel) | h_d]
/// through a two-layer perceptron whose output splits into a message for s,
/// the new edge feature and a message for d. Nodes add an MLP of the mean of
/// their incoming messages; nodes without messages pass through unchanged.
template <class T>
LayerOutput gnn_layer(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config, int layer,
                      nn::Var nodes, nn::Var edges, nn::Var relation_embedding, const GraphTensors<T>& graph,
                      std::mt19937_64& rng);

/// Mean of node rows per frame; zero rows for empty frames.
template <class T>
nn::Var frame_pool(nn::Tape<T>& tape, nn::Var nodes, const GraphTensors<T>& graph);

template <class T>
nn::Var tcn_forward(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config, nn::Var global);

/// Per-frame logits (num_frames x num_outputs) for every frame.
template <class T>
nn::Var frame_logits(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config,
                     const GraphTensors<T>& graph, const nn::Matrix<T>* global_features, std::mt19937_64& rng);

/// Task output: the last frame's row for clip classification, all rows for
/// video segmentation.
template <class T>
nn::Var forward(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config,
                const GraphTensors<T>& graph, const nn::Matrix<T>* global_features, std::mt19937_64& rng);

/// Inference convenience: evaluation-mode forward returning the task logits.
nn::Matrix<float> predict_logits(nn::ParamStore<float>& params, const ModelConfig& config, const VideoGraph& g,
                                 const nn::Matrix<float>* global_features);

}  // namespace stg
