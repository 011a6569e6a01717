#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stg/dataset.hpp"
#include "stg/decoder.hpp"
#include "stg/edit.hpp"
#include "stg/nn/params.hpp"

namespace stg {

struct TrainConfig {
  int epochs = 10;
  double lr = 3e-4;
  // Samples per optimizer step; gradients are averaged over the batch.
  int batch_size = 128;
  double clip_norm = 5.0;
  bool edit_enabled = true;
  EditConfig edit;
  std::uint64_t seed = 0;
  // When set, last.ckpt.json / best.ckpt.json / metrics.jsonl live here.
  std::string checkpoint_dir;
  bool resume = false;
  // Echoed into checkpoints.
  nlohmann::json run_config = nlohmann::json::object();
};

struct EpochRecord {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double metric = 0.0;
};

struct TrainResult {
  nn::ParamStore<float> best;
  nn::ParamStore<float> last;
  std::vector<EpochRecord> log;
  int best_epoch = -1;
  double best_metric = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam training with frame-wise supervision. The best parameters by
/// validation metric (training metric when there is no validation split) are
/// retained. Deterministic given config.seed.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const ModelConfig& model,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;
  // Task logits per sample: 1xK (clip) or TxK (video).
  std::vector<nn::Matrix<float>> outputs;
};

/// Evaluation-mode pass; editing is applied deterministically when enabled.
EvalResult evaluate(nn::ParamStore<float>& params, const ModelConfig& model, const std::vector<Sample>& samples,
                    bool edit_enabled, const EditConfig& edit);

/// mAP over last-frame scores (clip) or mean per-video macro F1 (video).
/// NaN when the metric is undefined for the given labels.
double task_metric(TaskKind task, const std::vector<nn::Matrix<float>>& outputs, const std::vector<Sample>& samples,
                   int num_outputs);

/// Fraction of frames whose thresholded (clip) or argmax (video) prediction
/// matches the propagated frame targets exactly.
double frame_accuracy(nn::ParamStore<float>& params, const ModelConfig& model, const std::vector<Sample>& samples,
                      bool edit_enabled, const EditConfig& edit);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  nn::ParamStore<float> params;
  nlohmann::json run_config = nlohmann::json::object();
  int epochs_done = 0;
  std::int64_t step = 0;
  int best_epoch = -1;
  double best_metric = 0.0;
  bool with_optimizer_state = false;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Validates tensor shapes against the stored architecture.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stg
