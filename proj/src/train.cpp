#include "stg/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "stg/graph_io.hpp"
#include "stg/metrics.hpp"
#include "stg/rng.hpp"

namespace stg {

using nlohmann::json;

namespace {

struct Prepared {
  GraphTensors<float> raw;
  GraphTensors<float> edited;
  FrameTargets targets;
  const nn::Matrix<float>* global = nullptr;
};

std::vector<Prepared> prepare(const std::vector<Sample>& samples, const ModelConfig& model, bool edit_enabled,
                              const EditConfig& edit) {
  std::vector<Prepared> out(samples.size());
  const long long n = static_cast<long long>(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    auto& p = out[static_cast<std::size_t>(i)];
    p.raw = to_tensors<float>(s.graph);
    if (edit_enabled) p.edited = to_tensors<float>(edit_graph(s.graph, edit));
    p.targets = propagate_labels(s.labels, s.graph.frames.size(), model.head.task, model.head.num_outputs);
    if (s.global_features) p.global = &*s.global_features;
  }
  return out;
}

nn::Var task_loss(nn::Tape<float>& tape, nn::Var logits, const FrameTargets& targets, TaskKind task) {
  return task == TaskKind::kClipMultilabel ? tape.bce_with_logits(logits, targets.multilabel)
                                           : tape.softmax_cross_entropy(logits, targets.classes);
}

nn::Matrix<float> task_rows(const nn::Matrix<float>& frame_logits, TaskKind task) {
  if (task == TaskKind::kVideoSegmentation || frame_logits.rows == 0) return frame_logits;
  nn::Matrix<float> last(1, frame_logits.cols);
  std::copy(frame_logits.row(frame_logits.rows - 1).begin(), frame_logits.row(frame_logits.rows - 1).end(),
            last.data.begin());
  return last;
}

std::vector<int> argmax_rows(const nn::Matrix<float>& m) {
  std::vector<int> out;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

bool better(double candidate, double incumbent) {
  if (std::isnan(candidate)) return false;
  return std::isnan(incumbent) || candidate > incumbent;
}

}  // namespace

double task_metric(TaskKind task, const std::vector<nn::Matrix<float>>& outputs, const std::vector<Sample>& samples,
                   int num_outputs) {
  if (outputs.size() != samples.size()) throw std::invalid_argument("task_metric: output count mismatch");
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    if (task == TaskKind::kClipMultilabel) {
      const auto K = static_cast<std::size_t>(num_outputs);
      nn::Matrix<double> scores(samples.size(), K);
      nn::Matrix<int> targets(samples.size(), K);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& o = outputs[i];
        const auto ft = propagate_labels(samples[i].labels, samples[i].graph.frames.size(), task, num_outputs);
        for (std::size_t k = 0; k < K; ++k) {
          scores(i, k) = o(o.rows - 1, k);
          targets(i, k) = static_cast<int>(ft.multilabel(ft.multilabel.rows - 1, k));
        }
      }
      return map_over_criteria(scores, targets, false).map;
    }
    std::vector<std::vector<int>> pred, truth;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      pred.push_back(argmax_rows(outputs[i]));
      truth.push_back(propagate_labels(samples[i].labels, samples[i].graph.frames.size(), task, num_outputs).classes);
    }
    return video_macro_f1(pred, truth).mean_f1;
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

EvalResult evaluate(nn::ParamStore<float>& params, const ModelConfig& model, const std::vector<Sample>& samples,
                    bool edit_enabled, const EditConfig& edit) {
  const auto prepared = prepare(samples, model, edit_enabled, edit);
  EvalResult r;
  r.outputs.resize(samples.size());
  std::vector<double> losses(samples.size(), 0.0);
  const long long n = static_cast<long long>(samples.size());
  // Inference on a finalized store is read-only, so samples run in parallel.
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    const auto& p = prepared[static_cast<std::size_t>(i)];
    nn::Tape<float> tape(false);
    std::mt19937_64 rng(0);
    const auto& g = edit_enabled ? p.edited : p.raw;
    const nn::Var logits = frame_logits(tape, params, model, g, p.global, rng);
    losses[static_cast<std::size_t>(i)] = tape.value(task_loss(tape, logits, p.targets, model.head.task)).data[0];
    r.outputs[static_cast<std::size_t>(i)] = task_rows(tape.value(logits), model.head.task);
  }
  r.loss = samples.empty() ? 0.0 : std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
  r.metric = task_metric(model.head.task, r.outputs, samples, model.head.num_outputs);
  return r;
}

double frame_accuracy(nn::ParamStore<float>& params, const ModelConfig& model, const std::vector<Sample>& samples,
                      bool edit_enabled, const EditConfig& edit) {
  const auto prepared = prepare(samples, model, edit_enabled, edit);
  std::size_t correct = 0, total = 0;
  for (const auto& p : prepared) {
    nn::Tape<float> tape(false);
    std::mt19937_64 rng(0);
    const auto& logits = tape.value(frame_logits(tape, params, model, edit_enabled ? p.edited : p.raw, p.global, rng));
    for (std::size_t t = 0; t < logits.rows; ++t) {
      bool ok = true;
      if (model.head.task == TaskKind::kClipMultilabel) {
        for (std::size_t k = 0; k < logits.cols; ++k) ok &= (logits(t, k) > 0.0f) == (p.targets.multilabel(t, k) > 0.5f);
      } else {
        const auto row = logits.row(t);
        ok = (std::max_element(row.begin(), row.end()) - row.begin()) == p.targets.classes[t];
      }
      correct += ok;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const ModelConfig& model,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  namespace fs = std::filesystem;
  model.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (config.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

  const auto prepared = prepare(train_set, model, config.edit_enabled, config.edit);
  for (const auto& p : prepared) {
    if (model.tcn.enabled && !p.global) throw std::invalid_argument("train: TCN enabled but a sample lacks global features");
  }

  TrainResult result;
  nn::ParamStore<float> params = init_params<float>(model, config.seed);
  std::int64_t step = 0;
  int start_epoch = 0;
  result.best_metric = std::numeric_limits<double>::quiet_NaN();

  const bool persist = !config.checkpoint_dir.empty();
  const std::string last_path = persist ? (fs::path(config.checkpoint_dir) / "last.ckpt.json").string() : "";
  const std::string best_path = persist ? (fs::path(config.checkpoint_dir) / "best.ckpt.json").string() : "";
  const std::string log_path = persist ? (fs::path(config.checkpoint_dir) / "metrics.jsonl").string() : "";
  if (persist) fs::create_directories(config.checkpoint_dir);

  if (config.resume && persist && fs::exists(last_path)) {
    Checkpoint ck = load_checkpoint(last_path);
    if (!ck.with_optimizer_state) throw std::invalid_argument("train: last checkpoint has no optimizer state");
    params = std::move(ck.params);
    step = ck.step;
    start_epoch = ck.epochs_done;
    result.best_epoch = ck.best_epoch;
    result.best_metric = ck.best_metric;
    result.best = fs::exists(best_path) ? load_checkpoint(best_path).params : params;
  } else {
    result.best = params;
    if (persist) write_file_atomic(log_path, "");
  }

  auto emit = [&](const EpochRecord& rec) {
    result.log.push_back(rec);
    if (persist) {
      json line{{"epoch", rec.epoch}, {"split", rec.split}, {"loss", rec.loss},
                {"metric", std::isnan(rec.metric) ? json(nullptr) : json(rec.metric)}};
      std::ofstream(log_path, std::ios::app) << line.dump() << '\n';
    }
    if (on_epoch) on_epoch(rec);
  };

  const nn::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
  const TaskKind task = model.head.task;
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = make_rng({config.seed, static_cast<std::uint64_t>(epoch), 0x5eedULL});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int in_batch = 0;
    std::vector<nn::Matrix<float>> outputs(train_set.size());
    params.zero_grad();
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t idx = order[k];
      const auto& p = prepared[idx];
      auto rng = make_rng({config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)});
      const bool use_edit = config.edit_enabled && draw_edit(config.edit, rng);
      nn::Tape<float> tape(true);
      const nn::Var logits = frame_logits(tape, params, model, use_edit ? p.edited : p.raw, p.global, rng);
      const nn::Var loss = task_loss(tape, logits, p.targets, task);
      tape.backward(loss);
      loss_sum += tape.value(loss).data[0];
      outputs[idx] = task_rows(tape.value(logits), task);
      if (++in_batch == config.batch_size || k + 1 == order.size()) {
        params.scale_grad(1.0f / static_cast<float>(in_batch));
        params.clip_grad_norm(config.clip_norm);
        nn::adam_step(params, adam, ++step);
        in_batch = 0;
      }
    }
    const double train_metric = task_metric(task, outputs, train_set, model.head.num_outputs);
    emit({epoch, "train", loss_sum / static_cast<double>(train_set.size()), train_metric});

    double selection = train_metric;
    if (!val_set.empty()) {
      const auto ev = evaluate(params, model, val_set, config.edit_enabled, config.edit);
      emit({epoch, "val", ev.loss, ev.metric});
      selection = ev.metric;
    }
    if (result.best_epoch < 0 || better(selection, result.best_metric)) {
      result.best = params;
      result.best_epoch = epoch;
      result.best_metric = selection;
      if (persist) {
        Checkpoint ck{model, params, config.run_config, epoch + 1, step, epoch, selection, false};
        save_checkpoint(ck, best_path);
      }
    }
    if (persist) {
      Checkpoint ck{model, params, config.run_config, epoch + 1, step, result.best_epoch, result.best_metric, true};
      save_checkpoint(ck, last_path);
    }
  }
  result.last = std::move(params);
  return result;
}

json model_config_to_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"num_relations", c.num_relations},
          {"gnn",
           {{"num_layers", c.gnn.num_layers},
            {"hidden", c.gnn.hidden},
            {"relation_dim", c.gnn.relation_dim},
            {"dropout", c.gnn.dropout},
            {"residual", c.gnn.residual}}},
          {"tcn",
           {{"enabled", c.tcn.enabled},
            {"input_dim", c.tcn.input_dim},
            {"channels", c.tcn.channels},
            {"kernel_size", c.tcn.kernel_size},
            {"levels", c.tcn.levels},
            {"causal", c.tcn.causal}}},
          {"head", {{"task", to_string(c.head.task)}, {"num_outputs", c.head.num_outputs}}}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.num_relations = j.at("num_relations").get<int>();
  const auto& g = j.at("gnn");
  c.gnn.num_layers = g.at("num_layers").get<int>();
  c.gnn.hidden = g.at("hidden").get<int>();
  c.gnn.relation_dim = g.at("relation_dim").get<int>();
  c.gnn.dropout = g.at("dropout").get<double>();
  c.gnn.residual = g.at("residual").get<bool>();
  const auto& t = j.at("tcn");
  c.tcn.enabled = t.at("enabled").get<bool>();
  c.tcn.input_dim = t.at("input_dim").get<int>();
  c.tcn.channels = t.at("channels").get<int>();
  c.tcn.kernel_size = t.at("kernel_size").get<int>();
  c.tcn.levels = t.at("levels").get<int>();
  c.tcn.causal = t.at("causal").get<bool>();
  const auto& h = j.at("head");
  c.head.task = parse_task(h.at("task").get<std::string>());
  c.head.num_outputs = h.at("num_outputs").get<int>();
  return c;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json tensors = json::array();
  for (const auto& [name, p] : ck.params.entries()) {
    json t{{"name", name}, {"rows", p.value.rows}, {"cols", p.value.cols}, {"values", p.value.data}};
    if (ck.with_optimizer_state) {
      t["adam_m"] = p.m.data;
      t["adam_v"] = p.v.data;
    }
    tensors.push_back(std::move(t));
  }
  json doc{{"version", kCheckpointVersion},
           {"model", model_config_to_json(ck.model)},
           {"config", ck.run_config},
           {"training",
            {{"epochs_done", ck.epochs_done},
             {"step", ck.step},
             {"best_epoch", ck.best_epoch},
             {"best_metric", std::isnan(ck.best_metric) ? json(nullptr) : json(ck.best_metric)},
             {"optimizer_state", ck.with_optimizer_state}}},
           {"tensors", std::move(tensors)}};
  write_file_atomic(path, doc.dump() + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": truncated or malformed checkpoint: " + e.what());
  }
  try {
    const int version = doc.value("version", 0);
    if (version != kCheckpointVersion) {
      throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.model = model_config_from_json(doc.at("model"));
    ck.run_config = doc.value("config", json::object());
    const auto& tr = doc.at("training");
    ck.epochs_done = tr.at("epochs_done").get<int>();
    ck.step = tr.at("step").get<std::int64_t>();
    ck.best_epoch = tr.at("best_epoch").get<int>();
    ck.best_metric = tr.at("best_metric").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                    : tr.at("best_metric").get<double>();
    ck.with_optimizer_state = tr.at("optimizer_state").get<bool>();
    for (const auto& t : doc.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      auto& p = ck.params.add(name, t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>());
      auto fill = [&](const char* key, nn::Matrix<float>& m) {
        const auto values = t.at(key).get<std::vector<float>>();
        if (values.size() != m.size()) throw FormatError(path + ": tensor '" + name + "' has wrong value count");
        m.data = values;
      };
      fill("values", p.value);
      if (ck.with_optimizer_state) {
        fill("adam_m", p.m);
        fill("adam_v", p.v);
      }
    }
    check_params(ck.model, ck.params);
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(path + ": malformed checkpoint: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace stg
