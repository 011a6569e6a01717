// stg: build, edit, train and evaluate spatiotemporal video graphs.
//
// Exit status: 0 ok, 2 usage error, 3 malformed or invalid input, 4 runtime
// failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stg/dataset.hpp"
#include "stg/decoder.hpp"
#include "stg/edit.hpp"
#include "stg/graph_io.hpp"
#include "stg/metrics.hpp"
#include "stg/synth.hpp"
#include "stg/temporal.hpp"
#include "stg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitRuntime = 4;
constexpr int kPredictionsVersion = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Resolved option values of a subcommand (and the global ones), in option
// declaration order. Embedded in every artifact.
json echo_config(const CLI::App& app, const CLI::App& sub) {
  json out = json::object();
  auto collect = [&](const CLI::App& a, json& dst) {
    for (const CLI::Option* opt : a.get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      const auto& results = opt->reduced_results();
      if (!results.empty()) {
        dst[name] = results.size() == 1 ? json(results.front()) : json(results);
      } else if (!opt->get_default_str().empty()) {
        dst[name] = opt->get_default_str();
      }
    }
  };
  collect(app, out);
  out["command"] = sub.get_name();
  collect(sub, out);
  return out;
}

std::string dump_video_graph(const stg::VideoGraph& g, const json& config) {
  std::ostringstream os;
  stg::write_video_graph(g, os, config);
  return os.str();
}

bool on_off(const std::string& v) { return v == "on"; }

stg::HorizonMode horizon_mode(const std::string& s) {
  try {
    return stg::parse_horizon_mode(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// Stem of a path without all extensions: "a/s00001.graph.json" -> "s00001".
std::string base_id(const std::string& path) {
  std::string name = fs::path(path).filename().string();
  return name.substr(0, name.find('.'));
}

// ---------------------------------------------------------------- synth
struct SynthArgs {
  std::string out;
  std::string task = "clip";
  int train = 200, val = 0, test = 50;
  int length = 0;
  int tracks = 0;
  double duplicate_rate = 0.0;
  double occlusion_rate = 0.0;
  double mean_gap = 0.0;
  int max_gap = 8;
  double feature_noise = 0.05;
};

void cmd_synth(const SynthArgs& a, std::uint64_t seed, const json& echo) {
  stg::WorldConfig w;
  const auto task = stg::parse_task(a.task);
  w.label_rule = task == stg::TaskKind::kClipMultilabel ? stg::LabelRule::kClipCovisibility
                                                         : stg::LabelRule::kPhaseSchedule;
  w.length = a.length > 0 ? a.length : (task == stg::TaskKind::kClipMultilabel ? 10 : 64);
  if (a.tracks > 0) w.tracks = a.tracks;
  w.duplicate_rate = a.duplicate_rate;
  w.occlusion_rate = a.occlusion_rate;
  w.mean_gap = a.mean_gap;
  w.max_gap = a.max_gap;
  w.feature_noise = a.feature_noise;
  w.seed = seed;
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::string path = stg::generate_dataset(w, {a.train, a.val, a.test}, seed, a.out);
  auto manifest = stg::read_manifest(path);
  manifest.generator["config"] = echo;
  stg::write_manifest(manifest, path);
  std::cout << path << '\n';
}

// ---------------------------------------------------------------- build
struct BuildArgs {
  std::string manifest;
  std::string frames;
  std::string out;
  std::string mode = "exponential";
  int exponent = 3;
};

void cmd_build(const BuildArgs& a, const json& echo) {
  const stg::AssemblyConfig asm_cfg{horizon_mode(a.mode), a.exponent};
  if (!a.frames.empty()) {
    const auto frames = stg::read_frame_graphs_file(a.frames);
    const int T = std::max<int>(1, static_cast<int>(frames.size()));
    stg::GraphMetadata meta;
    for (const auto& f : frames) {
      for (const auto& n : f.nodes) meta.num_object_classes = std::max(meta.num_object_classes, n.class_id + 1);
      for (const auto& e : f.spatial_edges) {
        meta.num_spatial_relations = std::max(meta.num_spatial_relations, e.relation_id + 1);
      }
    }
    meta.num_anatomy_classes = meta.num_object_classes;
    const auto g = stg::assemble_video_graph(frames, stg::make_schedule(asm_cfg.mode, asm_cfg.exponent, T), meta);
    stg::write_file_atomic(a.out, dump_video_graph(g, echo));
    std::cout << a.out << ": " << g.num_nodes() << " nodes, " << g.temporal_edges.size() << " temporal edges\n";
    return;
  }
  auto manifest = stg::read_manifest(a.manifest);
  const auto samples = stg::load_samples(manifest, asm_cfg);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string rel = "graphs/" + samples[i].id + ".graph.json";
    stg::write_file_atomic((fs::path(a.out) / rel).string(), dump_video_graph(samples[i].graph, echo));
    manifest.samples[i].graph_path = rel;
    manifest.samples[i].frames_path.clear();
  }
  manifest.generator["build"] = echo;
  const std::string path = (fs::path(a.out) / "manifest.json").string();
  stg::write_manifest(manifest, path);
  std::cout << path << '\n';
}

// ---------------------------------------------------------------- edit
struct EditArgs {
  std::string manifest;
  std::string graph;
  std::string out;
  std::vector<int> classes;
  double p_edit = 1.0;
};

stg::EditConfig edit_config(const stg::GraphMetadata& meta, const std::vector<int>& classes, double p) {
  auto c = stg::EditConfig::anatomy_defaults(meta, p);
  if (!classes.empty()) c.editable_classes = std::set<int>(classes.begin(), classes.end());
  return c;
}

void cmd_edit(const EditArgs& a, const json& echo) {
  if (!a.graph.empty()) {
    const auto g = stg::read_video_graph_file(a.graph);
    const auto edited = stg::edit_graph(g, edit_config(g.metadata, a.classes, a.p_edit));
    stg::write_file_atomic(a.out, dump_video_graph(edited, echo));
    std::cout << a.out << ": " << g.num_nodes() - edited.num_nodes() << " nodes removed\n";
    return;
  }
  auto manifest = stg::read_manifest(a.manifest);
  const auto samples = stg::load_samples(manifest, {});
  const auto cfg = edit_config(manifest.metadata, a.classes, a.p_edit);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string rel = "graphs/" + samples[i].id + ".graph.json";
    stg::write_file_atomic((fs::path(a.out) / rel).string(),
                           dump_video_graph(stg::edit_graph(samples[i].graph, cfg), echo));
    manifest.samples[i].graph_path = rel;
    manifest.samples[i].frames_path.clear();
  }
  manifest.generator["edit"] = echo;
  const std::string path = (fs::path(a.out) / "manifest.json").string();
  stg::write_manifest(manifest, path);
  std::cout << path << '\n';
}

// ---------------------------------------------------------------- train
struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string task;
  std::string mode = "exponential";
  int exponent = 3;
  int epochs = 10;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> gnn_layers;
  std::optional<double> dropout;
  int hidden = 32;
  int relation_dim = 8;
  std::string tcn = "off";
  int tcn_channels = 32;
  int tcn_levels = 4;
  std::string edit = "on";
  double p_edit = 0.5;
  double clip_norm = 5.0;
  bool resume = false;
  bool quiet = false;
};

stg::ModelConfig model_config(const TrainArgs& a, const stg::Manifest& m) {
  const bool clip = m.task == stg::TaskKind::kClipMultilabel;
  stg::ModelConfig c;
  c.feature_dim = m.metadata.feature_dim;
  c.num_relations = m.metadata.num_relations();
  c.gnn.num_layers = a.gnn_layers.value_or(clip ? 5 : 8);
  c.gnn.hidden = a.hidden;
  c.gnn.relation_dim = a.relation_dim;
  c.gnn.dropout = a.dropout.value_or(clip ? 0.25 : 0.0);
  c.tcn.enabled = on_off(a.tcn);
  c.tcn.input_dim = m.global_feature_dim;
  c.tcn.channels = a.tcn_channels;
  c.tcn.levels = a.tcn_levels;
  c.head.task = m.task;
  c.head.num_outputs = m.num_outputs;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

void cmd_train(const TrainArgs& a, std::uint64_t seed, const json& echo) {
  const auto manifest = stg::read_manifest(a.manifest);
  if (!a.task.empty() && stg::parse_task(a.task) != manifest.task) {
    throw UsageError("--task " + a.task + " does not match the manifest task " + stg::to_string(manifest.task));
  }
  const bool clip = manifest.task == stg::TaskKind::kClipMultilabel;
  const auto model = model_config(a, manifest);
  const stg::AssemblyConfig asm_cfg{horizon_mode(a.mode), a.exponent};
  const auto train_set = stg::load_samples(manifest, asm_cfg, {"train"});
  const auto val_set = stg::load_samples(manifest, asm_cfg, {"val"});
  if (train_set.empty()) throw UsageError(a.manifest + ": no samples in split 'train'");

  stg::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr.value_or(clip ? 3e-4 : 1e-3);
  cfg.batch_size = a.batch_size.value_or(clip ? 128 : 1);
  cfg.clip_norm = a.clip_norm;
  cfg.edit_enabled = on_off(a.edit);
  cfg.edit = stg::EditConfig::anatomy_defaults(manifest.metadata, a.p_edit);
  cfg.seed = seed;
  cfg.checkpoint_dir = a.out;
  cfg.resume = a.resume;
  cfg.run_config = echo;
  const auto result = stg::train(train_set, val_set, model, cfg, [&](const stg::EpochRecord& r) {
    if (!a.quiet) {
      std::cerr << "epoch " << r.epoch << ' ' << r.split << " loss " << r.loss << " metric " << r.metric << '\n';
    }
  });
  std::cout << (fs::path(a.out) / "best.ckpt.json").string() << " (epoch " << result.best_epoch << ", metric "
            << result.best_metric << ")\n";
}

// ---------------------------------------------------------------- predict
struct PredictArgs {
  std::string checkpoint;
  std::string manifest;
  std::vector<std::string> graphs;
  std::string split = "test";
  std::string edit = "off";
  std::string mode = "exponential";
  int exponent = 3;
  std::string out;
};

void cmd_predict(const PredictArgs& a, const json& echo) {
  auto ck = stg::load_checkpoint(a.checkpoint);
  std::vector<stg::Sample> samples;
  if (!a.manifest.empty()) {
    const auto manifest = stg::read_manifest(a.manifest);
    samples = stg::load_samples(manifest, {horizon_mode(a.mode), a.exponent},
                                a.split == "all" ? std::vector<std::string>{} : std::vector<std::string>{a.split});
  }
  for (const auto& path : a.graphs) {
    stg::Sample s;
    s.id = base_id(path);
    s.graph = stg::read_video_graph_file(path);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw UsageError("predict: no input samples");
  const auto edit_cfg = stg::EditConfig::anatomy_defaults(samples.front().graph.metadata, 1.0);
  json preds = json::array();
  for (const auto& s : samples) {
    if (s.graph.metadata.feature_dim != ck.model.feature_dim) {
      throw stg::FormatError("sample '" + s.id + "': feature_dim " + std::to_string(s.graph.metadata.feature_dim) +
                             " does not match the checkpoint (" + std::to_string(ck.model.feature_dim) + ")");
    }
    if (ck.model.tcn.enabled && !s.global_features) {
      throw stg::FormatError("sample '" + s.id + "': model uses the TCN branch but the sample has no global features");
    }
    const auto g = on_off(a.edit) ? stg::edit_graph(s.graph, edit_cfg) : s.graph;
    const auto logits = stg::predict_logits(ck.params, ck.model, g, s.global_features ? &*s.global_features : nullptr);
    json rows = json::array();
    for (std::size_t r = 0; r < logits.rows; ++r) {
      rows.push_back(std::vector<float>(logits.row(r).begin(), logits.row(r).end()));
    }
    preds.push_back({{"id", s.id}, {"logits", std::move(rows)}});
  }
  const json doc{{"version", kPredictionsVersion},
                 {"task", stg::to_string(ck.model.head.task)},
                 {"num_outputs", ck.model.head.num_outputs},
                 {"config", echo},
                 {"predictions", std::move(preds)}};
  stg::write_file_atomic(a.out, doc.dump(1) + "\n");
  std::cout << a.out << ": " << doc["predictions"].size() << " predictions\n";
}

// ---------------------------------------------------------------- eval
struct EvalArgs {
  std::string predictions;
  std::string manifest;
  std::string out;
};

void cmd_eval(const EvalArgs& a, const json& echo) {
  json doc;
  try {
    doc = json::parse(stg::read_file(a.predictions));
  } catch (const json::parse_error& e) {
    throw stg::FormatError(a.predictions + ": malformed predictions: " + e.what());
  }
  if (doc.value("version", 0) != kPredictionsVersion) {
    throw stg::FormatError(a.predictions + ": unsupported predictions version");
  }
  const auto manifest = stg::read_manifest(a.manifest);
  const auto task = stg::parse_task(doc.at("task").get<std::string>());
  if (task != manifest.task) throw stg::FormatError(a.predictions + ": task does not match the manifest");
  const int K = doc.at("num_outputs").get<int>();
  std::map<std::string, const stg::ManifestEntry*> by_id;
  for (const auto& e : manifest.samples) by_id[e.id] = &e;

  const auto& preds = doc.at("predictions");
  json report{{"task", stg::to_string(task)}, {"num_samples", preds.size()}, {"config", echo}};
  auto entry_for = [&](const json& p) -> const stg::ManifestEntry& {
    const auto id = p.at("id").get<std::string>();
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw stg::FormatError(a.predictions + ": prediction id '" + id + "' not in manifest");
    return *it->second;
  };
  auto null_if_nan = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };

  if (task == stg::TaskKind::kClipMultilabel) {
    stg::nn::Matrix<double> scores(preds.size(), static_cast<std::size_t>(K));
    stg::nn::Matrix<int> targets(preds.size(), static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto& e = entry_for(preds[i]);
      const auto rows = preds[i].at("logits").get<std::vector<std::vector<double>>>();
      if (rows.empty() || rows.back().size() != static_cast<std::size_t>(K)) {
        throw stg::FormatError(a.predictions + ": prediction '" + e.id + "' has the wrong width");
      }
      const std::size_t T = e.labels.frames.empty() ? 1 : e.labels.frames.size();
      const auto ft = stg::propagate_labels(e.labels, T, task, K);
      for (int k = 0; k < K; ++k) {
        scores(i, static_cast<std::size_t>(k)) = rows.back()[static_cast<std::size_t>(k)];
        targets(i, static_cast<std::size_t>(k)) = static_cast<int>(ft.multilabel(T - 1, static_cast<std::size_t>(k)));
      }
    }
    const auto r = stg::map_over_criteria(scores, targets);
    json per = json::array();
    for (double v : r.per_criterion) per.push_back(null_if_nan(v));
    report["metric_name"] = "mAP";
    report["metric"] = r.map;
    report["per_criterion_ap"] = std::move(per);
    report["excluded_criteria"] = r.excluded_columns;
  } else {
    std::vector<std::vector<int>> pred, truth;
    for (const auto& p : preds) {
      const auto& e = entry_for(p);
      const auto rows = p.at("logits").get<std::vector<std::vector<double>>>();
      std::vector<int> cls;
      for (const auto& row : rows) {
        if (row.size() != static_cast<std::size_t>(K)) {
          throw stg::FormatError(a.predictions + ": prediction '" + e.id + "' has the wrong width");
        }
        cls.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
      }
      auto ft = stg::propagate_labels(e.labels, rows.size(), task, K);
      pred.push_back(std::move(cls));
      truth.push_back(std::move(ft.classes));
    }
    const auto r = stg::video_macro_f1(pred, truth);
    report["metric_name"] = "mean_video_macro_f1";
    report["metric"] = r.mean_f1;
    report["per_video_f1"] = r.per_video;
    json per = json::array();
    for (double v : r.per_class) per.push_back(null_if_nan(v));
    report["per_class_f1"] = std::move(per);
  }
  stg::write_file_atomic(a.out, report.dump(1) + "\n");
  std::cout << report["metric_name"].get<std::string>() << ' ' << report["metric"].get<double>() << '\n';
}

// ---------------------------------------------------------------- inspect
struct InspectArgs {
  std::string graph;
  std::string out;
  std::string stats;
};

void cmd_inspect(const InspectArgs& a, const json& echo) {
  const auto g = stg::read_video_graph_file(a.graph);
  std::map<int, std::size_t> spatial, temporal, degree_hist;
  stg::NodeIndexer index(g.frames);
  std::vector<int> degree(g.num_nodes(), 0);
  for (std::size_t t = 0; t < g.frames.size(); ++t) {
    for (const auto& e : g.frames[t].spatial_edges) {
      ++spatial[e.relation_id];
      ++degree[index.flat({g.frames[t].frame_index, e.src})];
      ++degree[index.flat({g.frames[t].frame_index, e.dst})];
    }
  }
  for (const auto& e : g.temporal_edges) {
    ++temporal[e.relation_id];
    ++degree[index.flat(e.src)];
    ++degree[index.flat(e.dst)];
  }
  for (int d : degree) ++degree_hist[d];

  json stats{{"frames", g.frames.size()},
             {"nodes", g.num_nodes()},
             {"spatial_edges", g.num_spatial_edges()},
             {"temporal_edges", g.temporal_edges.size()},
             {"horizons", g.metadata.horizons},
             {"config", echo}};
  auto as_obj = [](const std::map<int, std::size_t>& m) {
    json o = json::object();
    for (const auto& [k, v] : m) o[std::to_string(k)] = v;
    return o;
  };
  stats["edges_per_relation"] = {{"spatial", as_obj(spatial)}, {"temporal", as_obj(temporal)}};
  stats["degree_histogram"] = as_obj(degree_hist);

  if (!a.out.empty()) stg::write_file_atomic(a.out, stg::export_dot(g));
  if (!a.stats.empty()) stg::write_file_atomic(a.stats, stats.dump(1) + "\n");

  std::cout << "frames " << g.frames.size() << "\nnodes " << g.num_nodes() << "\nspatial_edges "
            << g.num_spatial_edges() << "\ntemporal_edges " << g.temporal_edges.size() << '\n';
  for (const auto& [r, n] : spatial) std::cout << "relation " << r << " spatial " << n << '\n';
  for (const auto& [r, n] : temporal) std::cout << "relation " << r << " temporal " << n << '\n';
  for (const auto& [d, n] : degree_hist) std::cout << "degree " << d << ' ' << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal video graph toolkit"};
  app.set_config("--config", "", "TOML/INI file; subcommand keys go in a [<subcommand>] section");
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every stochastic step")->capture_default_str();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
  synth->add_option("--out", sy.out, "Output directory")->required();
  synth->add_option("--task", sy.task, "clip|video")->check(CLI::IsMember({"clip", "video"}))->capture_default_str();
  synth->add_option("--train", sy.train)->capture_default_str();
  synth->add_option("--val", sy.val)->capture_default_str();
  synth->add_option("--test", sy.test)->capture_default_str();
  synth->add_option("--length", sy.length, "Frames per sequence (0: 10 for clip, 64 for video)")->capture_default_str();
  synth->add_option("--tracks", sy.tracks, "Object tracks per sequence (0: generator default)")->capture_default_str();
  synth->add_option("--duplicate-rate", sy.duplicate_rate)->capture_default_str();
  synth->add_option("--occlusion-rate", sy.occlusion_rate)->capture_default_str();
  synth->add_option("--mean-gap", sy.mean_gap)->capture_default_str();
  synth->add_option("--max-gap", sy.max_gap)->capture_default_str();
  synth->add_option("--feature-noise", sy.feature_noise)->capture_default_str();

  const std::vector<std::string> modes{"exponential", "dense", "adjacent"};
  BuildArgs bu;
  auto* build = app.add_subcommand("build", "Assemble frame graphs into video graphs");
  auto* bm = build->add_option("--manifest", bu.manifest, "Manifest to build every sample of");
  auto* bf = build->add_option("--frames", bu.frames, "Single frame-graph JSON-lines file");
  bm->excludes(bf);
  build->add_option("--out", bu.out, "Output directory (manifest) or file (--frames)")->required();
  build->add_option("--horizon-mode", bu.mode)->check(CLI::IsMember(modes))->capture_default_str();
  build->add_option("--l", bu.exponent, "Exponential schedule exponent")->check(CLI::NonNegativeNumber)->capture_default_str();

  EditArgs ed;
  auto* edit = app.add_subcommand("edit", "Apply the graph editing module");
  auto* em = edit->add_option("--manifest", ed.manifest);
  auto* eg = edit->add_option("--graph", ed.graph, "Single video graph file");
  em->excludes(eg);
  edit->add_option("--out", ed.out)->required();
  edit->add_option("--classes", ed.classes, "Editable class ids (default: all anatomy classes)");
  edit->add_option("--p-edit", ed.p_edit, "Recorded with the edit config; the edit itself is always applied")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train the decoder");
  trn->add_option("--manifest", tr.manifest)->required();
  trn->add_option("--out", tr.out, "Checkpoint directory")->required();
  trn->add_option("--task", tr.task, "Must match the manifest")->check(CLI::IsMember({"clip", "video"}));
  trn->add_option("--horizon-mode", tr.mode)->check(CLI::IsMember(modes))->capture_default_str();
  trn->add_option("--l", tr.exponent)->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--epochs", tr.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--lr", tr.lr, "Default 3e-4 (clip) or 1e-3 (video)");
  trn->add_option("--batch-size", tr.batch_size, "Default 128 (clip) or 1 (video)")->check(CLI::PositiveNumber);
  trn->add_option("--gnn-layers", tr.gnn_layers, "Default 5 (clip) or 8 (video)")->check(CLI::PositiveNumber);
  trn->add_option("--dropout", tr.dropout, "Default 0.25 (clip) or 0 (video)")->check(CLI::Range(0.0, 0.99));
  trn->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--relation-dim", tr.relation_dim)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--tcn", tr.tcn)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  trn->add_option("--tcn-channels", tr.tcn_channels)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--tcn-levels", tr.tcn_levels)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--edit", tr.edit)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  trn->add_option("--p-edit", tr.p_edit)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  trn->add_option("--clip-norm", tr.clip_norm)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_flag("--resume", tr.resume, "Continue from <out>/last.ckpt.json");
  trn->add_flag("--quiet", tr.quiet);

  PredictArgs pr;
  auto* pred = app.add_subcommand("predict", "Run a checkpoint on video graphs");
  pred->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
  auto* pm = pred->add_option("--manifest", pr.manifest);
  auto* pg = pred->add_option("--graph", pr.graphs, "Video graph files (repeatable)");
  pm->excludes(pg);
  pred->add_option("--split", pr.split, "Manifest split, or 'all'")->capture_default_str();
  pred->add_option("--edit", pr.edit)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  pred->add_option("--horizon-mode", pr.mode)->check(CLI::IsMember(modes))->capture_default_str();
  pred->add_option("--l", pr.exponent)->check(CLI::NonNegativeNumber)->capture_default_str();
  pred->add_option("--out", pr.out)->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score predictions against manifest labels");
  eval->add_option("--predictions", ev.predictions)->required();
  eval->add_option("--manifest", ev.manifest)->required();
  eval->add_option("--out", ev.out, "Report JSON")->required();

  InspectArgs in;
  auto* insp = app.add_subcommand("inspect", "Describe a video graph");
  insp->add_option("graph", in.graph)->required();
  insp->add_option("--out", in.out, "Graphviz DOT output");
  insp->add_option("--stats", in.stats, "Statistics JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (build->parsed() && bu.manifest.empty() && bu.frames.empty()) throw UsageError("build: --manifest or --frames required");
    if (edit->parsed() && ed.manifest.empty() && ed.graph.empty()) throw UsageError("edit: --manifest or --graph required");
    if (pred->parsed() && pr.manifest.empty() && pr.graphs.empty()) throw UsageError("predict: --manifest or --graph required");

    for (CLI::App* sub : app.get_subcommands()) {
      const json echo = echo_config(app, *sub);
      if (sub == synth) cmd_synth(sy, seed, echo);
      if (sub == build) cmd_build(bu, echo);
      if (sub == edit) cmd_edit(ed, echo);
      if (sub == trn) cmd_train(tr, seed, echo);
      if (sub == pred) cmd_predict(pr, echo);
      if (sub == eval) cmd_eval(ev, echo);
      if (sub == insp) cmd_inspect(in, echo);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const stg::FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const stg::ValidationError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
