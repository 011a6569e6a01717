#include <filesystem>

#include "doctest.h"
#include "stg/dataset.hpp"
#include "stg/graph_io.hpp"
#include "stg/train.hpp"

using namespace stg;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir = fs::temp_directory_path() / "stg_train_test";
  Manifest manifest;
  std::vector<Sample> train_set, val_set;
  ModelConfig model;

  explicit Fixture(LabelRule rule = LabelRule::kClipCovisibility) {
    fs::remove_all(dir);
    WorldConfig w;
    w.label_rule = rule;
    w.length = rule == LabelRule::kClipCovisibility ? 6 : 16;
    w.tracks = 5;
    w.mean_gap = 2;
    w.occlusion_rate = 0.3;
    w.duplicate_rate = 0.2;
    manifest = read_manifest(generate_dataset(w, {8, 4, 0}, 1, (dir / "ds").string()));
    train_set = load_samples(manifest, {}, {"train"});
    val_set = load_samples(manifest, {}, {"val"});
    model.feature_dim = manifest.metadata.feature_dim;
    model.num_relations = manifest.metadata.num_relations();
    model.gnn.num_layers = 2;
    model.gnn.hidden = 8;
    model.tcn.enabled = true;
    model.tcn.input_dim = manifest.global_feature_dim;
    model.tcn.channels = 4;
    model.tcn.levels = 2;
    model.head.task = manifest.task;
    model.head.num_outputs = manifest.num_outputs;
  }
  ~Fixture() { fs::remove_all(dir); }

  TrainConfig config(int epochs) const {
    TrainConfig c;
    c.epochs = epochs;
    c.lr = 1e-2;
    c.batch_size = 3;
    c.edit = EditConfig::anatomy_defaults(manifest.metadata, 0.5);
    c.seed = 11;
    return c;
  }
};

std::vector<double> losses(const TrainResult& r) {
  std::vector<double> out;
  for (const auto& e : r.log) out.push_back(e.loss);
  return out;
}

}  // namespace

TEST_CASE("training is deterministic and learns") {
  Fixture f;
  const auto a = train(f.train_set, f.val_set, f.model, f.config(6));
  const auto b = train(f.train_set, f.val_set, f.model, f.config(6));
  CHECK(losses(a) == losses(b));
  REQUIRE(a.log.size() == 12);
  CHECK(a.log.back().split == "val");
  CHECK(a.log[10].loss < a.log[0].loss);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Fixture f;
  auto c = f.config(3);
  c.lr = 0.0;
  const auto r = train(f.train_set, {}, f.model, c);
  const auto init = init_params<float>(f.model, c.seed);
  for (const auto& [name, p] : init.entries()) CHECK(r.last.at(name).value == p.value);
}

TEST_CASE("video task trains with per-frame cross entropy") {
  Fixture f(LabelRule::kPhaseSchedule);
  auto c = f.config(2);
  c.batch_size = 1;
  const auto r = train(f.train_set, f.val_set, f.model, c);
  CHECK(r.log.size() == 4);
  const auto ev = evaluate(const_cast<nn::ParamStore<float>&>(r.best), f.model, f.val_set, false, c.edit);
  CHECK(ev.outputs[0].rows == 16);
  CHECK(ev.metric >= 0.0);
  CHECK(ev.metric <= 1.0);
}

TEST_CASE("checkpoints round-trip and resume deterministically") {
  Fixture f;
  auto c = f.config(6);
  c.checkpoint_dir = (f.dir / "full").string();
  const auto full = train(f.train_set, f.val_set, f.model, c);

  auto first = f.config(3);
  first.checkpoint_dir = (f.dir / "resumed").string();
  train(f.train_set, f.val_set, f.model, first);
  auto rest = f.config(6);
  rest.checkpoint_dir = first.checkpoint_dir;
  rest.resume = true;
  const auto resumed = train(f.train_set, f.val_set, f.model, rest);
  const auto tail = losses(full);
  CHECK(losses(resumed) == std::vector<double>(tail.begin() + 6, tail.end()));
  for (const auto& [name, p] : full.last.entries()) CHECK(resumed.last.at(name).value == p.value);
  CHECK(read_file(c.checkpoint_dir + "/metrics.jsonl") == read_file(first.checkpoint_dir + "/metrics.jsonl"));

  const auto ck = load_checkpoint(c.checkpoint_dir + "/last.ckpt.json");
  for (const auto& [name, p] : full.last.entries()) {
    CHECK(ck.params.at(name).value == p.value);
    CHECK(ck.params.at(name).m == p.m);
  }
  save_checkpoint(ck, (f.dir / "copy.json").string());
  CHECK(read_file((f.dir / "copy.json").string()) == read_file(c.checkpoint_dir + "/last.ckpt.json"));

  SUBCASE("truncated and mismatched checkpoints are rejected") {
    const auto text = read_file(c.checkpoint_dir + "/last.ckpt.json");
    write_file_atomic((f.dir / "trunc.json").string(), text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_checkpoint((f.dir / "trunc.json").string()), FormatError);
    auto bad = nlohmann::json::parse(text);
    bad["model"]["gnn"]["num_layers"] = 3;
    write_file_atomic((f.dir / "bad.json").string(), bad.dump());
    CHECK_THROWS_AS(load_checkpoint((f.dir / "bad.json").string()), FormatError);
  }
}
