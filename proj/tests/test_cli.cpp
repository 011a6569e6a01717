#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "stg/graph_io.hpp"
#include "stg/temporal.hpp"

using namespace stg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workdir {
  fs::path dir;
  explicit Workdir(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator/(const std::string& p) const { return (dir / p).string(); }
};

int run(const std::string& args, const Workdir& w) {
  const std::string cmd = std::string(STG_CLI_PATH) + " " + args + " >" + (w / "stdout.txt") + " 2>" +
                          (w / "stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli usage errors") {
  Workdir w("stg_cli_usage");
  CHECK(run("synth --out " + (w / "ds") + " --bogus 1", w) == 2);
  CHECK_FALSE(fs::exists(w / "ds"));
  CHECK(run("", w) == 2);
  CHECK(run("build --horizon-mode cubic --frames x --out y", w) == 2);
  CHECK(run("build --out " + (w / "g.json"), w) == 2);
  CHECK(run("--help", w) == 0);
}

TEST_CASE("cli input errors name the file") {
  Workdir w("stg_cli_input");
  std::ofstream(w / "bad.jsonl") << "{\"frame_index\": 0, \"nodes\": [}\n";
  CHECK(run("build --frames " + (w / "bad.jsonl") + " --out " + (w / "g.json"), w) == 3);
  CHECK_FALSE(fs::exists(w / "g.json"));
  std::ostringstream err;
  err << std::ifstream(w / "stderr.txt").rdbuf();
  CHECK(err.str().find("bad.jsonl") != std::string::npos);
  CHECK(err.str().find("line 1") != std::string::npos);
  CHECK(run("inspect " + (w / "missing.json"), w) == 3);
}

TEST_CASE("cli build on a two-frame file follows the count law") {
  Workdir w("stg_cli_build");
  std::ofstream(w / "f.jsonl")
      << R"({"frame_index":0,"nodes":[{"feature":[1,0],"box":[0,0,0.2,0.2],"class_id":0},{"feature":[0,1],"box":[0.5,0.5,0.7,0.7],"class_id":1},{"feature":[1,1],"box":[0.1,0.6,0.3,0.9],"class_id":1}]})"
      << "\n"
      << R"({"frame_index":1,"nodes":[{"feature":[1,0.1],"box":[0,0,0.25,0.2],"class_id":0},{"feature":[0.1,1],"box":[0.5,0.4,0.7,0.7],"class_id":1}]})"
      << "\n";
  REQUIRE(run("build --frames " + (w / "f.jsonl") + " --l 3 --out " + (w / "g.json"), w) == 0);
  const auto g = read_video_graph_file(w / "g.json");
  CHECK(g.temporal_edges.size() == 4u * (3 + 2));
  CHECK(g.metadata.horizons == std::vector<int>{1});
  const auto doc = json::parse(read_file(w / "g.json"));
  CHECK(doc.at("config").at("command") == "build");
  CHECK(doc.at("config").at("l") == "3");

  const std::string first = read_file(w / "g.json");
  REQUIRE(run("build --frames " + (w / "f.jsonl") + " --l 3 --out " + (w / "g.json"), w) == 0);
  CHECK(read_file(w / "g.json") == first);

  REQUIRE(run("edit --graph " + (w / "g.json") + " --out " + (w / "e.json"), w) == 0);
  const auto e = read_video_graph_file(w / "e.json");
  CHECK(e.frames[0].nodes.size() == 2);

  REQUIRE(run("inspect " + (w / "g.json") + " --out " + (w / "g.dot") + " --stats " + (w / "s.json"), w) == 0);
  const auto stats = json::parse(read_file(w / "s.json"));
  CHECK(stats.at("temporal_edges") == 20);
  CHECK(stats.at("edges_per_relation").at("temporal").at("0") == 10);
  CHECK(read_file(w / "g.dot").rfind("digraph", 0) == 0);
}

TEST_CASE("cli eval of predictions equal to labels") {
  Workdir w("stg_cli_eval");
  REQUIRE(run("--seed 4 synth --out " + (w / "ds") + " --train 4 --val 0 --test 6 --mean-gap 3 --occlusion-rate 0.3", w) == 0);
  const auto manifest = json::parse(read_file(w / "ds/manifest.json"));
  json preds = json::array();
  for (const auto& s : manifest.at("samples")) {
    json row = json::array();
    for (int v : s.at("labels").at("clip")) row.push_back(static_cast<double>(v));
    preds.push_back({{"id", s.at("id")}, {"logits", json::array({row})}});
  }
  const json doc{{"version", 1}, {"task", "clip"}, {"num_outputs", 3}, {"predictions", preds}};
  write_file_atomic(w / "p.json", doc.dump());
  REQUIRE(run("eval --predictions " + (w / "p.json") + " --manifest " + (w / "ds/manifest.json") + " --out " +
                  (w / "r.json"),
              w) == 0);
  CHECK(json::parse(read_file(w / "r.json")).at("metric") == 1.0);
}
