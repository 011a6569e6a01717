#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "stg/graph_io.hpp"
#include "stg/temporal.hpp"

using namespace stg;

namespace {

std::string to_jsonl(const std::vector<FrameGraph>& frames) {
  std::ostringstream os;
  write_frame_graphs(frames, os);
  return os.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("frame-graph ingestion") {
  const auto meta = testing::small_metadata();
  std::mt19937_64 rng(5);
  std::vector<FrameGraph> frames{testing::random_frame(0, 3, meta, rng), testing::random_frame(1, 2, meta, rng)};

  SUBCASE("two frames with 3 and 2 nodes") {
    std::istringstream in(to_jsonl(frames));
    const auto got = read_frame_graphs(in);
    REQUIRE(got.size() == 2);
    CHECK(got[0].nodes.size() == 3);
    CHECK(got[1].nodes.size() == 2);
    CHECK(got == frames);
  }
  SUBCASE("empty input") {
    std::istringstream in("");
    CHECK(read_frame_graphs(in).empty());
  }
  SUBCASE("blank lines are skipped") {
    std::istringstream in("\n" + to_jsonl(frames) + "\n\n");
    CHECK(read_frame_graphs(in) == frames);
  }
  SUBCASE("dimension mismatch names the frame and line") {
    auto bad = frames;
    bad[1].nodes[0].feature.pop_back();
    std::istringstream in(to_jsonl(bad));
    FrameReadOptions opt;
    opt.feature_dim = meta.feature_dim;
    try {
      read_frame_graphs(in, opt);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      const std::string what = e.what();
      CHECK(e.line() == 2);
      CHECK(what.find("frame 1") != std::string::npos);
    }
  }
  SUBCASE("non-increasing frame index") {
    auto bad = frames;
    bad[1].frame_index = 0;
    std::istringstream in(to_jsonl(bad));
    CHECK_THROWS_AS(read_frame_graphs(in), FormatError);
  }
  SUBCASE("malformed json") {
    std::istringstream in("{\"frame_index\": 0, \"nodes\": [\n");
    CHECK_THROWS_AS(read_frame_graphs(in), FormatError);
  }
  SUBCASE("pixel boxes are normalized") {
    std::istringstream in(R"({"frame_index":0,"nodes":[{"feature":[1,2],"box":[10,20,30,40],"class_id":0}]})");
    FrameReadOptions opt;
    opt.image_width = 100;
    opt.image_height = 200;
    const auto got = read_frame_graphs(in, opt);
    CHECK(got[0].nodes[0].box == BBox{0.1, 0.1, 0.3, 0.2});
  }
}

TEST_CASE("video graph files round-trip exactly") {
  const auto meta = testing::small_metadata(6);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto frames = testing::random_frames(7, 5, meta, rng);
    const auto g = assemble_video_graph(frames, make_schedule(HorizonMode::kExponential, 2, 7), meta);
    std::stringstream ss;
    write_video_graph(g, ss);
    CHECK(read_video_graph(ss) == g);
  }
  SUBCASE("zero temporal edges") {
    const auto g = assemble_video_graph({testing::random_frame(0, 3, meta, rng)},
                                        make_schedule(HorizonMode::kExponential, 3, 1), meta);
    CHECK(g.temporal_edges.empty());
    std::stringstream ss;
    write_video_graph(g, ss);
    CHECK(read_video_graph(ss) == g);
  }
}

TEST_CASE("video graph reader rejects bad documents") {
  const auto meta = testing::small_metadata();
  std::mt19937_64 rng(7);
  const auto g = assemble_video_graph(testing::random_frames(3, 3, meta, rng, 1),
                                      make_schedule(HorizonMode::kDense, 0, 3), meta);
  std::stringstream ss;
  write_video_graph(g, ss);
  const std::string text = ss.str();

  SUBCASE("unknown version") {
    std::string bumped = text;
    bumped.replace(bumped.find("\"version\":1"), 11, "\"version\":9");
    std::istringstream in(bumped);
    CHECK_THROWS_WITH_AS(read_video_graph(in), doctest::Contains("version"), FormatError);
  }
  SUBCASE("truncated") {
    std::istringstream in(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_video_graph(in), FormatError);
  }
}

TEST_CASE("dot export") {
  SUBCASE("empty graph has no node statements") {
    const auto dot = export_dot(VideoGraph{});
    CHECK(count(dot, "[label=\"c") == 0);
    CHECK(count(dot, "->") == 0);
  }
  SUBCASE("two nodes and one temporal edge") {
    VideoGraph g;
    g.metadata = testing::small_metadata(1);
    g.metadata.horizons = {1};
    FrameGraph a, b;
    a.frame_index = 0;
    b.frame_index = 1;
    a.nodes.push_back({{1.0f}, {0, 0, .1, .1}, 0, 1.0, -1});
    b.nodes.push_back({{2.0f}, {0, 0, .2, .2}, 1, 1.0, -1});
    g.frames = {a, b};
    g.temporal_edges.push_back({{0, 0}, {1, 0}, 3, {3.0f}, {0, 0, .2, .2}});
    validate(g);
    const auto dot = export_dot(g);
    CHECK(count(dot, "[label=\"c") == 2);
    CHECK(count(dot, "->") == 1);
    CHECK(dot == export_dot(g));
  }
}

TEST_CASE("atomic write creates parents and replaces content") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "stg_io_test";
  fs::remove_all(dir);
  const auto path = (dir / "a" / "b.txt").string();
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  CHECK(read_file(path) == "two");
  CHECK_THROWS_AS(read_file((dir / "missing").string()), FormatError);
  fs::remove_all(dir);
}
