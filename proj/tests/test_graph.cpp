#include "doctest.h"
#include "helpers.hpp"
#include "stg/graph.hpp"
#include "stg/temporal.hpp"

using namespace stg;

TEST_CASE("enclosing box covers both inputs") {
  const BBox a{0, 0, .2, .2}, b{.1, .1, .3, .3};
  CHECK(enclosing(a, b) == BBox{0, 0, .3, .3});
  CHECK(enclosing(a, a) == a);
}

TEST_CASE("horizon mode names round-trip") {
  for (auto m : {HorizonMode::kExponential, HorizonMode::kDense, HorizonMode::kAdjacent}) {
    CHECK(parse_horizon_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_horizon_mode("cubic"), ValidationError);
}

TEST_CASE("node indexer maps frame positions to flat ids") {
  std::mt19937_64 rng(1);
  const auto meta = testing::small_metadata();
  std::vector<FrameGraph> frames;
  frames.push_back(testing::random_frame(0, 3, meta, rng));
  frames.push_back(testing::random_frame(5, 0, meta, rng));
  frames.push_back(testing::random_frame(7, 2, meta, rng));
  NodeIndexer idx(frames);
  CHECK(idx.num_nodes() == 5);
  CHECK(idx.position_of(5) == 1);
  CHECK(idx.position_of(6) == -1);
  CHECK(idx.flat({0, 2}) == 2);
  CHECK(idx.flat({7, 1}) == 4);
}

TEST_CASE("frame validation rejects broken invariants") {
  const auto meta = testing::small_metadata();
  std::mt19937_64 rng(2);
  auto f = testing::random_frame(0, 3, meta, rng, 1.0);
  CHECK_NOTHROW(validate_frame(f, meta));

  SUBCASE("inverted box") {
    f.nodes[0].box = {0.5, 0.5, 0.1, 0.9};
    CHECK_THROWS_AS(validate_frame(f, meta), ValidationError);
  }
  SUBCASE("feature dimension") {
    f.nodes[1].feature.pop_back();
    CHECK_THROWS_AS(validate_frame(f, meta), ValidationError);
  }
  SUBCASE("class vocabulary") {
    f.nodes[2].class_id = meta.num_object_classes;
    CHECK_THROWS_AS(validate_frame(f, meta), ValidationError);
  }
  SUBCASE("dangling edge") {
    f.spatial_edges[0].dst = 3;
    CHECK_THROWS_AS(validate_frame(f, meta), ValidationError);
  }
  SUBCASE("relation vocabulary") {
    f.spatial_edges[0].relation_id = meta.num_spatial_relations;
    CHECK_THROWS_AS(validate_frame(f, meta), ValidationError);
  }
}

TEST_CASE("video graph validation checks temporal edge laws") {
  const auto meta = testing::small_metadata();
  std::mt19937_64 rng(3);
  const auto frames = testing::random_frames(5, 4, meta, rng, 1);
  auto g = assemble_video_graph(frames, make_schedule(HorizonMode::kExponential, 1, 5), meta);
  CHECK_NOTHROW(validate(g));
  REQUIRE_FALSE(g.temporal_edges.empty());

  SUBCASE("feature must be the endpoint sum") {
    g.temporal_edges[0].feature[0] += 1e-3f;
    CHECK_THROWS_AS(validate(g), ValidationError);
  }
  SUBCASE("box must be the enclosure") {
    g.temporal_edges[0].box.x2 = std::min(1.0, g.temporal_edges[0].box.x2 + 0.01);
    g.temporal_edges[0].box.x1 = std::max(0.0, g.temporal_edges[0].box.x1 - 0.01);
    if (g.temporal_edges[0].box.x1 > 0 || g.temporal_edges[0].box.x2 < 1) {
      CHECK_THROWS_AS(validate(g), ValidationError);
    }
  }
  SUBCASE("gap outside the horizon set") {
    g.metadata.horizons = {1};
    bool has_long = false;
    for (const auto& e : g.temporal_edges) has_long |= std::abs(e.dst.frame_index - e.src.frame_index) > 1;
    if (has_long) CHECK_THROWS_AS(validate(g), ValidationError);
  }
  SUBCASE("spatial relation id on a temporal edge") {
    g.temporal_edges[0].relation_id = 0;
    CHECK_THROWS_AS(validate(g), ValidationError);
  }
}
