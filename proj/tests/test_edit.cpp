#include <map>

#include "doctest.h"
#include "helpers.hpp"
#include "stg/edit.hpp"
#include "stg/temporal.hpp"

using namespace stg;

namespace {

TemporalEdge link(const VideoGraph& g, NodeRef s, NodeRef d, int rel) {
  const auto& a = g.frames[static_cast<std::size_t>(s.frame_index)].nodes[static_cast<std::size_t>(s.node_index)];
  const auto& b = g.frames[static_cast<std::size_t>(d.frame_index)].nodes[static_cast<std::size_t>(d.node_index)];
  TemporalEdge e{s, d, rel, a.feature, enclosing(a.box, b.box)};
  for (std::size_t k = 0; k < e.feature.size(); ++k) e.feature[k] += b.feature[k];
  return e;
}

// Frame 0: two class-0 nodes and two tool nodes (class 3); frame 1: three nodes.
VideoGraph fixture() {
  VideoGraph g;
  g.metadata = testing::small_metadata(1);
  g.metadata.horizons = {1};
  FrameGraph f0, f1;
  f0.frame_index = 0;
  f1.frame_index = 1;
  f0.nodes = {{{1}, {0, 0, .1, .1}, 0, 0.8, -1},
              {{2}, {0, 0, .2, .2}, 0, 0.8, -1},
              {{3}, {.5, .5, .6, .6}, 3, 0.5, -1},
              {{4}, {.5, .5, .7, .7}, 3, 0.5, -1}};
  f1.nodes = {{{5}, {0, 0, .1, .1}, 0, 0.9, -1}, {{6}, {.1, .1, .2, .2}, 1, 0.9, -1}, {{7}, {.2, .2, .3, .3}, 1, 0.9, -1}};
  f0.spatial_edges = {{0, 1, {3}, {0, 0, .2, .2}, 0}, {1, 2, {5}, {0, 0, .6, .6}, 1}, {2, 3, {7}, {.5, .5, .7, .7}, 2}};
  g.frames = {f0, f1};
  const int r = g.metadata.temporal_relation_id(TemporalRelation::kBoxMatch);
  // Node (0,0) gets degree 3, node (0,1) degree 1.
  g.temporal_edges = {link(g, {0, 0}, {1, 0}, r), link(g, {1, 0}, {0, 0}, r), link(g, {0, 0}, {1, 1}, r),
                      link(g, {0, 1}, {1, 2}, r)};
  validate(g);
  return g;
}

}  // namespace

TEST_CASE("temporal degree") {
  const auto g = fixture();
  const auto deg = temporal_degrees(g);
  CHECK(deg == std::vector<int>{3, 1, 0, 0, 2, 1, 1});
  int sum = 0;
  for (int d : deg) sum += d;
  CHECK(sum == 2 * static_cast<int>(g.temporal_edges.size()));

  SUBCASE("mutual best match under both kernels has degree 8") {
    const auto meta = testing::small_metadata();
    std::mt19937_64 rng(3);
    const auto vg = assemble_video_graph({testing::random_frame(0, 1, meta, rng), testing::random_frame(1, 1, meta, rng)},
                                         make_schedule(HorizonMode::kAdjacent, 0, 2), meta);
    CHECK(temporal_degrees(vg) == std::vector<int>{8, 8});
  }
}

TEST_CASE("node scores") {
  VideoGraph g;
  g.metadata = testing::small_metadata(1);
  FrameGraph f;
  f.nodes = {{{0}, {0, 0, 1, 1}, 0, 1.0, -1}, {{0}, {0, 0, 1, 1}, 0, 1.0, -1}, {{0}, {0, 0, 1, 1}, 0, 0.9, -1},
             {{0}, {0, 0, 1, 1}, 0, 0.7, -1}};
  g.frames = {f};
  const auto t = node_scores(g, {4, 1, 3, 0}, {});
  CHECK(t.dropout[0] == 0.25);
  CHECK(t.dropout[1] == 1.0);
  CHECK(t.score[1] == 0.0);
  CHECK(t.score[2] == doctest::Approx(0.6));
  CHECK(t.dropout[3] == 1.0);
  CHECK(t.score[3] == 0.0);
}

TEST_CASE("edit graph") {
  const auto g = fixture();
  const auto cfg = EditConfig::anatomy_defaults(g.metadata);
  CHECK(cfg.editable_classes == std::set<int>{0, 1});
  const auto e = edit_graph(g, cfg);

  SUBCASE("higher-degree duplicate is kept") {
    REQUIRE(e.frames[0].nodes.size() == 3);
    CHECK(e.frames[0].nodes[0].feature == Feature{1});
  }
  SUBCASE("tools are exempt") {
    CHECK(e.frames[0].nodes[1].class_id == 3);
    CHECK(e.frames[0].nodes[2].class_id == 3);
  }
  SUBCASE("incident edges are dropped and the rest remapped") {
    REQUIRE(e.frames[0].spatial_edges.size() == 1);
    CHECK(e.frames[0].spatial_edges[0].src == 1);
    CHECK(e.frames[0].spatial_edges[0].dst == 2);
    // Frame 1 keeps node 0 (class 0) and node 1 (first of two tied class-1 nodes).
    REQUIRE(e.frames[1].nodes.size() == 2);
    CHECK(e.frames[1].nodes[1].feature == Feature{6});
    CHECK(e.temporal_edges.size() == 3);
    CHECK_NOTHROW(validate(e));
  }
  SUBCASE("idempotent") { CHECK(edit_graph(e, cfg) == e); }
  SUBCASE("empty editable set is the identity") { CHECK(edit_graph(g, EditConfig{}) == g); }
}

TEST_CASE("edit invariants on random graphs") {
  const auto meta = testing::small_metadata();
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = assemble_video_graph(testing::random_frames(6, 7, meta, rng),
                                        make_schedule(HorizonMode::kExponential, 2, 6), meta);
    const auto cfg = EditConfig::anatomy_defaults(meta);
    const auto e = edit_graph(g, cfg);
    CHECK_NOTHROW(validate(e));
    for (const auto& f : e.frames) {
      std::map<int, int> per_class;
      for (const auto& n : f.nodes) {
        if (cfg.editable_classes.contains(n.class_id)) CHECK(++per_class[n.class_id] == 1);
      }
    }
    CHECK(edit_graph(e, cfg) == e);
  }
}

TEST_CASE("stochastic edit draws") {
  const auto g = fixture();
  std::mt19937_64 rng(5);
  auto cfg = EditConfig::anatomy_defaults(g.metadata, 0.0);
  for (int i = 0; i < 100; ++i) CHECK(maybe_edit(g, cfg, rng) == g);
  cfg.p_edit = 1.0;
  const auto edited = edit_graph(g, cfg);
  for (int i = 0; i < 100; ++i) CHECK(maybe_edit(g, cfg, rng) == edited);
  cfg.p_edit = 0.5;
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += draw_edit(cfg, rng);
  CHECK(hits / 10000.0 == doctest::Approx(0.5).epsilon(0.04));
}
