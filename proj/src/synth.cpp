#include "stg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "json.hpp"
#include "stg/dataset.hpp"
#include "stg/graph_io.hpp"
#include "stg/rng.hpp"

namespace stg {

const char* to_string(LabelRule rule) {
  return rule == LabelRule::kClipCovisibility ? "clip_covisibility" : "phase_schedule";
}

LabelRule parse_label_rule(const std::string& text) {
  if (text == "clip_covisibility") return LabelRule::kClipCovisibility;
  if (text == "phase_schedule") return LabelRule::kPhaseSchedule;
  throw std::invalid_argument("unknown label rule '" + text + "'");
}

void WorldConfig::validate() const {
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string("world: ") + name + " must be in [0,1]");
  };
  rate(occlusion_rate, "occlusion_rate");
  rate(duplicate_rate, "duplicate_rate");
  rate(duplicate_mix, "duplicate_mix");
  rate(key_occlusion_rate, "key_occlusion_rate");
  if (length < 1) throw std::invalid_argument("world: length must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("world: feature_dim must be >= 1");
  if (tracks < 0) throw std::invalid_argument("world: tracks must be >= 0");
  if (mean_gap < 0.0 || key_mean_gap < 0.0) throw std::invalid_argument("world: mean gaps must be >= 0");
  if ((mean_gap > 0.0 && mean_gap < 1.0) || (key_mean_gap > 0.0 && key_mean_gap < 1.0)) {
    throw std::invalid_argument("world: a positive mean gap must be >= 1 frame");
  }
  if (max_gap < 1) throw std::invalid_argument("world: max_gap must be >= 1");
  if (feature_noise < 0.0 || motion_step < 0.0 || global_feature_noise < 0.0) {
    throw std::invalid_argument("world: noise levels must be non-negative");
  }
  if (num_anatomy_classes < 0 || num_tool_classes < 0 || num_classes() < 1) {
    throw std::invalid_argument("world: need at least one object class");
  }
  if (num_spatial_relations < 4) throw std::invalid_argument("world: need 4 geometric spatial relations");
  if (global_feature_dim < 1) throw std::invalid_argument("world: global_feature_dim must be >= 1");
  if (label_rule == LabelRule::kClipCovisibility) {
    if (num_criteria < 1) throw std::invalid_argument("world: num_criteria must be >= 1");
    if (tracks < num_criteria + 1) throw std::invalid_argument("world: clip rule needs tracks >= num_criteria + 1");
    if (num_anatomy_classes < num_criteria + 1) {
      throw std::invalid_argument("world: clip rule needs num_anatomy_classes >= num_criteria + 1");
    }
  } else {
    if (num_phases < 1) throw std::invalid_argument("world: num_phases must be >= 1");
    if (tracks < 2) throw std::invalid_argument("world: phase rule needs at least 2 shared tracks");
    if (num_classes() < 2 + num_phases + (tracks > 2 ? 1 : 0)) {
      throw std::invalid_argument("world: not enough classes for shared tracks plus one key class per phase");
    }
    if (min_phase_length < 1 || min_phase_length * num_phases > length) {
      throw std::invalid_argument("world: length too short for the phase schedule");
    }
  }
}

GraphMetadata WorldConfig::metadata() const {
  GraphMetadata m;
  m.feature_dim = feature_dim;
  m.num_object_classes = num_classes();
  m.num_anatomy_classes = num_anatomy_classes;
  m.num_spatial_relations = num_spatial_relations;
  return m;
}

namespace {

struct Track {
  int class_id = 0;
  Feature appearance;
  double cx = 0.5, cy = 0.5, w = 0.2, h = 0.2;
  bool visible = true;
  int gap = 0;
  double occlusion_rate = 0.0;
  double mean_gap = 0.0;
  // Phase rule: the phase during which this track may appear; -1 = always.
  int phase = -1;
  // Active duplicate detection following this track.
  bool dup_active = false;
  int dup_class_mix = 0;
  double dup_dx = 0.0, dup_dy = 0.0;
};

std::vector<Feature> class_appearances(const WorldConfig& c) {
  auto rng = make_rng({c.seed, 0xc1a55ULL});
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Feature> out(static_cast<std::size_t>(c.num_classes()));
  for (auto& f : out) {
    f.resize(static_cast<std::size_t>(c.feature_dim));
    for (auto& v : f) v = static_cast<float>(n01(rng));
  }
  return out;
}

BBox box_of(double cx, double cy, double w, double h) {
  BBox b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  b.x1 = std::clamp(b.x1, 0.0, 1.0);
  b.y1 = std::clamp(b.y1, 0.0, 1.0);
  b.x2 = std::clamp(b.x2, b.x1, 1.0);
  b.y2 = std::clamp(b.y2, b.y1, 1.0);
  return b;
}

int spatial_relation(const BBox& a, const BBox& b) {
  const double dx = (b.x1 + b.x2) / 2 - (a.x1 + a.x2) / 2;
  const double dy = (b.y1 + b.y2) / 2 - (a.y1 + a.y2) / 2;
  if (std::abs(dx) >= std::abs(dy)) return dx >= 0 ? 0 : 1;  // left of / right of
  return dy >= 0 ? 2 : 3;                                    // above / below
}

// Occlusion on/off step. Gaps end with probability 1/mean_gap per frame and
// never exceed max_gap frames.
void step_visibility(Track& t, int max_gap, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (t.mean_gap <= 0.0) {
    t.visible = true;
    return;
  }
  if (t.visible) {
    if (u(rng) < t.occlusion_rate) {
      t.visible = false;
      t.gap = 1;
    }
  } else if (t.gap >= max_gap || u(rng) < 1.0 / t.mean_gap) {
    t.visible = true;
    t.gap = 0;
  } else {
    ++t.gap;
  }
}

std::vector<int> phase_schedule(const WorldConfig& c, std::mt19937_64& rng) {
  // Split the slack beyond the minimum lengths at uniform random cut points.
  const int slack = c.length - c.min_phase_length * c.num_phases;
  std::uniform_int_distribution<int> cut(0, slack);
  std::vector<int> cuts(static_cast<std::size_t>(c.num_phases - 1));
  for (auto& x : cuts) x = cut(rng);
  std::sort(cuts.begin(), cuts.end());
  std::vector<int> lengths;
  int prev = 0;
  for (int x : cuts) {
    lengths.push_back(c.min_phase_length + x - prev);
    prev = x;
  }
  lengths.push_back(c.min_phase_length + slack - prev);
  std::vector<int> labels;
  for (int p = 0; p < c.num_phases; ++p) labels.insert(labels.end(), static_cast<std::size_t>(lengths[p]), p);
  return labels;
}

}  // namespace

SyntheticSequence generate_sequence(const WorldConfig& c, std::uint64_t sample_seed) {
  c.validate();
  const auto bases = class_appearances(c);
  auto rng = make_rng({sample_seed, 0x5e9ULL});
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto D = static_cast<std::size_t>(c.feature_dim);
  const bool phase_rule = c.label_rule == LabelRule::kPhaseSchedule;

  std::vector<int> phases;
  if (phase_rule) phases = phase_schedule(c, rng);

  std::vector<Track> tracks;
  auto add_track = [&](int cls, int phase, double occ, double gap) {
    Track t;
    t.class_id = cls;
    t.phase = phase;
    t.occlusion_rate = occ;
    t.mean_gap = gap;
    t.appearance = bases[static_cast<std::size_t>(cls)];
    for (auto& v : t.appearance) v = static_cast<float>(v + 0.1 * n01(rng));
    t.cx = 0.15 + 0.7 * u01(rng);
    t.cy = 0.15 + 0.7 * u01(rng);
    t.w = 0.1 + 0.15 * u01(rng);
    t.h = 0.1 + 0.15 * u01(rng);
    tracks.push_back(std::move(t));
  };
  if (!phase_rule) {
    const int anatomy_extra = c.num_anatomy_classes - (c.num_criteria + 1);
    for (int k = 0; k < c.tracks; ++k) {
      int cls = k;
      if (k > c.num_criteria) {
        const int j = k - (c.num_criteria + 1);
        cls = c.num_tool_classes > 0 ? c.num_anatomy_classes + j % c.num_tool_classes
                                     : c.num_criteria + 1 + j % std::max(anatomy_extra, 1);
      }
      add_track(cls, -1, c.occlusion_rate, c.mean_gap);
    }
  } else {
    const int first_extra = 2 + c.num_phases;
    const int extra_classes = c.num_classes() - first_extra;
    for (int k = 0; k < c.tracks; ++k) {
      const int cls = k < 2 ? k : first_extra + (k - 2) % std::max(extra_classes, 1);
      add_track(cls, -1, c.occlusion_rate, c.mean_gap);
    }
    for (int p = 0; p < c.num_phases; ++p) add_track(2 + p, p, c.key_occlusion_rate, c.key_mean_gap);
  }

  SyntheticSequence seq;
  seq.global_features = nn::Matrix<float>(static_cast<std::size_t>(c.length),
                                          static_cast<std::size_t>(c.global_feature_dim));
  for (int frame = 0; frame < c.length; ++frame) {
    const int phase = phase_rule ? phases[static_cast<std::size_t>(frame)] : -1;
    FrameGraph fg;
    fg.frame_index = frame;
    std::vector<std::pair<Node, bool>> detections;  // (node, is_duplicate)
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      Track& t = tracks[k];
      if (frame > 0) {
        step_visibility(t, c.max_gap, rng);
        t.cx = std::clamp(t.cx + c.motion_step * n01(rng), t.w / 2, 1.0 - t.w / 2);
        t.cy = std::clamp(t.cy + c.motion_step * n01(rng), t.h / 2, 1.0 - t.h / 2);
      }
      // A key track's phase starts with the key in view.
      if (t.phase >= 0 && frame > 0 && phases[static_cast<std::size_t>(frame - 1)] != t.phase && phase == t.phase) {
        t.visible = true;
        t.gap = 0;
      }
      const bool in_phase = t.phase < 0 || t.phase == phase;
      const bool shown = t.visible && in_phase;
      const double continue_p = (1.0 - t.occlusion_rate) / 2.0;
      if (t.dup_active && (!shown || u01(rng) >= continue_p)) t.dup_active = false;
      if (shown && !t.dup_active && c.duplicate_rate > 0.0 && u01(rng) < c.duplicate_rate) {
        t.dup_active = true;
        std::uniform_int_distribution<int> other(0, c.num_classes() - 1);
        int mix = other(rng);
        if (c.num_classes() > 1) {
          while (mix == t.class_id) mix = other(rng);
        }
        t.dup_class_mix = mix;
        t.dup_dx = (u01(rng) - 0.5) * t.w;
        t.dup_dy = (u01(rng) - 0.5) * t.h;
      }
      if (!shown) continue;
      Node n;
      n.class_id = t.class_id;
      n.track_id = static_cast<int>(k);
      n.box = box_of(t.cx, t.cy, t.w, t.h);
      n.confidence = 0.7 + 0.3 * u01(rng);
      n.feature.resize(D);
      for (std::size_t d = 0; d < D; ++d) {
        n.feature[d] = static_cast<float>(t.appearance[d] + c.feature_noise * n01(rng));
      }
      detections.emplace_back(std::move(n), false);
      if (t.dup_active) {
        Node dup;
        dup.class_id = t.class_id;
        dup.box = box_of(std::clamp(t.cx + t.dup_dx, 0.0, 1.0), std::clamp(t.cy + t.dup_dy, 0.0, 1.0), t.w * 0.9,
                         t.h * 0.9);
        dup.confidence = 0.3 + 0.4 * u01(rng);
        dup.feature.resize(D);
        const auto& foreign = bases[static_cast<std::size_t>(t.dup_class_mix)];
        for (std::size_t d = 0; d < D; ++d) {
          const double mixed = (1.0 - c.duplicate_mix) * t.appearance[d] + c.duplicate_mix * foreign[d];
          dup.feature[d] = static_cast<float>(mixed + 2.0 * c.feature_noise * n01(rng));
        }
        detections.emplace_back(std::move(dup), true);
      }
    }
    std::shuffle(detections.begin(), detections.end(), rng);
    for (auto& [node, _] : detections) fg.nodes.push_back(std::move(node));

    for (std::size_t i = 0; i < fg.nodes.size(); ++i) {
      for (std::size_t j = i + 1; j < fg.nodes.size(); ++j) {
        const auto& a = fg.nodes[i];
        const auto& b = fg.nodes[j];
        const double dx = (a.box.x1 + a.box.x2 - b.box.x1 - b.box.x2) / 2;
        const double dy = (a.box.y1 + a.box.y2 - b.box.y1 - b.box.y2) / 2;
        if (std::hypot(dx, dy) >= 0.5) continue;
        SpatialEdge e;
        e.src = static_cast<int>(i);
        e.dst = static_cast<int>(j);
        e.relation_id = spatial_relation(a.box, b.box);
        e.box = enclosing(a.box, b.box);
        e.feature.resize(D);
        for (std::size_t d = 0; d < D; ++d) e.feature[d] = 0.5f * (a.feature[d] + b.feature[d]);
        fg.spatial_edges.push_back(std::move(e));
      }
    }

    auto grow = seq.global_features.row(static_cast<std::size_t>(frame));
    for (std::size_t d = 0; d < grow.size(); ++d) {
      double signal = 0.0;
      if (phase_rule) {
        signal = static_cast<int>(d) == phase ? 1.0 : 0.0;
      } else if (d < tracks.size()) {
        const auto& t = tracks[d];
        signal = t.visible ? 1.0 : 0.0;
      }
      grow[d] = static_cast<float>(signal + c.global_feature_noise * n01(rng));
    }
    seq.frames.push_back(std::move(fg));
  }

  if (phase_rule) {
    seq.frame_labels = phases;
  } else {
    const auto& last = seq.frames.back();
    std::vector<char> visible(tracks.size(), 0);
    for (const auto& n : last.nodes) {
      if (n.track_id >= 0) visible[static_cast<std::size_t>(n.track_id)] = 1;
    }
    for (int k = 0; k < c.num_criteria; ++k) {
      seq.clip_labels.push_back(visible[static_cast<std::size_t>(k)] && visible[static_cast<std::size_t>(k) + 1] ? 1 : 0);
    }
  }
  return seq;
}

std::string generate_dataset(const WorldConfig& c, const DatasetSizes& sizes, std::uint64_t seed,
                             const std::string& out_dir) {
  namespace fs = std::filesystem;
  c.validate();
  if (sizes.train < 0 || sizes.val < 0 || sizes.test < 0) throw std::invalid_argument("dataset sizes must be >= 0");
  fs::create_directories(fs::path(out_dir) / "frames");
  Manifest manifest;
  manifest.task = c.label_rule == LabelRule::kClipCovisibility ? TaskKind::kClipMultilabel
                                                              : TaskKind::kVideoSegmentation;
  manifest.num_outputs = c.num_outputs();
  manifest.metadata = c.metadata();
  manifest.global_feature_dim = c.global_feature_dim;
  manifest.generator = world_config_to_json(c);
  manifest.generator["seed_global"] = seed;
  const int total = sizes.train + sizes.val + sizes.test;
  for (int i = 0; i < total; ++i) {
    const auto seq = generate_sequence(c, derive_seed({seed, static_cast<std::uint64_t>(i)}));
    char id[32];
    std::snprintf(id, sizeof(id), "s%05d", i);
    ManifestEntry e;
    e.id = id;
    e.split = i < sizes.train ? "train" : (i < sizes.train + sizes.val ? "val" : "test");
    e.frames_path = "frames/" + e.id + ".jsonl";
    if (manifest.task == TaskKind::kClipMultilabel) {
      e.labels.clip = seq.clip_labels;
    } else {
      for (int l : seq.frame_labels) e.labels.frames.emplace_back(std::vector<int>{l});
    }
    e.global_features = seq.global_features;
    std::ostringstream os;
    write_frame_graphs(seq.frames, os);
    write_file_atomic((fs::path(out_dir) / e.frames_path).string(), os.str());
    manifest.samples.push_back(std::move(e));
  }
  const std::string path = (fs::path(out_dir) / "manifest.json").string();
  write_manifest(manifest, path);
  return path;
}

}  // namespace stg
