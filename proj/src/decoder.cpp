#include "stg/decoder.hpp"

#include <array>
#include <cstdio>

#include "stg/rng.hpp"

namespace stg {

const char* to_string(TaskKind task) {
  return task == TaskKind::kClipMultilabel ? "clip" : "video";
}

TaskKind parse_task(const std::string& text) {
  if (text == "clip") return TaskKind::kClipMultilabel;
  if (text == "video") return TaskKind::kVideoSegmentation;
  throw std::invalid_argument("unknown task '" + text + "' (expected clip or video)");
}

int TcnConfig::receptive_field() const {
  int sum = 0;
  for (int j = 0; j < levels; ++j) sum += 1 << j;
  return 1 + (kernel_size - 1) * sum;
}

int TcnConfig::levels_for_length(int num_frames, int kernel_size) {
  TcnConfig c;
  c.kernel_size = kernel_size;
  c.levels = 1;
  while (c.receptive_field() < num_frames && c.levels < 30) ++c.levels;
  return c.levels;
}

void ModelConfig::validate() const {
  if (feature_dim <= 0) throw std::invalid_argument("model: feature_dim must be positive");
  if (num_relations <= 0) throw std::invalid_argument("model: num_relations must be positive");
  if (gnn.num_layers < 1) throw std::invalid_argument("model: num_layers must be >= 1");
  if (gnn.hidden < 1 || gnn.relation_dim < 1) throw std::invalid_argument("model: hidden sizes must be positive");
  if (gnn.dropout < 0.0 || gnn.dropout >= 1.0) throw std::invalid_argument("model: dropout must be in [0,1)");
  if (head.num_outputs < 1) throw std::invalid_argument("model: num_outputs must be >= 1");
  if (tcn.enabled) {
    if (tcn.input_dim < 1 || tcn.channels < 1 || tcn.levels < 1 || tcn.kernel_size < 1) {
      throw std::invalid_argument("model: TCN dimensions must be positive");
    }
    if (!tcn.causal) throw std::invalid_argument("model: only causal TCNs are supported");
  }
}

namespace {

std::string layer_prefix(int layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "gnn.%02d.", layer);
  return buf;
}

std::string block_prefix(int block) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tcn.block.%02d.", block);
  return buf;
}

struct Shape {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  bool bias;
};

std::vector<Shape> param_shapes(const ModelConfig& c) {
  const auto D = static_cast<std::size_t>(c.feature_dim);
  const auto H = static_cast<std::size_t>(c.gnn.hidden);
  const auto E = static_cast<std::size_t>(c.gnn.relation_dim);
  const auto R = static_cast<std::size_t>(c.num_relations);
  const auto K = static_cast<std::size_t>(c.head.num_outputs);
  std::vector<Shape> s{{"input.node.w", D, H, false},
                       {"input.node.b", 1, H, true},
                       {"input.edge.w", D, H, false},
                       {"input.edge.b", 1, H, true},
                       {"relation_embedding", R, E, false},
                       {"head.w", H, K, false},
                       {"head.b", 1, K, true}};
  for (int l = 0; l < c.gnn.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    s.push_back({p + "msg1.src", H, H, false});
    s.push_back({p + "msg1.edge", H, H, false});
    s.push_back({p + "msg1.rel", E, H, false});
    s.push_back({p + "msg1.dst", H, H, false});
    s.push_back({p + "msg1.b", 1, H, true});
    s.push_back({p + "msg2.w", H, 3 * H, false});
    s.push_back({p + "msg2.b", 1, 3 * H, true});
    s.push_back({p + "node1.w", H, H, false});
    s.push_back({p + "node1.b", 1, H, true});
    s.push_back({p + "node2.w", H, H, false});
    s.push_back({p + "node2.b", 1, H, true});
  }
  if (c.tcn.enabled) {
    const auto F = static_cast<std::size_t>(c.tcn.input_dim);
    const auto C = static_cast<std::size_t>(c.tcn.channels);
    s.push_back({"tcn.in.w", F, C, false});
    s.push_back({"tcn.in.b", 1, C, true});
    for (int j = 0; j < c.tcn.levels; ++j) {
      const std::string p = block_prefix(j);
      for (int k = 0; k < c.tcn.kernel_size; ++k) s.push_back({p + "tap." + std::to_string(k), C, C, false});
      s.push_back({p + "b", 1, C, true});
    }
    s.push_back({"tcn.out.w", C, H, false});
    s.push_back({"tcn.out.b", 1, H, true});
  }
  return s;
}

}  // namespace

template <class T>
GraphTensors<T> to_tensors(const VideoGraph& g) {
  GraphTensors<T> out;
  NodeIndexer index(g.frames);
  const std::size_t D = g.metadata.feature_dim > 0 ? static_cast<std::size_t>(g.metadata.feature_dim) : 0;
  out.num_frames = g.frames.size();
  out.node_features = nn::Matrix<T>(index.num_nodes(), D);
  const std::size_t num_edges = g.num_spatial_edges() + g.temporal_edges.size();
  out.edge_features = nn::Matrix<T>(num_edges, D);
  out.src.reserve(num_edges);
  out.dst.reserve(num_edges);
  out.relation.reserve(num_edges);
  out.node_frame.reserve(index.num_nodes());
  auto copy_feature = [D](const Feature& f, std::span<T> row) {
    if (f.size() != D) throw std::invalid_argument("to_tensors: feature length does not match metadata");
    for (std::size_t k = 0; k < D; ++k) row[k] = static_cast<T>(f[k]);
  };
  std::size_t edge_row = 0;
  for (std::size_t pos = 0; pos < g.frames.size(); ++pos) {
    const auto& f = g.frames[pos];
    const std::size_t base = index.offset(pos);
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      copy_feature(f.nodes[i].feature, out.node_features.row(base + i));
      out.node_frame.push_back(static_cast<int>(pos));
    }
    for (const auto& e : f.spatial_edges) {
      copy_feature(e.feature, out.edge_features.row(edge_row++));
      out.src.push_back(static_cast<int>(base) + e.src);
      out.dst.push_back(static_cast<int>(base) + e.dst);
      out.relation.push_back(e.relation_id);
    }
  }
  for (const auto& e : g.temporal_edges) {
    copy_feature(e.feature, out.edge_features.row(edge_row++));
    out.src.push_back(static_cast<int>(index.flat(e.src)));
    out.dst.push_back(static_cast<int>(index.flat(e.dst)));
    out.relation.push_back(e.relation_id);
  }
  return out;
}

template <class T>
nn::ParamStore<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  nn::ParamStore<T> store;
  auto rng = make_rng({seed, 0x1417ULL});
  for (const auto& s : param_shapes(config)) {
    if (s.bias) {
      store.add(s.name, s.rows, s.cols);
    } else {
      store.add_glorot(s.name, s.rows, s.cols, rng);
    }
  }
  return store;
}

template <class T>
void check_params(const ModelConfig& config, const nn::ParamStore<T>& params) {
  const auto shapes = param_shapes(config);
  if (shapes.size() != params.entries().size()) {
    throw std::invalid_argument("checkpoint holds " + std::to_string(params.entries().size()) +
                                " tensors, architecture needs " + std::to_string(shapes.size()));
  }
  for (const auto& s : shapes) {
    if (!params.contains(s.name)) throw std::invalid_argument("checkpoint is missing tensor '" + s.name + "'");
    const auto& v = params.at(s.name).value;
    if (v.rows != s.rows || v.cols != s.cols) {
      throw std::invalid_argument("tensor '" + s.name + "' has shape " + nn::shape_string(v.rows, v.cols) +
                                  ", expected " + nn::shape_string(s.rows, s.cols));
    }
  }
}

template <class T>
LayerOutput gnn_layer(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config, int layer,
                      nn::Var nodes, nn::Var edges, nn::Var relation_embedding, const GraphTensors<T>& graph,
                      std::mt19937_64& rng) {
  const std::string p = layer_prefix(layer);
  const auto H = static_cast<std::size_t>(config.gnn.hidden);
  const std::size_t num_nodes = tape.value(nodes).rows;
  if (tape.value(nodes).cols != H || tape.value(edges).cols != H) {
    throw nn::ShapeError("gnn_layer: node/edge width must equal hidden size " + std::to_string(H));
  }
  if (tape.value(edges).rows != graph.src.size()) throw nn::ShapeError("gnn_layer: edge feature rows != edges");
  auto param = [&](const char* name) { return tape.parameter(params.at(p + name)); };

  // The first message layer acts on the concatenation [h_s | h_e | emb | h_d];
  // its weight is stored as four blocks so node and relation projections are
  // computed once and gathered per edge.
  const nn::Var proj_src = tape.matmul(nodes, param("msg1.src"));
  const nn::Var proj_dst = tape.matmul(nodes, param("msg1.dst"));
  const nn::Var proj_rel = tape.matmul(relation_embedding, param("msg1.rel"));
  nn::Var pre = tape.matmul(edges, param("msg1.edge"));
  pre = tape.add(pre, tape.gather_rows(proj_src, graph.src));
  pre = tape.add(pre, tape.gather_rows(proj_dst, graph.dst));
  pre = tape.add(pre, tape.gather_rows(proj_rel, graph.relation));
  pre = tape.add_row(pre, param("msg1.b"));
  nn::Var hidden = tape.dropout(tape.relu(pre), config.gnn.dropout, rng);
  const nn::Var out = tape.add_row(tape.matmul(hidden, param("msg2.w")), param("msg2.b"));

  const nn::Var to_src = tape.slice_cols(out, 0, H);
  const nn::Var new_edges = tape.slice_cols(out, H, 2 * H);
  const nn::Var to_dst = tape.slice_cols(out, 2 * H, 3 * H);

  std::vector<int> target(graph.src);
  target.insert(target.end(), graph.dst.begin(), graph.dst.end());
  const std::array<nn::Var, 2> parts{to_src, to_dst};
  const nn::Var agg = tape.segment_mean(tape.concat_rows(parts), target, num_nodes);

  std::vector<T> has_msg(num_nodes, T(0));
  for (int t : target) has_msg[static_cast<std::size_t>(t)] = T(1);

  nn::Var upd = tape.relu(tape.add_row(tape.matmul(agg, param("node1.w")), param("node1.b")));
  upd = tape.add_row(tape.matmul(upd, param("node2.w")), param("node2.b"));
  upd = tape.scale_rows(upd, has_msg);

  nn::Var new_nodes;
  if (config.gnn.residual) {
    new_nodes = tape.add(nodes, upd);
  } else {
    std::vector<T> keep(num_nodes);
    for (std::size_t i = 0; i < num_nodes; ++i) keep[i] = T(1) - has_msg[i];
    new_nodes = tape.add(tape.scale_rows(nodes, keep), upd);
  }
  return {new_nodes, new_edges};
}

template <class T>
nn::Var frame_pool(nn::Tape<T>& tape, nn::Var nodes, const GraphTensors<T>& graph) {
  return tape.segment_mean(nodes, graph.node_frame, graph.num_frames);
}

template <class T>
nn::Var tcn_forward(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config, nn::Var global) {
  const auto& tc = config.tcn;
  if (!tc.enabled) throw std::invalid_argument("tcn_forward: TCN disabled in config");
  if (tape.value(global).cols != static_cast<std::size_t>(tc.input_dim)) {
    throw nn::ShapeError("tcn_forward: global features have " + std::to_string(tape.value(global).cols) +
                         " columns, expected " + std::to_string(tc.input_dim));
  }
  auto param = [&](const std::string& name) { return tape.parameter(params.at(name)); };
  nn::Var x = tape.add_row(tape.matmul(global, param("tcn.in.w")), param("tcn.in.b"));
  for (int j = 0; j < tc.levels; ++j) {
    const std::string p = block_prefix(j);
    const std::size_t dilation = std::size_t{1} << j;
    nn::Var y = tape.matmul(x, param(p + "tap.0"));
    for (int k = 1; k < tc.kernel_size; ++k) {
      const nn::Var delayed = tape.shift_rows(x, static_cast<std::size_t>(k) * dilation);
      y = tape.add(y, tape.matmul(delayed, param(p + "tap." + std::to_string(k))));
    }
    y = tape.add_row(y, param(p + "b"));
    x = tape.add(x, tape.relu(y));
  }
  return tape.add_row(tape.matmul(x, param("tcn.out.w")), param("tcn.out.b"));
}

template <class T>
nn::Var frame_logits(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config,
                     const GraphTensors<T>& graph, const nn::Matrix<T>* global_features, std::mt19937_64& rng) {
  if (graph.node_features.rows > 0 && graph.node_features.cols != static_cast<std::size_t>(config.feature_dim)) {
    throw nn::ShapeError("forward: node features have " + std::to_string(graph.node_features.cols) +
                         " columns, model expects " + std::to_string(config.feature_dim));
  }
  for (int r : graph.relation) {
    if (r < 0 || r >= config.num_relations) throw std::invalid_argument("forward: relation id out of vocabulary");
  }
  auto param = [&](const std::string& name) { return tape.parameter(params.at(name)); };
  const auto D = static_cast<std::size_t>(config.feature_dim);
  nn::Matrix<T> node_in = graph.node_features;
  nn::Matrix<T> edge_in = graph.edge_features;
  // Feature-less empty inputs still need the declared width for matmul.
  if (node_in.rows == 0) node_in = nn::Matrix<T>(0, D);
  if (edge_in.rows == 0) edge_in = nn::Matrix<T>(0, D);
  nn::Var h = tape.add_row(tape.matmul(tape.constant(std::move(node_in)), param("input.node.w")),
                           param("input.node.b"));
  nn::Var e = tape.add_row(tape.matmul(tape.constant(std::move(edge_in)), param("input.edge.w")),
                           param("input.edge.b"));
  const nn::Var emb = param("relation_embedding");
  for (int l = 0; l < config.gnn.num_layers; ++l) {
    auto out = gnn_layer(tape, params, config, l, h, e, emb, graph, rng);
    h = out.nodes;
    e = out.edges;
  }
  nn::Var pooled = frame_pool(tape, h, graph);
  if (config.tcn.enabled) {
    if (!global_features) throw std::invalid_argument("forward: TCN enabled but no global frame features given");
    if (global_features->rows != graph.num_frames) {
      throw nn::ShapeError("forward: global features have " + std::to_string(global_features->rows) +
                           " rows for " + std::to_string(graph.num_frames) + " frames");
    }
    pooled = tape.add(pooled, tcn_forward(tape, params, config, tape.constant(*global_features)));
  }
  return tape.add_row(tape.matmul(pooled, param("head.w")), param("head.b"));
}

template <class T>
nn::Var forward(nn::Tape<T>& tape, nn::ParamStore<T>& params, const ModelConfig& config,
                const GraphTensors<T>& graph, const nn::Matrix<T>* global_features, std::mt19937_64& rng) {
  const nn::Var logits = frame_logits(tape, params, config, graph, global_features, rng);
  if (config.head.task == TaskKind::kVideoSegmentation) return logits;
  const std::size_t rows = tape.value(logits).rows;
  if (rows == 0) throw std::invalid_argument("forward: clip has no frames");
  return tape.slice_rows(logits, rows - 1, rows);
}

nn::Matrix<float> predict_logits(nn::ParamStore<float>& params, const ModelConfig& config, const VideoGraph& g,
                                 const nn::Matrix<float>* global_features) {
  nn::Tape<float> tape(false);
  std::mt19937_64 rng(0);
  const auto tensors = to_tensors<float>(g);
  return tape.value(forward(tape, params, config, tensors, global_features, rng));
}

#define STG_INSTANTIATE(T)                                                                                      \
  template GraphTensors<T> to_tensors<T>(const VideoGraph&);                                                    \
  template nn::ParamStore<T> init_params<T>(const ModelConfig&, std::uint64_t);                                 \
  template void check_params<T>(const ModelConfig&, const nn::ParamStore<T>&);                                  \
  template LayerOutput gnn_layer<T>(nn::Tape<T>&, nn::ParamStore<T>&, const ModelConfig&, int, nn::Var, nn::Var, \
                                    nn::Var, const GraphTensors<T>&, std::mt19937_64&);                         \
  template nn::Var frame_pool<T>(nn::Tape<T>&, nn::Var, const GraphTensors<T>&);                                \
  template nn::Var tcn_forward<T>(nn::Tape<T>&, nn::ParamStore<T>&, const ModelConfig&, nn::Var);               \
  template nn::Var frame_logits<T>(nn::Tape<T>&, nn::ParamStore<T>&, const ModelConfig&, const GraphTensors<T>&, \
                                   const nn::Matrix<T>*, std::mt19937_64&);                                     \
  template nn::Var forward<T>(nn::Tape<T>&, nn::ParamStore<T>&, const ModelConfig&, const GraphTensors<T>&,     \
                              const nn::Matrix<T>*, std::mt19937_64&);

STG_INSTANTIATE(float)
STG_INSTANTIATE(double)

#undef STG_INSTANTIATE

}  // namespace stg
