// Serial reference kernels against their OpenMP counterparts.
//   bench_kernels --benchmark_filter=matmul

#include <benchmark/benchmark.h>

#include <random>

#include "stg/nn/matrix.hpp"
#include "stg/temporal.hpp"

namespace {

using namespace stg;

GraphMetadata bench_metadata() {
  GraphMetadata m;
  m.feature_dim = 64;
  m.num_object_classes = 8;
  m.num_anatomy_classes = 5;
  m.num_spatial_relations = 4;
  return m;
}

std::vector<Node> random_nodes(int n, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 0.5);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<Node> nodes(static_cast<std::size_t>(n));
  for (auto& node : nodes) {
    const double x = u(rng), y = u(rng);
    node.box = {x, y, x + 0.1 + u(rng), y + 0.1 + u(rng)};
    node.feature.resize(static_cast<std::size_t>(dim));
    for (auto& v : node.feature) v = g(rng);
    node.confidence = 0.9;
  }
  return nodes;
}

std::vector<FrameGraph> random_video(int T, int n) {
  std::mt19937_64 rng(3);
  std::vector<FrameGraph> frames(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    frames[static_cast<std::size_t>(t)].frame_index = t;
    frames[static_cast<std::size_t>(t)].nodes = random_nodes(n, bench_metadata().feature_dim, rng);
  }
  return frames;
}

template <bool Parallel>
void BM_pairwise_similarity(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int n = static_cast<int>(state.range(0));
  const auto a = random_nodes(n, 64, rng), b = random_nodes(n, 64, rng);
  for (auto _ : state) {
    auto m = Parallel ? pairwise_similarity(a, b, Kernel::kFeature) : reference::pairwise_similarity(a, b, Kernel::kFeature);
    benchmark::DoNotOptimize(m);
  }
}

template <bool Parallel>
void BM_assemble(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const auto frames = random_video(T, 12);
  const auto schedule = make_schedule(HorizonMode::kExponential, 3, T);
  for (auto _ : state) {
    auto g = Parallel ? assemble_video_graph(frames, schedule, bench_metadata())
                      : reference::assemble_video_graph(frames, schedule, bench_metadata());
    benchmark::DoNotOptimize(g);
  }
}

template <bool Parallel>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g(0.0f, 1.0f);
  nn::Matrix<float> a(n, 64), b(64, 64);
  for (auto& v : a.data) v = g(rng);
  for (auto& v : b.data) v = g(rng);
  for (auto _ : state) {
    auto c = Parallel ? nn::matmul(a, b) : nn::reference::matmul(a, b);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_pairwise_similarity<false>)->Name("pairwise_similarity/serial")->Arg(16)->Arg(128);
BENCHMARK(BM_pairwise_similarity<true>)->Name("pairwise_similarity/omp")->Arg(16)->Arg(128);
BENCHMARK(BM_assemble<false>)->Name("assemble_video_graph/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_assemble<true>)->Name("assemble_video_graph/omp")->Arg(64)->Arg(512);
BENCHMARK(BM_matmul<false>)->Name("matmul/serial")->Arg(1024)->Arg(16384);
BENCHMARK(BM_matmul<true>)->Name("matmul/omp")->Arg(1024)->Arg(16384);

BENCHMARK_MAIN();
