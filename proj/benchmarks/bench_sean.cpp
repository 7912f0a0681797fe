#include <map>

#include <benchmark/benchmark.h>

#include "sean/aggregator.hpp"
#include "sean/training.hpp"

namespace {

using namespace sean;

auto bench_graph(std::size_t nodes) -> const TemporalGraph& {
  static std::map<std::size_t, TemporalGraph> cache;
  auto it = cache.find(nodes);
  if (it == cache.end()) {
    SynthConfig sc;
    sc.num_nodes = nodes;
    sc.num_events = nodes * 20;
    sc.seed = 1;
    it = cache.emplace(nodes, generate_synthetic(sc)).first;
  }
  return it->second;
}

void BM_NeighborView(benchmark::State& state) {
  const auto& g = bench_graph(500);
  const auto sample = static_cast<std::size_t>(state.range(0));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& ev = g.event(i);
    benchmark::DoNotOptimize(g.neighbor_view(ev.src, ev.t, sample));
    i = (i + 7919) % g.num_events();
  }
}
BENCHMARK(BM_NeighborView)->Arg(5)->Arg(10)->Arg(20);

void BM_EmbeddingForward(benchmark::State& state) {
  const auto& g = bench_graph(500);
  ModelConfig cfg;
  cfg.layers = static_cast<std::size_t>(state.range(0));
  cfg.feat_dim = g.feat_dim();
  cfg.sample_size = 5;
  cfg.seed = 2;
  SeanModel model(cfg);
  model.set_t_max(static_cast<double>(g.num_events()));
  std::size_t i = g.num_events() / 2;
  for (auto _ : state) {
    const auto& ev = g.event(i);
    benchmark::DoNotOptimize(compute_embedding(g, model, ev.src, ev.t).z);
    i = (i + 7919) % g.num_events();
    if (i == 0) i = 1;
  }
}
BENCHMARK(BM_EmbeddingForward)->DenseRange(1, 3)->Unit(benchmark::kMicrosecond);

void BM_TrainBatch(benchmark::State& state) {
  const auto& g = bench_graph(static_cast<std::size_t>(state.range(0)));
  TrainConfig cfg;
  cfg.seed = 3;
  SeanModel model(cfg.model_config(g.feat_dim()));
  model.set_t_max(static_cast<double>(g.num_events()));
  Trainer trainer(model, g, cfg);
  const std::size_t begin = g.num_events() / 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.train_epoch({begin, begin + cfg.batch_size}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.batch_size));
}
BENCHMARK(BM_TrainBatch)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
