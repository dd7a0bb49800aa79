#include <benchmark/benchmark.h>

#include "fusionkit/fusion.hpp"
#include "fusionkit/scan.hpp"
#include "fusionkit/store.hpp"
#include "fusionkit/synth.hpp"

namespace {

struct Data {
  std::vector<fusionkit::ClassProto> protos;
  fusionkit::EvalSet queries;
};

Data make_data(int classes, int dim, int queries_per_class) {
  fusionkit::SynthSpec spec;
  spec.num_classes = classes;
  spec.dim = dim;
  spec.queries_per_class = queries_per_class;
  spec.text_bias = 0.4;
  spec.image_bias = 0.4;
  spec.query_noise = 1.5;
  const auto store = fusionkit::synth_records(spec);
  std::vector<std::vector<fusionkit::Embedding>> t(classes), im(classes);
  Data d;
  for (const auto& r : store.records) {
    const auto c = static_cast<std::size_t>(r.class_index);
    if (r.role == fusionkit::Role::kClassText) t[c].push_back(r.embedding);
    else if (r.role == fusionkit::Role::kClassImage) im[c].push_back(r.embedding);
    else d.queries.push_back({r.id, r.embedding, r.class_index});
  }
  for (int c = 0; c < classes; ++c) {
    d.protos.push_back(fusionkit::make_class_proto(c, t[c], im[c]));
  }
  return d;
}

void BM_ClassifyScores(benchmark::State& state) {
  const auto d = make_data(static_cast<int>(state.range(0)), 768, 1);
  const fusionkit::FusionConfig cfg{fusionkit::FusionMode::kConfidence, 0.5};
  for (auto _ : state) {
    for (const auto& q : d.queries) {
      benchmark::DoNotOptimize(fusionkit::classify_scores(q.embedding, d.protos, cfg));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.queries.size()));
}
BENCHMARK(BM_ClassifyScores)->Arg(10)->Arg(102);

void BM_WeightScan(benchmark::State& state) {
  const auto d = make_data(static_cast<int>(state.range(0)), 768, 20);
  const auto threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fusionkit::scan_weights(d.queries, d.protos,
                                                     fusionkit::FusionMode::kStandard,
                                                     fusionkit::Metric::kMeanPerClass, threads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.queries.size()));
}
BENCHMARK(BM_WeightScan)->Args({10, 1})->Args({102, 1})->Args({102, 4})->Unit(benchmark::kMillisecond);

void BM_EmbsRoundTrip(benchmark::State& state) {
  const auto store = fusionkit::synth_records({.num_classes = 10, .dim = 768, .queries_per_class = 100});
  for (auto _ : state) {
    const auto bytes = fusionkit::encode_embs(store.records, 768);
    benchmark::DoNotOptimize(fusionkit::decode_embs(bytes));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(store.records.size()));
}
BENCHMARK(BM_EmbsRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
