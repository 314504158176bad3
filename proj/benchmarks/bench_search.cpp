#include <benchmark/benchmark.h>

#include "gop/progression.hpp"
#include "gop/synthetic.hpp"

using namespace gop;

namespace {

TrainingData moons() {
  Dataset ds = make_two_moons(500, 0.2, 0);
  ds.split = split_dataset(ds, {}, 0);
  return to_training_data(ds, fit_train_scaling(ds));
}

// One full 144-candidate search for the first block of a layer.
void BM_SearchFirstBlock(benchmark::State& state) {
  const TrainingData data = moons();
  const Matrix none(data.train.size(), 0);
  const Matrix none_val(data.val->size(), 0);
  SearchContext ctx{data.train.X, data.train.Y, none, &data.val->X, &data.val->Y, &none_val};
  const auto library = enumerate_operator_sets();
  ProgressionConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(search_operator_set(ctx, static_cast<std::size_t>(state.range(0)), library, cfg));
}

void BM_ProgressionRandomNetwork(benchmark::State& state) {
  const TrainingData data = moons();
  ProgressionConfig cfg;
  cfg.variant = Variant::HeMLRN;
  cfg.rate_metric = RateMetric::Accuracy;
  cfg.train_spec.schedule = {{0.01, 5}};
  for (auto _ : state) benchmark::DoNotOptimize(run_progression(data, cfg));
}

}  // namespace

BENCHMARK(BM_SearchFirstBlock)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProgressionRandomNetwork)->Unit(benchmark::kMillisecond)->Iterations(2);
