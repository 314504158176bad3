#include <benchmark/benchmark.h>

#include "gop/network.hpp"
#include "gop/random.hpp"

using namespace gop;

namespace {

Matrix uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = rng.uniform(-1.0, 1.0);
  return m;
}

// Arg 0: operator set index, arg 1: fan-in.
void BM_BlockForward(benchmark::State& state) {
  Rng rng(1);
  const auto fan_in = static_cast<Eigen::Index>(state.range(1));
  const OperatorSet op = OperatorSet::from_index(static_cast<std::size_t>(state.range(0)));
  const NeuronBlock block{op, uniform(rng, fan_in, 40), uniform(rng, 40, 1).col(0)};
  const Matrix X = uniform(rng, 256, fan_in);
  for (auto _ : state) benchmark::DoNotOptimize(block_forward(block, X));
  state.SetItemsProcessed(state.iterations() * X.rows());
  state.SetLabel(to_string(op));
}

void BlockArgs(benchmark::internal::Benchmark* b) {
  // Perceptron, the exponential/max path and the DoG/correlation path.
  for (int op : {0, 42, 136})
    for (int fan_in : {8, 64}) b->Args({op, fan_in});
}

void BM_PoolGradient(benchmark::State& state) {
  Rng rng(2);
  const auto op = static_cast<PoolOp>(state.range(0));
  std::vector<double> z(64), g(64);
  for (auto& v : z) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    pool_grad_into(op, z, g);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetLabel(std::string(to_token(op)));
}

}  // namespace

BENCHMARK(BM_BlockForward)->Apply(BlockArgs);
BENCHMARK(BM_PoolGradient)->DenseRange(0, 3);
