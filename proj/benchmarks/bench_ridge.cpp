#include <benchmark/benchmark.h>

#include "gop/random.hpp"
#include "gop/ridge.hpp"

using namespace gop;

namespace {

Matrix uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = rng.uniform(-1.0, 1.0);
  return m;
}

// Arg 0: samples, arg 1: features. d < N takes the primal branch.
void BM_SolveRidge(benchmark::State& state) {
  Rng rng(3);
  const Matrix H = uniform(rng, state.range(0), state.range(1));
  const Matrix Y = uniform(rng, state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_ridge(H, Y, 1.0));
}

void BM_EvaluateCandidate(benchmark::State& state) {
  Rng rng(4);
  const Matrix H = uniform(rng, 400, state.range(0));
  const Matrix Y = uniform(rng, 400, 2);
  const Matrix Hv = uniform(rng, 100, state.range(0));
  const Matrix Yv = uniform(rng, 100, 2);
  const CandidateOptions options;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_candidate(H, Y, options, ScoringSet{Hv, Yv}));
}

}  // namespace

BENCHMARK(BM_SolveRidge)->Args({500, 40})->Args({500, 200})->Args({100, 400});
BENCHMARK(BM_EvaluateCandidate)->Arg(40)->Arg(200);
