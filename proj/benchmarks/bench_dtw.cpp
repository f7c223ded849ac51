#include <benchmark/benchmark.h>

#include "transience/dtw.hpp"
#include "transience/rng.hpp"

using namespace transience;

namespace {

Eigen::MatrixXd random_cost(int tx, int ty, Rng& rng) {
    Eigen::MatrixXd m(tx, ty);
    for (int j = 0; j < ty; ++j) {
        for (int i = 0; i < tx; ++i) m(i, j) = uniform01(rng);
    }
    return m;
}

}  // namespace

static void BM_Dtw(benchmark::State& state) {
    Rng rng = substream(1, "bench-dtw");
    const int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd cost = random_cost(n, n + n / 5, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dtw(cost).total_cost);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dtw)->Arg(50)->Arg(100)->Arg(200)->Arg(400)->Complexity(benchmark::oNSquared);

static void BM_PairwiseDistanceCosine(benchmark::State& state) {
    Rng rng = substream(2, "bench-pdist");
    const int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd zx(20, n), zy(20, n + n / 5);
    for (int j = 0; j < zx.cols(); ++j)
        for (int i = 0; i < 20; ++i) zx(i, j) = gaussian(rng);
    for (int j = 0; j < zy.cols(); ++j)
        for (int i = 0; i < 20; ++i) zy(i, j) = gaussian(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pairwise_distance(zx, zy, DtwMetric::cosine).sum());
    }
}
BENCHMARK(BM_PairwiseDistanceCosine)->Arg(100)->Arg(200)->Arg(400);

BENCHMARK_MAIN();
