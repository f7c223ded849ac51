#include <benchmark/benchmark.h>

#include "transience/losses.hpp"

using namespace transience;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = gaussian(rng);
    }
    return m;
}

}  // namespace

static void BM_CcaLoss(benchmark::State& state) {
    Rng rng = substream(1, "bench-cca");
    const int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd zx = random_matrix(20, n, rng);
    Eigen::MatrixXd zy = random_matrix(20, n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cca_loss(zx, zy, 1e-4).value);
    }
}
BENCHMARK(BM_CcaLoss)->Arg(128)->Arg(512);

static void BM_MmiLoss(benchmark::State& state) {
    Rng rng = substream(2, "bench-mmi");
    const int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd zx = random_matrix(20, n, rng);
    Eigen::MatrixXd zy = random_matrix(20, n, rng);
    KdeBandwidths bw;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mmi_loss(zx, zy, bw, MmiMode::sample_mean).value);
    }
}
BENCHMARK(BM_MmiLoss)->Arg(128)->Arg(512);

static void BM_ContrastiveLoss(benchmark::State& state) {
    Rng rng = substream(3, "bench-contrastive");
    const int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd zx = random_matrix(20, n, rng);
    Eigen::MatrixXd zy = random_matrix(20, n, rng);
    std::vector<int> negatives = circular_derangement(n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(contrastive_loss(zx, zy, negatives, 0.5).value);
    }
}
BENCHMARK(BM_ContrastiveLoss)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
