#include <benchmark/benchmark.h>

#include "transience/mlp.hpp"

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

static void BM_ForwardBackward(benchmark::State& state) {
    Rng rng = substream(1, "bench-mlp");
    Mlp net = make_mlp(75, {200, 100, 100}, 20, 0.03, rng);
    Eigen::MatrixXd x = random_matrix(75, static_cast<int>(state.range(0)), rng);
    for (auto _ : state) {
        ForwardCache cache;
        Eigen::MatrixXd out = forward(net, x, &cache);
        MlpGrads grads = zero_grads(net);
        backward(net, cache, out, grads);
        benchmark::DoNotOptimize(grads.layers[0].weights.sum());
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(512);

static void BM_AdamStep(benchmark::State& state) {
    Rng rng = substream(2, "bench-adam");
    Mlp net = make_mlp(75, {200, 100, 100}, 20, 0.03, rng);
    AdamState adam = make_adam_state(net);
    MlpGrads grads = zero_grads(net);
    for (auto& layer : grads.layers) {
        layer.weights.setConstant(1e-3);
        layer.bias.setConstant(1e-3);
    }
    for (auto _ : state) {
        adam_step(net, grads, adam);
        benchmark::DoNotOptimize(net.layers[0].weights(0, 0));
    }
}
BENCHMARK(BM_AdamStep)->Arg(0);

BENCHMARK_MAIN();
