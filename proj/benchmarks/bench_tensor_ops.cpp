#include <benchmark/benchmark.h>

#include "dect/losses.hpp"
#include "dect/metrics.hpp"
#include "dect/nn_ops.hpp"
#include "dect/rng.hpp"

namespace {

std::vector<float> random_buffer(size_t n, uint64_t seed) {
    dect::Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

// Residual-block geometry at the 64x64 desk scale: 64 channels at 16x16.
void BM_Conv2dForward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto x = dect::Tensor<float>::leaf({n, 64, 16, 16}, random_buffer(static_cast<size_t>(n) * 64 * 256, 1));
    auto w = dect::Tensor<float>::leaf({64, 64, 3, 3}, random_buffer(64 * 64 * 9, 2));
    auto b = dect::Tensor<float>::zeros({64});
    for (auto _ : state) {
        dect::NoGradGuard guard;
        auto y = dect::conv2d(x, w, b, 1, 1);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t{n} * 64 * 64 * 9 * 256);
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(4)->Arg(8);

void BM_Conv2dBackward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto w = dect::Tensor<float>::leaf({64, 64, 3, 3}, random_buffer(64 * 64 * 9, 3), true);
    auto b = dect::Tensor<float>::zeros({64}, true);
    for (auto _ : state) {
        auto x = dect::Tensor<float>::leaf({n, 64, 16, 16},
                                           random_buffer(static_cast<size_t>(n) * 64 * 256, 4), true);
        auto loss = dect::mean_all(dect::conv2d(x, w, b, 1, 1));
        dect::backward(loss);
        benchmark::DoNotOptimize(x.grad().data());
        w.zero_grad();
        b.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * int64_t{n} * 3 * 64 * 64 * 9 * 256);
}
BENCHMARK(BM_Conv2dBackward)->Arg(4)->Arg(8);

void BM_InstanceNorm(benchmark::State& state) {
    auto x = dect::Tensor<float>::leaf({8, 64, 16, 16}, random_buffer(8 * 64 * 256, 5));
    auto g = dect::Tensor<float>::full({64}, 1.0f);
    auto s = dect::Tensor<float>::zeros({64});
    for (auto _ : state) {
        dect::NoGradGuard guard;
        auto y = dect::instance_norm(x, g, s);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(BM_InstanceNorm);

void BM_Ssim64(benchmark::State& state) {
    dect::Rng rng(6);
    std::vector<double> a(64 * 64), b(64 * 64);
    for (size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(-1.0, 1.0);
        b[i] = rng.uniform(-1.0, 1.0);
    }
    for (auto _ : state) benchmark::DoNotOptimize(dect::ssim(a, b, 64, 64));
}
BENCHMARK(BM_Ssim64);

void BM_Auroc(benchmark::State& state) {
    dect::Rng rng(7);
    const size_t n = static_cast<size_t>(state.range(0));
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    for (size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform(0.0, 1.0);
        labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    for (auto _ : state) benchmark::DoNotOptimize(dect::auroc(scores, labels));
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
