#include <benchmark/benchmark.h>

#include "dect/trainer.hpp"

namespace {

using namespace dect;

struct TrainFixture {
    PhantomSpec spec;
    std::vector<SampleRecord> paired, labeled;
    TrainConfig cfg;
    TrainFixture() {
        paired = make_dataset(spec, 4, 8, DatasetRole::paired, 1);
        labeled = make_dataset(spec, 4, 8, DatasetRole::labeled, 2);
        cfg.mode = TrainMode::joint;
    }
};

void BM_JointTrainStep(benchmark::State& state) {
    TrainFixture fx;
    auto gen = init_generator<float>(16, 4, 1);
    auto cls = init_classifier<float>(16, 3, 2);
    auto plans = mixed_batch_sampler(fx.paired.size(), fx.labeled.size(), fx.cfg, 7);
    size_t at = 0;
    for (auto _ : state) {
        auto batch = assemble_batch(fx.paired, fx.labeled, plans[at++ % plans.size()]);
        auto b = train_step_joint(gen, cls, batch, fx.cfg, 2e-4);
        benchmark::DoNotOptimize(b.combined);
    }
}
BENCHMARK(BM_JointTrainStep)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward64(benchmark::State& state) {
    TrainFixture fx;
    auto gen = init_generator<float>(16, 4, 3);
    std::vector<const std::vector<float>*> imgs;
    for (int i = 0; i < 8; ++i) imgs.push_back(&fx.paired[i].poly);
    auto x = stack_images(imgs, 64, 64);
    for (auto _ : state) {
        NoGradGuard guard;
        auto y = gen.forward(x);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(BM_GeneratorForward64)->Unit(benchmark::kMillisecond);

void BM_PhantomRender(benchmark::State& state) {
    PhantomSpec spec;
    uint32_t slice = 0;
    for (auto _ : state) {
        auto rec = render_phantom(spec, 1, slice++);
        benchmark::DoNotOptimize(rec.poly.data());
    }
}
BENCHMARK(BM_PhantomRender);

}  // namespace

BENCHMARK_MAIN();
