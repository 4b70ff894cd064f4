#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/sampling.hpp"

namespace {

using namespace fedsim;

ModelSpec bench_spec() {
    return ModelSpec{Architecture::LogisticRegression, 32, 10, 0};
}

ParamVector random_params(const ModelSpec& spec, RngStream& rng) {
    ParamVector w(parameter_count(spec));
    for (auto& v : w) {
        v = 0.5 * rng.next_normal();
    }
    return w;
}

void BM_LocalUpdate(benchmark::State& state) {
    auto spec = bench_spec();
    auto ds = synth_dataset(10, 32, 50, 3.0, RngStream(1));
    ClientShard shard{0, {}};
    shard.indices.resize(static_cast<std::size_t>(ds.n()));
    std::iota(shard.indices.begin(), shard.indices.end(), 0);

    RngStream rng(2);
    auto w = random_params(spec, rng);
    LocalHyper hyper;
    hyper.eta = 0.05;
    hyper.momentum = 0.9;
    hyper.batch_size = 32;
    hyper.local_epochs = static_cast<int>(state.range(0));

    std::uint64_t round = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            local_update(w, spec, ds, shard, hyper, RngStream(3).derive(round++)));
    }
}
BENCHMARK(BM_LocalUpdate)->Arg(1)->Arg(5);

void BM_CombinatorialFilter(benchmark::State& state) {
    auto spec = bench_spec();
    const int n_models = static_cast<int>(state.range(0));
    RngStream rng(4);
    ModelMap models;
    for (int k = 0; k < n_models; ++k) {
        models.emplace(k, random_params(spec, rng));
    }
    auto val = synth_dataset(10, 32, 50, 3.0, RngStream(5));

    for (auto _ : state) {
        benchmark::DoNotOptimize(combinatorial_filter(models, val.features, val.labels, spec,
                                                      ScoreKind::ClassificationLoss));
    }
    state.SetComplexityN(n_models);
}
BENCHMARK(BM_CombinatorialFilter)->DenseRange(4, 12, 2)->Complexity(benchmark::o1);

void BM_BetaSample(benchmark::State& state) {
    RngStream rng(6);
    double alpha = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(beta_sample(alpha, 3.0, rng));
        alpha = alpha < 50.0 ? alpha + 0.25 : 1.0;
    }
}
BENCHMARK(BM_BetaSample);

void BM_PartitionClassHeterogeneity(benchmark::State& state) {
    auto ds = synth_dataset(10, 8, 500, 3.0, RngStream(7));
    PartitionSpec spec{PartitionScheme::ClassHeterogeneity, 0.1, 20, 200};
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(partition_class_heterogeneity(ds, spec, RngStream(seed++)));
    }
}
BENCHMARK(BM_PartitionClassHeterogeneity);

} // namespace

BENCHMARK_MAIN();
