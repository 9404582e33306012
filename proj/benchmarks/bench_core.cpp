#include "rangefuse/fusion.hpp"
#include "rangefuse/lut.hpp"
#include "rangefuse/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace rangefuse;

const SynthData& dataset() {
    static const SynthData data = gen_set(range_biased_spec(2024, 128, 4, 4));
    return data;
}

ReferenceBatch reference_batch() {
    const SynthData& d = dataset();
    ReferenceBatch batch(d.ref.preds.size());
    for (std::size_t n = 0; n < d.ref.gt.size(); ++n) batch.append(d.ref.gt[n], d.ref.predictions_for(n));
    return batch;
}

void BM_PartitionReference(benchmark::State& state) {
    const ReferenceBatch batch = reference_batch();
    const BinSpace space(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(partition_reference(batch, space));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_PartitionReference)->Arg(16)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_RunMpem(benchmark::State& state) {
    Xoshiro256 rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    BinGroup group;
    group.key.indices = {0, 0};
    group.pred_values.assign(2, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const bool first = rng.uniform() < 0.7;
        group.gt_values.push_back((first ? 100.0 : 120.0) + 2.0 * rng.normal());
        group.pred_values[0][i] = 100.0 + rng.normal();
        group.pred_values[1][i] = 120.0 + rng.normal();
        group.pixel_indices.push_back(i);
    }
    EmConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(run_mpem(group, cfg));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RunMpem)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_FuseWithLut(benchmark::State& state) {
    const SynthData& d = dataset();
    const WeightLut lut = estimate_lut(reference_batch(), BinSpace(static_cast<int>(state.range(0))), EmConfig{});
    const auto preds = d.test.predictions_for(0);
    for (auto _ : state) benchmark::DoNotOptimize(fuse_with_lut(preds, lut));
}
BENCHMARK(BM_FuseWithLut)->Arg(16)->Arg(32)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FuseZzpm(benchmark::State& state) {
    const auto preds = dataset().test.predictions_for(0);
    for (auto _ : state) benchmark::DoNotOptimize(fuse_zzpm(preds));
}
BENCHMARK(BM_FuseZzpm)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
