// Serial reference vs OpenMP kernels on criterion-5 sized batches.
//
//   bench_kernels --benchmark_filter=forward

#include <random>

#include <benchmark/benchmark.h>

#include "cmm/encoder.hpp"
#include "cmm/gradcheck.hpp"
#include "cmm/kernels.hpp"
#include "cmm/random.hpp"

namespace {

using cmm::kernels::Execution;

constexpr std::size_t kFeatures = 64;
constexpr std::size_t kOut = 21;

struct Batch {
    std::vector<double> x, w, b, logits, upstream;
    std::vector<cmm::LabelSet> labels;
    std::vector<const cmm::LabelSet*> label_ptrs;

    explicit Batch(std::size_t n) {
        auto rng = cmm::make_engine(1, {n});
        std::normal_distribution<double> normal(0.0, 1.0);
        std::bernoulli_distribution positive(0.03);
        auto fill = [&](std::vector<double>& v, std::size_t size) {
            v.resize(size);
            for (auto& e : v) e = normal(rng);
        };
        fill(x, n * kFeatures);
        fill(w, kOut * kFeatures);
        fill(b, kOut);
        fill(logits, n * kOut);
        fill(upstream, n * kOut);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<int> pos;
            for (int r = 1; r < static_cast<int>(kOut); ++r) {
                if (positive(rng)) pos.push_back(r);
            }
            labels.push_back(cmm::LabelSet::from_positives(pos, kOut - 1));
        }
        for (const auto& l : labels) label_ptrs.push_back(&l);
    }
};

Execution mode(const benchmark::State& state) {
    return state.range(1) == 0 ? Execution::serial : Execution::parallel;
}

void BM_AffineForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Batch batch(n);
    std::vector<double> out(n * kOut);
    for (auto _ : state) {
        cmm::kernels::affine_forward(mode(state), {batch.x, n, kFeatures}, {batch.w, kOut, kFeatures}, batch.b, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_AffineBackwardParams(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Batch batch(n);
    std::vector<double> gw(kOut * kFeatures), gb(kOut);
    for (auto _ : state) {
        cmm::kernels::affine_backward_params(mode(state), {batch.x, n, kFeatures}, {batch.upstream, n, kOut}, gw, gb);
        benchmark::DoNotOptimize(gw.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_LossRows(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Batch batch(n);
    std::vector<double> values(n), grads(n * kOut);
    const cmm::LossConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cmm::kernels::loss_rows(mode(state), {batch.logits, n, kOut}, batch.label_ptrs, cfg,
                                                         values, grads));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_GradCheck(benchmark::State& state) {
    const auto trials = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cmm::check_gradients(cmm::GradCheckRanges{}, trials, 1e-5, 1, mode(state)));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trials));
}

// args: {rows, 0 = serial | 1 = parallel}
void rows_args(benchmark::internal::Benchmark* b) {
    for (std::int64_t n : {150, 2048, 15000}) {
        b->Args({n, 0});
        b->Args({n, 1});
    }
    b->ArgNames({"rows", "parallel"});
}

} // namespace

BENCHMARK(BM_AffineForward)->Apply(rows_args);
BENCHMARK(BM_AffineBackwardParams)->Apply(rows_args);
BENCHMARK(BM_LossRows)->Apply(rows_args);
BENCHMARK(BM_GradCheck)->Args({1000, 0})->Args({1000, 1})->ArgNames({"trials", "parallel"});

BENCHMARK_MAIN();
