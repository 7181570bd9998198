#include <benchmark/benchmark.h>

#include "kglp/rescal_als.hpp"
#include "kglp/rng.hpp"

using namespace kglp;

namespace {

std::vector<SparseSlice> random_slices(int n_entities, int n_relations, int degree,
                                       std::uint64_t seed) {
    std::vector<SparseSlice> slices;
    Rng rng(seed);
    for (int k = 0; k < n_relations; ++k) {
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(n_entities) * static_cast<std::size_t>(degree));
        for (int i = 0; i < n_entities; ++i) {
            for (int d = 0; d < degree; ++d) {
                entries.emplace_back(
                    i, static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_entities))),
                    1.0);
            }
        }
        SparseSlice s(n_entities, n_entities);
        s.setFromTriplets(entries.begin(), entries.end());
        slices.push_back(std::move(s));
    }
    return slices;
}

}  // namespace

static void als_iteration(benchmark::State& state) {
    const auto n = static_cast<int>(state.range(0));
    const auto slices = random_slices(n, 4, 8, 17);
    AlsOptions opts;
    opts.rank = 16;
    opts.lambda_entities = 1e-2;
    opts.lambda_relations = 1e-2;
    opts.max_iters = 1;
    opts.trace_half_updates = false;
    opts.seed = 3;
    double nnz = 0;
    for (const auto& s : slices) nnz += static_cast<double>(s.nonZeros());
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_rescal_als(slices, opts));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(nnz));
}
BENCHMARK(als_iteration)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond);

static void als_parallel_relations(benchmark::State& state) {
    const auto slices = random_slices(1024, 8, 8, 21);
    AlsOptions opts;
    opts.rank = 16;
    opts.lambda_entities = 1e-2;
    opts.lambda_relations = 1e-2;
    opts.max_iters = 2;
    opts.trace_half_updates = false;
    opts.threads = static_cast<int>(state.range(0));
    opts.seed = 9;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_rescal_als(slices, opts));
    }
}
BENCHMARK(als_parallel_relations)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
