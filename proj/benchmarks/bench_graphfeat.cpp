#include <benchmark/benchmark.h>

#include "kglp/graphfeat.hpp"
#include "kglp/sampling.hpp"
#include "support/fixtures.hpp"

using namespace kglp;

static void path_feature_extraction(benchmark::State& state) {
    const auto lines =
        testing::random_triples(static_cast<int>(state.range(0)), 4, 0.02, 31);
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const auto types = enumerate_path_types(kg, 0, 2, 64, 5);
    Rng rng(8);
    for (auto _ : state) {
        const auto i = static_cast<EntityId>(
            rng.uniform_index(static_cast<std::uint64_t>(kg.num_entities())));
        const auto j = static_cast<EntityId>(
            rng.uniform_index(static_cast<std::uint64_t>(kg.num_entities())));
        benchmark::DoNotOptimize(pra_features(kg, i, j, 0, types));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(types.size()));
}
BENCHMARK(path_feature_extraction)->Arg(64)->Arg(128)->Arg(256);

static void perturbation_sampling(benchmark::State& state) {
    const auto lines = testing::random_triples(200, 4, 0.01, 77);
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const TypeConstraints tc = infer_type_constraints(kg);
    std::size_t at = 0;
    std::uint64_t salt = 0;
    for (auto _ : state) {
        const Triple& t = kg.positives()[at];
        benchmark::DoNotOptimize(perturb_negatives(kg, t, 1, tc, salt++));
        at = (at + 1) % kg.positives().size();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(perturbation_sampling);
