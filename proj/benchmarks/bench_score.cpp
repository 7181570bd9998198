#include <benchmark/benchmark.h>

#include "kglp/latent.hpp"
#include "kglp/rng.hpp"

using namespace kglp;

namespace {

ModelConfig bench_config(ModelKind kind, int h) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.h_entity = h;
    cfg.h_relation = h / 2;
    cfg.h_additive = h;
    cfg.h_bilinear = 4;
    cfg.h_combined = h;
    return cfg;
}

void score_kind(benchmark::State& state, ModelKind kind) {
    const int n_entities = 1000;
    const int n_relations = 12;
    const LatentModel model =
        init_model(bench_config(kind, static_cast<int>(state.range(0))), n_entities, n_relations, 7);
    Rng rng(11);
    std::vector<Triple> triples(4096);
    for (auto& t : triples) {
        t = {static_cast<EntityId>(rng.uniform_index(n_entities)),
             static_cast<RelationId>(rng.uniform_index(n_relations)),
             static_cast<EntityId>(rng.uniform_index(n_entities))};
    }
    std::size_t at = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(score(model, triples[at]));
        at = (at + 1) & 4095;
    }
    state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK_CAPTURE(score_kind, rescal, ModelKind::rescal)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(score_kind, e_mlp, ModelKind::e_mlp)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(score_kind, er_mlp, ModelKind::er_mlp)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(score_kind, ntn, ModelKind::ntn)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(score_kind, se, ModelKind::se)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(score_kind, transe, ModelKind::transe)->Arg(16)->Arg(64);

BENCHMARK_MAIN();

static void gradient_step(benchmark::State& state) {
    const LatentModel model = init_model(bench_config(ModelKind::transe, 32), 1000, 8, 3);
    LatentModel live = model;
    Rng rng(5);
    for (auto _ : state) {
        const Triple t{static_cast<EntityId>(rng.uniform_index(1000)),
                       static_cast<RelationId>(rng.uniform_index(8)),
                       static_cast<EntityId>(rng.uniform_index(1000))};
        const ScoreGradient sg = score_with_gradient(live, t);
        apply_example_update(live, t, sg, 0.5, 1e-3, 1e-4);
        benchmark::DoNotOptimize(live);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(gradient_step);
