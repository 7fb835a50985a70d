#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "truffle/model.hpp"

using namespace truffle;

static void BM_EndToEnd(benchmark::State& state) {
    const model::PhaseBreakdown phases{.alpha_ms = 20,
                                       .upsilon_ms = 2375,
                                       .eta_ms = 0,
                                       .delta_ms = 1291,
                                       .gamma_ms = 15};
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::end_to_end(phases, true));
    }
}
BENCHMARK(BM_EndToEnd);

static void BM_Analyze(benchmark::State& state) {
    const model::PhaseBreakdown phases{.alpha_ms = 34,
                                       .upsilon_ms = 1660,
                                       .eta_ms = 0,
                                       .delta_ms = 2481,
                                       .gamma_ms = 15};
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::analyze(phases));
    }
}
BENCHMARK(BM_Analyze);

static void BM_WorkflowObjective(benchmark::State& state) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<model::Millis> dist(0, 5000);
    std::vector<model::PhaseBreakdown> stages(static_cast<std::size_t>(state.range(0)));
    for (auto& s : stages) {
        s = {.alpha_ms = dist(rng),
             .upsilon_ms = dist(rng),
             .eta_ms = dist(rng),
             .delta_ms = dist(rng),
             .gamma_ms = dist(rng)};
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::workflow_objective(stages));
    }
}
BENCHMARK(BM_WorkflowObjective)->Range(1, 1 << 10);

BENCHMARK_MAIN();
