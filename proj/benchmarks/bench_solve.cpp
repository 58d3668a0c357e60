#include <benchmark/benchmark.h>

#include <cmath>

#include "spde/harness.hpp"

namespace {

using namespace spde;

void BM_SpectralSolve(benchmark::State& state) {
    const TestProblem prob = transport_diffusion_1d();
    const GridPtr g = prob.make_grid(state.range(0));
    const SemidiscreteProblem bound = prob.instantiate(g, 0.5);
    const WienerPath path = sample_path(1, 0, make_uniform_time_grid(0.5, 1), 1);
    for (auto _ : state) {
        PathSolution sol = solve_spectral_exact(bound, path);
        benchmark::DoNotOptimize(sol.terminal.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SpectralSolve)->RangeMultiplier(2)->Range(64, 1024);

void BM_EulerMaruyamaPath(benchmark::State& state) {
    const TestProblem prob = transport_diffusion_1d();
    const GridPtr g = prob.make_grid(64);
    const SemidiscreteProblem bound = prob.instantiate(g, 0.5);
    const WienerPath path =
        sample_path(1, 0, make_uniform_time_grid(0.5, state.range(0)), 1);
    for (auto _ : state) {
        PathSolution sol = solve_path(bound, TimeScheme::euler_maruyama, path);
        benchmark::DoNotOptimize(sol.terminal.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EulerMaruyamaPath)->RangeMultiplier(2)->Range(128, 1024);

void BM_DriftImplicitPath(benchmark::State& state) {
    const TestProblem prob = variable_coefficient_1d();
    const GridPtr g = prob.make_grid(64);
    const SemidiscreteProblem bound = prob.instantiate(g, 0.25);
    const WienerPath path =
        sample_path(1, 0, make_uniform_time_grid(0.25, state.range(0)), 0);
    for (auto _ : state) {
        PathSolution sol = solve_path(bound, TimeScheme::drift_implicit, path);
        benchmark::DoNotOptimize(sol.terminal.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DriftImplicitPath)->RangeMultiplier(2)->Range(32, 256);

void BM_SamplePath(benchmark::State& state) {
    const auto grid = make_uniform_time_grid(1.0, state.range(0));
    for (auto _ : state) {
        WienerPath path = sample_path(9, 4, grid, 1);
        benchmark::DoNotOptimize(path.raw_increments().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SamplePath)->RangeMultiplier(8)->Range(64, 32768);

void BM_Extrapolate(benchmark::State& state) {
    const TestProblem prob = deterministic_heat_1d();
    std::vector<GridPtr> grids{prob.make_grid(state.range(0))};
    grids.push_back(refine(grids[0]));
    grids.push_back(refine(grids[1]));
    std::vector<GridFunction> sols;
    for (const auto& g : grids)
        sols.push_back(GridFunction::sample(g, [](auto x) { return std::sin(x[0]); }));
    const ExtrapolationWeights w = coefficients(2, 2);
    for (auto _ : state) {
        GridFunction out = extrapolate(sols, w);
        benchmark::DoNotOptimize(out.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Extrapolate)->RangeMultiplier(4)->Range(64, 4096);

void BM_ConvergenceRun(benchmark::State& state) {
    ExperimentConfig cfg;
    cfg.problem = "transport_diffusion_1d";
    cfg.coarse_extent = 16;
    cfg.refinements = 3;
    cfg.level = 1;
    cfg.paths = state.range(0);
    cfg.master_seed = 11;
    for (auto _ : state) {
        ConvergenceTable table = run_convergence(cfg);
        benchmark::DoNotOptimize(table.rows.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConvergenceRun)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
