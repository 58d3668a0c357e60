#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "spde/stencil.hpp"

namespace {

using namespace spde;

GridPtr periodic_1d(std::int64_t n) {
    return build_grid(1, 2.0 * std::numbers::pi / static_cast<double>(n), n, {0.0},
                      BoundaryMode::periodic, 0);
}

OperatorSpec transport_spec() {
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::constant(0.5));
    spec.set_noise_count(1);
    spec.add_noise_gradient(0, {1}, CoeffField::constant(1.0));
    return spec;
}

void BM_ApplyL(benchmark::State& state) {
    const GridPtr g = periodic_1d(state.range(0));
    const OperatorSpec spec = transport_spec();
    const SampledOperator op = SampledOperator::sample(spec, g, 0.0);
    const GridFunction u = GridFunction::sample(g, [](auto x) { return std::sin(x[0]); });
    GridFunction out(g);
    for (auto _ : state) {
        op.apply_L(u.values(), out.values());
        benchmark::DoNotOptimize(out.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ApplyL)->RangeMultiplier(4)->Range(256, 16384);

void BM_SampleOperator(benchmark::State& state) {
    const GridPtr g = periodic_1d(state.range(0));
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::of(
        [](double, std::span<const double> x) { return 1.0 + 0.5 * std::sin(x[0]); }, true));
    for (auto _ : state) {
        SampledOperator op = SampledOperator::sample(spec, g, 0.0);
        benchmark::DoNotOptimize(op);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleOperator)->RangeMultiplier(4)->Range(256, 16384);

void BM_DiffSecond(benchmark::State& state) {
    const GridPtr g = periodic_1d(state.range(0));
    const GridFunction u = GridFunction::sample(g, [](auto x) { return std::sin(3.0 * x[0]); });
    for (auto _ : state) {
        GridFunction d = diff_second(u, {1});
        benchmark::DoNotOptimize(d.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DiffSecond)->RangeMultiplier(4)->Range(256, 16384);

}  // namespace
