#include "spde/testbed.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double terminal_w(const WienerPath& path, int rho = 0) {
    return path.value_at_index(path.step_count())[static_cast<std::size_t>(rho)];
}

}  // namespace

GridPtr TestProblem::make_grid(std::int64_t extent) const {
    return build_grid(dim, kTwoPi / static_cast<double>(extent), extent,
                      std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                      BoundaryMode::periodic, 0);
}

SemidiscreteProblem TestProblem::instantiate(const GridPtr& grid, double horizon) const {
    return SemidiscreteProblem{spec, grid, GridFunction::sample(grid, initial),
                               horizon > 0.0 ? horizon : default_horizon};
}

TestProblem deterministic_heat_1d() {
    TestProblem p;
    p.name = "deterministic_heat_1d";
    p.dim = 1;
    p.noise_count = 0;
    p.default_horizon = 0.2;
    p.spec.add_diffusion({1}, CoeffField::constant(1.0));
    p.spec.set_noise_count(0);
    p.continuous = ContinuousOperator::constant({1.0}, {0.0}, 0.0, {}, {}, 1, 0);
    p.initial = [](std::span<const double> x) { return std::sin(x[0]) + std::sin(3.0 * x[0]); };
    p.oracle = [](double T, std::span<const double> x, const WienerPath&) {
        return std::exp(-T) * std::sin(x[0]) + std::exp(-9.0 * T) * std::sin(3.0 * x[0]);
    };
    p.flags = {.spectral_exact_ok = true, .degenerate = false, .deterministic = true,
               .surrogate_oracle = false};
    return p;
}

TestProblem transport_diffusion_1d() {
    TestProblem p;
    p.name = "transport_diffusion_1d";
    p.dim = 1;
    p.noise_count = 1;
    p.default_horizon = 0.5;
    p.spec.add_diffusion({1}, CoeffField::constant(0.5));
    p.spec.set_noise_count(1);
    p.spec.add_noise_gradient(0, {1}, CoeffField::constant(1.0));
    p.continuous = ContinuousOperator::constant({0.5}, {0.0}, 0.0, {1.0}, {0.0}, 1, 1);
    p.initial = [](std::span<const double> x) { return std::sin(x[0]); };
    p.oracle = [](double, std::span<const double> x, const WienerPath& path) {
        return std::sin(x[0] + terminal_w(path));
    };
    p.flags = {.spectral_exact_ok = true, .degenerate = true, .deterministic = false,
               .surrogate_oracle = false};
    return p;
}

TestProblem additive_noise_manufactured_1d() {
    TestProblem p;
    p.name = "additive_noise_manufactured_1d";
    p.dim = 1;
    p.noise_count = 1;
    p.default_horizon = 0.25;
    p.spec.add_diffusion({1}, CoeffField::constant(1.0));
    p.spec.set_noise_count(1);
    // d(sin x (1 + W_t)) = sin x dW; the equation du = (u_xx + f) dt + g dW
    // matches with g = sin x and f = -u_xx = sin(x)(1 + W_t).
    p.spec.set_free_noise(0, ForcingField::of([](double, std::span<const double> x,
                                                 std::span<const double>) {
        return std::sin(x[0]);
    }));
    p.spec.set_free_drift(ForcingField::of([](double, std::span<const double> x,
                                              std::span<const double> w) {
        return std::sin(x[0]) * (1.0 + (w.empty() ? 0.0 : w[0]));
    }));
    p.continuous = ContinuousOperator::constant({1.0}, {0.0}, 0.0, {0.0}, {0.0}, 1, 1);
    p.initial = [](std::span<const double> x) { return std::sin(x[0]); };
    p.oracle = [](double, std::span<const double> x, const WienerPath& path) {
        return std::sin(x[0]) * (1.0 + terminal_w(path));
    };
    p.flags = {.spectral_exact_ok = false, .degenerate = false, .deterministic = false,
               .surrogate_oracle = false};
    return p;
}

TestProblem variable_coefficient_1d() {
    TestProblem p;
    p.name = "variable_coefficient_1d";
    p.dim = 1;
    p.noise_count = 0;
    p.default_horizon = 0.25;
    p.spec.add_diffusion({1}, CoeffField::of(
        [](double, std::span<const double> x) { return 1.0 + 0.5 * std::sin(x[0]); },
        /*time_independent=*/true));
    p.spec.set_noise_count(0);
    p.continuous.dim = 1;
    p.continuous.noise_count = 0;
    p.continuous.a = [](double, std::span<const double> x) {
        return std::vector<double>{1.0 + 0.5 * std::sin(x[0])};
    };
    p.continuous.b = [](double, std::span<const double>) { return std::vector<double>{0.0}; };
    p.continuous.c = CoeffField::constant(0.0);
    p.continuous.sigma = [](double, std::span<const double>) { return std::vector<double>{}; };
    p.continuous.nu = [](double, std::span<const double>) { return std::vector<double>{}; };
    p.initial = [](std::span<const double> x) { return std::sin(x[0]); };
    p.oracle = nullptr;
    p.flags = {.spectral_exact_ok = false, .degenerate = false, .deterministic = true,
               .surrogate_oracle = true};
    return p;
}

TestProblem advection_diffusion_1d() {
    TestProblem p;
    p.name = "advection_diffusion_1d";
    p.dim = 1;
    p.noise_count = 0;
    p.default_horizon = 0.5;
    p.spec.add_diffusion({1}, CoeffField::constant(1.0));
    p.spec.add_drift({1}, CoeffField::constant(1.0));
    p.spec.set_symmetric_mode(false);
    p.spec.set_noise_count(0);
    p.continuous = ContinuousOperator::constant({1.0}, {1.0}, 0.0, {}, {}, 1, 0);
    p.initial = [](std::span<const double> x) { return std::sin(x[0]); };
    p.oracle = [](double T, std::span<const double> x, const WienerPath&) {
        return std::exp(-T) * std::sin(x[0] + T);
    };
    p.flags = {.spectral_exact_ok = true, .degenerate = false, .deterministic = true,
               .surrogate_oracle = false};
    return p;
}

std::vector<std::string> problem_names() {
    return {"deterministic_heat_1d", "transport_diffusion_1d",
            "additive_noise_manufactured_1d", "variable_coefficient_1d",
            "advection_diffusion_1d"};
}

TestProblem problem_by_name(const std::string& name) {
    if (name == "deterministic_heat_1d") return deterministic_heat_1d();
    if (name == "transport_diffusion_1d") return transport_diffusion_1d();
    if (name == "additive_noise_manufactured_1d") return additive_noise_manufactured_1d();
    if (name == "variable_coefficient_1d") return variable_coefficient_1d();
    if (name == "advection_diffusion_1d") return advection_diffusion_1d();
    std::string names;
    for (const auto& n : problem_names()) names += (names.empty() ? "" : ", ") + n;
    throw std::invalid_argument("testbed: unknown problem '" + name +
                                "'; available: " + names);
}

}  // namespace spde
