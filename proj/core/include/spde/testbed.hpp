#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spde/integrator.hpp"

namespace spde {

struct ProblemFlags {
    bool spectral_exact_ok = false;
    bool degenerate = false;      // stochastic parabolicity holds with equality
    bool deterministic = false;
    bool surrogate_oracle = false;
};

/// Grid-independent test problem: operator coefficients, initial profile,
/// continuous-operator counterpart for consistency checks, and a terminal
/// oracle. Built-in oracles are analytically exact per path; problems flagged
/// surrogate_oracle have no closed form and are referenced against a much
/// finer solve instead.
struct TestProblem {
    std::string name;
    int dim = 1;
    int noise_count = 0;
    double default_horizon = 0.5;
    OperatorSpec spec;
    ContinuousOperator continuous;
    std::function<double(std::span<const double>)> initial;
    /// Exact terminal value u(T, x) for the given path; null for surrogates.
    std::function<double(double, std::span<const double>, const WienerPath&)> oracle;
    ProblemFlags flags;

    /// Periodic grid over [0, 2*pi)^dim with `extent` nodes per axis.
    GridPtr make_grid(std::int64_t extent) const;
    /// Bind to a grid; horizon <= 0 selects the problem default.
    SemidiscreteProblem instantiate(const GridPtr& grid, double horizon = 0.0) const;
};

/// du = u_xx dt on [0, 2pi), u0 = sin x + sin 3x.
/// Oracle: u(T,x) = e^{-T} sin x + e^{-9T} sin 3x.
TestProblem deterministic_heat_1d();

/// du = (1/2) u_xx dt + u_x dW, u0 = sin x. Degenerate (a - sigma^2/2 = 0);
/// oracle u(T,x) = sin(x + W_T) is exact pathwise by the Ito formula.
TestProblem transport_diffusion_1d();

/// Manufactured target u(t,x) = sin(x)(1 + W_t), realized by L = d^2/dx^2,
/// g = sin x and the path-dependent free drift f = sin(x)(1 + W_t).
/// Free terms make it ineligible for spectral integration.
TestProblem additive_noise_manufactured_1d();

/// a(x) = 1 + (1/2) sin x, u0 = sin x, no noise. No closed-form oracle;
/// referenced against a fine drift-implicit solve (surrogate).
TestProblem variable_coefficient_1d();

/// du = (u_xx + u_x) dt with the forward-difference drift discretization
/// (symmetric_mode off), u0 = sin x. Oracle: u(T,x) = e^{-T} sin(x + T).
/// First-order in h, which is the general-expansion extrapolation regime.
TestProblem advection_diffusion_1d();

std::vector<std::string> problem_names();
/// Throws std::invalid_argument listing available names when unknown.
TestProblem problem_by_name(const std::string& name);

}  // namespace spde
