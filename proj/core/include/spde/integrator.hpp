#pragma once

#include <complex>
#include <span>
#include <vector>

#include "spde/lattice.hpp"
#include "spde/noise.hpp"
#include "spde/stencil.hpp"

namespace spde {

/// Cauchy problem for the semidiscrete system
///   du^h = (L_h u^h + f) dt + sum_rho (M_h^rho u^h + g^rho) dW^rho
/// on a fixed grid, integrated from the sampled initial state to `horizon`.
struct SemidiscreteProblem {
    OperatorSpec spec;
    GridPtr grid;
    GridFunction initial;
    double horizon = 0.0;
};

struct PathSolution {
    GridFunction terminal;
    std::int64_t steps = 0;
    double max_abs = 0.0;  // max |value| seen over the whole run
};

enum class TimeScheme { euler_maruyama, drift_implicit, spectral_exact };

struct CflReport {
    double ratio = 0.0;  // tau * (2/h^2) * sum_l max|a_l| |l|^2
    bool pass = true;
};

/// Sufficient explicit-stability heuristic for the drift part.
CflReport cfl_guard(const SemidiscreteProblem& problem, double tau);

/// One explicit Euler-Maruyama step:
///   u + tau (L_h u + f(t)) + sum_rho (M_h^rho u + g^rho(t)) dW^rho.
/// w_old holds W(t) for path-dependent free terms (empty if unused).
GridFunction step_euler_maruyama(const SemidiscreteProblem& problem, const GridFunction& u,
                                 double t, double tau, std::span<const double> dW,
                                 std::span<const double> w_old = {});

/// One drift-implicit step: solves
///   (I - tau L_{h,t+tau}) u' = u + tau f(t+tau) + sum_rho (M_h^rho u + g^rho(t)) dW^rho
/// with the stochastic terms explicit. The linear solve is matrix-free
/// BiCGSTAB with Jacobi preconditioning to relative residual 1e-12.
GridFunction step_drift_implicit(const SemidiscreteProblem& problem, const GridFunction& u,
                                 double t, double tau, std::span<const double> dW,
                                 std::span<const double> w_old = {},
                                 std::span<const double> w_new = {});

/// March the chosen scheme over the path's time grid. The grid must end at
/// the problem horizon. Explicit stepping requires the CFL guard to pass;
/// any scheme aborts when max|u| exceeds 1e12.
PathSolution solve_path(const SemidiscreteProblem& problem, TimeScheme scheme,
                        const WienerPath& path);

/// Exact per-path solution of the semidiscrete system via discrete Fourier
/// diagonalization: per mode m,
///   u_hat_m(T) = u_hat_m(0) * exp((Lhat_m - 1/2 sum_rho (Mhat_m^rho)^2) T
///                                 + sum_rho Mhat_m^rho W^rho_T).
/// Requires a periodic grid, constant coefficients and zero free terms; the
/// time-discretization error is exactly zero, so measured convergence rates
/// are purely spatial. Throws if the imaginary residue of the inverse
/// transform exceeds 1e-10 * max(1, max|u|).
PathSolution solve_spectral_exact(const SemidiscreteProblem& problem, const WienerPath& path);

/// Fourier symbols of L_h and every M_h^rho, one entry per mode (flat mode
/// index follows the grid's node ordering). Periodic + constant coefficients.
struct OperatorSymbols {
    std::vector<std::complex<double>> L;
    std::vector<std::vector<std::complex<double>>> M;  // [rho][mode]
};
OperatorSymbols operator_symbols(const OperatorSpec& spec, const Grid& grid);

}  // namespace spde
