#include "spde/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spde {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("integrator: " + msg);
}
[[noreturn]] void abort_run(const std::string& msg) {
    throw std::runtime_error("integrator: " + msg);
}

constexpr double kBlowUpGuard = 1e12;

void check_finite(std::span<const double> u, const Grid& grid, double t,
                  const std::string& where) {
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(u.size()); ++i)
        if (!std::isfinite(u[static_cast<std::size_t>(i)])) {
            std::vector<double> x(static_cast<std::size_t>(grid.dim()));
            grid.coordinates(i, x);
            std::string coords;
            for (double v : x) coords += (coords.empty() ? "" : ",") + std::to_string(v);
            abort_run(where + ": non-finite value at node " + std::to_string(i) +
                      " x=(" + coords + "), t=" + std::to_string(t));
        }
}

// Evaluate a forcing field on every node; empty result for a zero field.
std::vector<double> sample_forcing(const ForcingField& f, const Grid& grid, double t,
                                   std::span<const double> w) {
    if (f.is_zero()) return {};
    std::vector<double> vals(static_cast<std::size_t>(grid.node_count()));
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
        grid.coordinates(i, x);
        vals[static_cast<std::size_t>(i)] = f(t, x, w);
    }
    return vals;
}

// Explicit part shared by both steps:
//   out = u + tau * (L u + f) [explicit drift only] + sum_rho (M^rho u + g^rho) dW^rho
// The implicit step passes explicit_drift = false and handles both L (in the
// solve) and f (at the new time level) itself.
void explicit_combination(const SemidiscreteProblem& problem, const SampledOperator& op_t,
                          std::span<const double> u, double t, double tau, bool explicit_drift,
                          std::span<const double> dW, std::span<const double> w_old,
                          std::span<double> out, std::vector<double>& scratch) {
    const Grid& grid = *problem.grid;
    const std::size_t n = static_cast<std::size_t>(grid.node_count());
    std::copy(u.begin(), u.end(), out.begin());

    if (explicit_drift) {
        scratch.resize(n);
        op_t.apply_L(u, scratch);
        for (std::size_t i = 0; i < n; ++i) out[i] += tau * scratch[i];
        const std::vector<double> f = sample_forcing(problem.spec.free_drift(), grid, t, w_old);
        if (!f.empty())
            for (std::size_t i = 0; i < n; ++i) out[i] += tau * f[i];
    }

    const int d1 = problem.spec.noise_count();
    if (d1 > 0 && static_cast<int>(dW.size()) != d1)
        fail("increment vector size does not match the noise count");
    for (int rho = 0; rho < d1; ++rho) {
        const double dw = dW[static_cast<std::size_t>(rho)];
        scratch.resize(n);
        op_t.apply_M(rho, u, scratch);
        for (std::size_t i = 0; i < n; ++i) out[i] += scratch[i] * dw;
        const std::vector<double> g =
            sample_forcing(problem.spec.free_noise(rho), grid, t, w_old);
        if (!g.empty())
            for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * dw;
    }
}

// Preconditioned BiCGSTAB for (I - tau L) x = b, matrix-free.
void solve_shifted(const SampledOperator& op, double tau, std::span<const double> b,
                   std::span<double> x) {
    const std::size_t n = b.size();
    std::vector<double> diag(n);
    op.diagonal_L(diag);
    for (auto& d : diag) {
        d = 1.0 - tau * d;
        if (std::abs(d) < 1e-14) d = 1.0;  // keep the Jacobi scaling sane
    }
    std::vector<double> lx(n);
    auto apply_A = [&](std::span<const double> v, std::span<double> out) {
        op.apply_L(v, lx);
        for (std::size_t i = 0; i < n; ++i) out[i] = v[i] - tau * lx[i];
    };
    auto dot = [n](std::span<const double> a, std::span<const double> c) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
        return s;
    };

    double b_norm = std::sqrt(dot(b, b));
    if (b_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return;
    }
    const double tol = 1e-12 * b_norm;

    std::vector<double> r(n), rhat(n), p(n, 0.0), v(n, 0.0), s(n), phat(n), shat(n), t(n);
    std::copy(b.begin(), b.end(), x.begin());  // initial guess b (identity-dominated system)
    apply_A(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    rhat = r;
    double rho_old = 1.0, alpha = 1.0, omega = 1.0;

    const int max_iter = 1000 + static_cast<int>(n);
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(dot(r, r)) <= tol) return;
        const double rho = dot(rhat, r);
        if (rho == 0.0) abort_run("drift-implicit solver breakdown (rho = 0)");
        if (it == 0) {
            p = r;
        } else {
            const double beta = (rho / rho_old) * (alpha / omega);
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for (std::size_t i = 0; i < n; ++i) phat[i] = p[i] / diag[i];
        apply_A(phat, v);
        alpha = rho / dot(rhat, v);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (std::sqrt(dot(s, s)) <= tol) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
            return;
        }
        for (std::size_t i = 0; i < n; ++i) shat[i] = s[i] / diag[i];
        apply_A(shat, t);
        const double tt = dot(t, t);
        if (tt == 0.0) abort_run("drift-implicit solver breakdown (t = 0)");
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        rho_old = rho;
    }
    apply_A(x, lx);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (b[i] - lx[i]) * (b[i] - lx[i]);
    abort_run("drift-implicit solve did not converge (residual " +
              std::to_string(std::sqrt(res) / b_norm) + " relative)");
}

}  // namespace

CflReport cfl_guard(const SemidiscreteProblem& problem, double tau) {
    if (tau < 0.0) fail("tau must be nonnegative");
    const Grid& grid = *problem.grid;
    const double h = grid.spacing();
    const std::vector<double> times = problem.spec.all_time_independent()
                                          ? std::vector<double>{0.0}
                                          : std::vector<double>{0.0, 0.5 * problem.horizon,
                                                                problem.horizon};
    double sum = 0.0;
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::size_t d = 0; d < problem.spec.directions().size(); ++d) {
        const CoeffField& a = problem.spec.diffusion(static_cast<int>(d));
        if (a.is_zero()) continue;
        double worst = 0.0;
        for (double t : times)
            for (std::int64_t i = 0; i < grid.node_count(); ++i) {
                grid.coordinates(i, x);
                worst = std::max(worst, std::abs(a(t, x)));
            }
        double norm2 = 0.0;
        for (int c : problem.spec.directions()[d]) norm2 += static_cast<double>(c) * c;
        sum += worst * norm2;
    }
    CflReport report;
    report.ratio = tau * (2.0 / (h * h)) * sum;
    report.pass = report.ratio <= 1.0;
    return report;
}

GridFunction step_euler_maruyama(const SemidiscreteProblem& problem, const GridFunction& u,
                                 double t, double tau, std::span<const double> dW,
                                 std::span<const double> w_old) {
    if (!(tau > 0.0)) fail("tau must be positive");
    const SampledOperator op = SampledOperator::sample(problem.spec, problem.grid, t);
    GridFunction out(problem.grid);
    std::vector<double> scratch;
    explicit_combination(problem, op, u.values(), t, tau, /*explicit_drift=*/true, dW, w_old,
                         out.values(), scratch);
    check_finite(out.values(), *problem.grid, t, "euler_maruyama step");
    return out;
}

GridFunction step_drift_implicit(const SemidiscreteProblem& problem, const GridFunction& u,
                                 double t, double tau, std::span<const double> dW,
                                 std::span<const double> w_old, std::span<const double> w_new) {
    if (!(tau > 0.0)) fail("tau must be positive");
    const SampledOperator op_t = SampledOperator::sample(problem.spec, problem.grid, t);
    GridFunction rhs(problem.grid);
    std::vector<double> scratch;
    explicit_combination(problem, op_t, u.values(), t, tau, /*explicit_drift=*/false, dW, w_old,
                         rhs.values(), scratch);
    // Free drift enters at the new time level.
    const std::vector<double> f =
        sample_forcing(problem.spec.free_drift(), *problem.grid, t + tau, w_new);
    if (!f.empty())
        for (std::int64_t i = 0; i < rhs.size(); ++i) rhs[i] += tau * f[static_cast<std::size_t>(i)];

    const SampledOperator op_next = op_t.reusable_across_time()
                                        ? op_t
                                        : SampledOperator::sample(problem.spec, problem.grid, t + tau);
    GridFunction out(problem.grid);
    solve_shifted(op_next, tau, rhs.values(), out.values());
    check_finite(out.values(), *problem.grid, t + tau, "drift_implicit step");
    return out;
}

PathSolution solve_path(const SemidiscreteProblem& problem, TimeScheme scheme,
                        const WienerPath& path) {
    if (scheme == TimeScheme::spectral_exact) return solve_spectral_exact(problem, path);
    if (!(problem.horizon > 0.0)) fail("horizon must be positive");
    if (path.time_grid().back() != problem.horizon)
        fail("path time grid must end at the problem horizon");
    if (!(*problem.initial.grid() == *problem.grid))
        fail("initial state does not live on the problem grid");
    if (path.noise_count() < problem.spec.noise_count())
        fail("path carries fewer noise components than the operator");

    const std::int64_t n_steps = path.step_count();
    if (scheme == TimeScheme::euler_maruyama) {
        double tau_max = 0.0;
        for (std::int64_t s = 0; s < n_steps; ++s)
            tau_max = std::max(tau_max, path.time_grid()[static_cast<std::size_t>(s + 1)] -
                                            path.time_grid()[static_cast<std::size_t>(s)]);
        const CflReport cfl = cfl_guard(problem, tau_max);
        if (!cfl.pass)
            abort_run("CFL violation for explicit stepping (ratio " +
                      std::to_string(cfl.ratio) + " > 1)");
    }

    const bool frozen = problem.spec.all_time_independent();
    SampledOperator op = SampledOperator::sample(problem.spec, problem.grid, 0.0);

    GridFunction u = problem.initial;
    GridFunction next(problem.grid);
    std::vector<double> scratch;
    double max_abs = u.max_abs();

    for (std::int64_t s = 0; s < n_steps; ++s) {
        const double t = path.time_grid()[static_cast<std::size_t>(s)];
        const double tau = path.time_grid()[static_cast<std::size_t>(s + 1)] - t;
        const auto dW = path.increments_at(s).subspan(
            0, static_cast<std::size_t>(problem.spec.noise_count()));
        const auto w_old = path.value_at_index(s);
        if (!frozen) op = SampledOperator::sample(problem.spec, problem.grid, t);

        if (scheme == TimeScheme::euler_maruyama) {
            explicit_combination(problem, op, u.values(), t, tau, true, dW, w_old,
                                 next.values(), scratch);
        } else {
            explicit_combination(problem, op, u.values(), t, tau, false, dW, w_old,
                                 next.values(), scratch);
            const std::vector<double> f = sample_forcing(problem.spec.free_drift(),
                                                         *problem.grid, t + tau,
                                                         path.value_at_index(s + 1));
            if (!f.empty())
                for (std::int64_t i = 0; i < next.size(); ++i)
                    next[i] += tau * f[static_cast<std::size_t>(i)];
            const SampledOperator& op_next =
                frozen ? op : (op = SampledOperator::sample(problem.spec, problem.grid, t + tau));
            GridFunction solved(problem.grid);
            solve_shifted(op_next, tau, next.values(), solved.values());
            next = std::move(solved);
        }

        check_finite(next.values(), *problem.grid,
                     path.time_grid()[static_cast<std::size_t>(s + 1)],
                     "solve_path step " + std::to_string(s));
        std::swap(u, next);
        const double m = u.max_abs();
        max_abs = std::max(max_abs, m);
        if (m > kBlowUpGuard)
            abort_run("blow-up detected at step " + std::to_string(s) + " (max |u| = " +
                      std::to_string(m) + ")");
    }
    return PathSolution{std::move(u), n_steps, max_abs};
}

// ---------------------------------------------------------------------------
// Spectral diagonalization
// ---------------------------------------------------------------------------

namespace {

using Complex = std::complex<double>;

// Naive axis-wise DFT; grids are small enough that O(N^2) per axis is fine.
// Accumulation runs in extended precision: the extrapolated errors measured
// on fine grids sit orders of magnitude below the field values, and a plain
// double accumulator would put its own O(N eps) noise on top of them.
void dft_axis(std::vector<Complex>& data, const Grid& grid, int axis, bool inverse) {
    const std::int64_t n = grid.extents()[axis];
    const std::int64_t stride = grid.strides()[axis];
    const std::int64_t total = grid.node_count();
    const long double sign = inverse ? 1.0L : -1.0L;
    std::vector<long double> tw_re(static_cast<std::size_t>(n));
    std::vector<long double> tw_im(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        const long double angle = sign * 2.0L * std::numbers::pi_v<long double> *
                                  static_cast<long double>(j) / static_cast<long double>(n);
        tw_re[static_cast<std::size_t>(j)] = std::cos(angle);
        tw_im[static_cast<std::size_t>(j)] = std::sin(angle);
    }
    std::vector<Complex> line(static_cast<std::size_t>(n));
    const long double norm = inverse ? 1.0L / static_cast<long double>(n) : 1.0L;
    // Walk every 1-D line along `axis`.
    for (std::int64_t base = 0; base < total; ++base) {
        if ((base / stride) % n != 0) continue;
        for (std::int64_t k = 0; k < n; ++k) {
            long double re = 0.0L, im = 0.0L;
            for (std::int64_t j = 0; j < n; ++j) {
                const Complex& v = data[static_cast<std::size_t>(base + j * stride)];
                const long double wr = tw_re[static_cast<std::size_t>((k * j) % n)];
                const long double wi = tw_im[static_cast<std::size_t>((k * j) % n)];
                re += v.real() * wr - v.imag() * wi;
                im += v.real() * wi + v.imag() * wr;
            }
            line[static_cast<std::size_t>(k)] =
                Complex(static_cast<double>(re * norm), static_cast<double>(im * norm));
        }
        for (std::int64_t k = 0; k < n; ++k)
            data[static_cast<std::size_t>(base + k * stride)] = line[static_cast<std::size_t>(k)];
    }
}

void dft(std::vector<Complex>& data, const Grid& grid, bool inverse) {
    for (int axis = 0; axis < grid.dim(); ++axis) dft_axis(data, grid, axis, inverse);
}

double constant_of(const CoeffField& f, const char* what) {
    if (!f.is_constant())
        fail(std::string("spectral integration requires constant coefficients (") + what + ")");
    return f.constant_value();
}

}  // namespace

OperatorSymbols operator_symbols(const OperatorSpec& spec, const Grid& grid) {
    if (grid.boundary_mode() != BoundaryMode::periodic)
        fail("operator symbols require a periodic grid");
    const double h = grid.spacing();
    const std::int64_t n = grid.node_count();
    OperatorSymbols sym;
    sym.L.assign(static_cast<std::size_t>(n), Complex(0.0, 0.0));
    sym.M.assign(static_cast<std::size_t>(spec.noise_count()),
                 std::vector<Complex>(static_cast<std::size_t>(n), Complex(0.0, 0.0)));

    const double c = constant_of(spec.reaction(), "c");
    std::vector<std::int64_t> mode(static_cast<std::size_t>(grid.dim()));
    for (std::int64_t i = 0; i < n; ++i) {
        grid.unflatten(i, mode);
        for (std::size_t d = 0; d < spec.directions().size(); ++d) {
            const Direction& dir = spec.directions()[d];
            double theta = 0.0;
            for (int a = 0; a < grid.dim(); ++a)
                theta += 2.0 * std::numbers::pi * static_cast<double>(mode[a]) *
                         static_cast<double>(dir[static_cast<std::size_t>(a)]) /
                         static_cast<double>(grid.extents()[a]);
            // 2 cos(t) - 2 written as -4 sin^2(t/2): the direct form cancels
            // catastrophically for small mode angles and its noise would
            // dominate the extrapolated errors on fine grids.
            const double sin_half = std::sin(0.5 * theta);
            const double second = -4.0 * sin_half * sin_half / (h * h);
            const Complex first = spec.symmetric_mode()
                                      ? Complex(0.0, std::sin(theta) / h)
                                      : Complex(-2.0 * sin_half * sin_half / h, std::sin(theta) / h);
            const double a_l = constant_of(spec.diffusion(static_cast<int>(d)), "a");
            const double b_l = constant_of(spec.drift(static_cast<int>(d)), "b");
            sym.L[static_cast<std::size_t>(i)] += a_l * second + b_l * first;
            for (int rho = 0; rho < spec.noise_count(); ++rho) {
                const double s_l = constant_of(spec.noise_gradient(rho, static_cast<int>(d)), "sigma");
                sym.M[static_cast<std::size_t>(rho)][static_cast<std::size_t>(i)] += s_l * first;
            }
        }
        sym.L[static_cast<std::size_t>(i)] += c;
        for (int rho = 0; rho < spec.noise_count(); ++rho)
            sym.M[static_cast<std::size_t>(rho)][static_cast<std::size_t>(i)] +=
                constant_of(spec.noise_mass(rho), "nu");
    }
    return sym;
}

PathSolution solve_spectral_exact(const SemidiscreteProblem& problem, const WienerPath& path) {
    const Grid& grid = *problem.grid;
    if (grid.boundary_mode() != BoundaryMode::periodic)
        fail("spectral integration requires a periodic grid");
    if (!problem.spec.all_coefficients_constant())
        fail("spectral integration requires constant coefficients");
    if (problem.spec.has_free_terms())
        fail("spectral integration requires zero free terms");
    if (!(problem.horizon > 0.0)) fail("horizon must be positive");
    if (path.time_grid().back() != problem.horizon)
        fail("path time grid must end at the problem horizon");
    if (path.noise_count() < problem.spec.noise_count())
        fail("path carries fewer noise components than the operator");

    const std::int64_t n = grid.node_count();
    const OperatorSymbols sym = operator_symbols(problem.spec, grid);
    const auto w_T = path.value_at_index(path.step_count());
    const double T = problem.horizon;

    std::vector<Complex> modes(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        modes[static_cast<std::size_t>(i)] = Complex(problem.initial[i], 0.0);
    dft(modes, grid, /*inverse=*/false);

    for (std::int64_t i = 0; i < n; ++i) {
        // exponent = (Lhat - 1/2 sum_rho Mhat^2) T + sum_rho Mhat W^rho_T
        Complex exponent = sym.L[static_cast<std::size_t>(i)] * T;
        for (int rho = 0; rho < problem.spec.noise_count(); ++rho) {
            const Complex m = sym.M[static_cast<std::size_t>(rho)][static_cast<std::size_t>(i)];
            exponent += m * w_T[static_cast<std::size_t>(rho)] - 0.5 * m * m * T;
        }
        modes[static_cast<std::size_t>(i)] *= std::exp(exponent);
    }

    dft(modes, grid, /*inverse=*/true);

    GridFunction terminal(problem.grid);
    double max_re = 0.0, max_im = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        terminal[i] = modes[static_cast<std::size_t>(i)].real();
        max_re = std::max(max_re, std::abs(terminal[i]));
        max_im = std::max(max_im, std::abs(modes[static_cast<std::size_t>(i)].imag()));
    }
    if (max_im > 1e-10 * std::max(1.0, max_re))
        abort_run("spectral solve left an imaginary residue of " + std::to_string(max_im));
    check_finite(terminal.values(), grid, T, "spectral solve");
    return PathSolution{std::move(terminal), 1, std::max(problem.initial.max_abs(), max_re)};
}

}  // namespace spde
