#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "spde/harness.hpp"

using namespace spde;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

GridPtr periodic_1d(std::int64_t n) {
    return build_grid(1, kTwoPi / static_cast<double>(n), n, {0.0}, BoundaryMode::periodic, 0);
}

SemidiscreteProblem empty_problem(const GridPtr& g, double horizon, int noise = 0) {
    OperatorSpec spec;
    spec.set_noise_count(noise);
    return SemidiscreteProblem{std::move(spec),
                               g,
                               GridFunction::sample(g, [](auto x) { return std::sin(x[0]); }),
                               horizon};
}

}  // namespace

TEST_CASE("cfl_guard evaluates the explicit stability ratio") {
    const GridPtr g = build_grid(1, 0.1, 20, {0.0}, BoundaryMode::periodic, 0);
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::constant(1.0));
    SemidiscreteProblem p{spec, g, GridFunction(g, 0.0), 1.0};

    CHECK(cfl_guard(p, 0.004).ratio == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(cfl_guard(p, 0.004).pass);
    CHECK(cfl_guard(p, 0.01).ratio == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_FALSE(cfl_guard(p, 0.01).pass);
    CHECK(cfl_guard(p, 0.0).ratio == 0.0);
    CHECK(cfl_guard(p, 0.0).pass);
}

TEST_CASE("euler-maruyama step") {
    const GridPtr g = periodic_1d(16);

    SUBCASE("pure free drift f=1 adds tau") {
        SemidiscreteProblem p = empty_problem(g, 1.0);
        p.spec.set_free_drift(ForcingField::of(
            [](double, std::span<const double>, std::span<const double>) { return 1.0; }));
        const GridFunction u1 = step_euler_maruyama(p, p.initial, 0.0, 0.25, {});
        for (std::int64_t i = 0; i < u1.size(); ++i)
            CHECK(u1[i] == doctest::Approx(p.initial[i] + 0.25).epsilon(1e-15));
    }
    SUBCASE("pure free noise g=1 adds the increment") {
        SemidiscreteProblem p = empty_problem(g, 1.0, 1);
        p.spec.set_free_noise(0, ForcingField::of(
            [](double, std::span<const double>, std::span<const double>) { return 1.0; }));
        const double dw[] = {-0.37};
        const GridFunction u1 = step_euler_maruyama(p, p.initial, 0.0, 0.1, dw);
        for (std::int64_t i = 0; i < u1.size(); ++i)
            CHECK(u1[i] == doctest::Approx(p.initial[i] - 0.37).epsilon(1e-15));
    }
    SUBCASE("pure drift heat step multiplies sine by 1 + tau*symbol") {
        const double h = g->spacing();
        SemidiscreteProblem p = empty_problem(g, 1.0);
        p.spec.add_diffusion({1}, CoeffField::constant(1.0));
        const double tau = 0.001;
        const GridFunction u1 = step_euler_maruyama(p, p.initial, 0.0, tau, {});
        const double factor = 1.0 + tau * (2.0 * std::cos(h) - 2.0) / (h * h);
        for (std::int64_t i = 0; i < u1.size(); ++i)
            CHECK(u1[i] == doctest::Approx(factor * p.initial[i]).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("drift-implicit step") {
    const GridPtr g = periodic_1d(32);
    const double h = g->spacing();

    SUBCASE("L=0 reduces to the explicit step") {
        SemidiscreteProblem p = empty_problem(g, 1.0, 1);
        p.spec.set_free_noise(0, ForcingField::of(
            [](double, std::span<const double> x, std::span<const double>) {
                return std::cos(x[0]);
            }));
        const double dw[] = {0.21};
        const GridFunction exp_step = step_euler_maruyama(p, p.initial, 0.0, 0.05, dw);
        const GridFunction imp_step = step_drift_implicit(p, p.initial, 0.0, 0.05, dw);
        for (std::int64_t i = 0; i < exp_step.size(); ++i)
            CHECK(imp_step[i] == doctest::Approx(exp_step[i]).epsilon(1e-11).scale(1.0));
    }
    SUBCASE("heat mode is damped by 1/(1 - tau*symbol)") {
        SemidiscreteProblem p = empty_problem(g, 1.0);
        p.spec.add_diffusion({1}, CoeffField::constant(1.0));
        const double tau = 0.01;
        const GridFunction u1 = step_drift_implicit(p, p.initial, 0.0, tau, {});
        const double symbol = (2.0 * std::cos(h) - 2.0) / (h * h);
        const double factor = 1.0 / (1.0 - tau * symbol);
        for (std::int64_t i = 0; i < u1.size(); ++i)
            CHECK(u1[i] == doctest::Approx(factor * p.initial[i]).epsilon(1e-10).scale(1.0));
    }
    SUBCASE("constants are fixed points when c=f=M=g=0") {
        SemidiscreteProblem p = empty_problem(g, 1.0);
        p.spec.add_diffusion({1}, CoeffField::constant(1.0));
        p.initial = GridFunction(g, 3.75);
        const GridFunction u1 = step_drift_implicit(p, p.initial, 0.0, 0.5, {});
        for (std::int64_t i = 0; i < u1.size(); ++i)
            CHECK(u1[i] == doctest::Approx(3.75).epsilon(1e-12));
    }
}

TEST_CASE("solve_path end to end") {
    const GridPtr g = periodic_1d(16);
    const double T = 0.5;

    SUBCASE("zero operator keeps the initial state") {
        const SemidiscreteProblem p = empty_problem(g, T);
        const WienerPath path = sample_path(1, 0, make_uniform_time_grid(T, 20), 0);
        for (TimeScheme scheme : {TimeScheme::euler_maruyama, TimeScheme::drift_implicit}) {
            const PathSolution sol = solve_path(p, scheme, path);
            CHECK(sol.steps == 20);
            for (std::int64_t i = 0; i < sol.terminal.size(); ++i)
                CHECK(sol.terminal[i] == doctest::Approx(p.initial[i]).epsilon(1e-13));
        }
    }
    SUBCASE("f=1 advances by the horizon") {
        SemidiscreteProblem p = empty_problem(g, T);
        p.spec.set_free_drift(ForcingField::of(
            [](double, std::span<const double>, std::span<const double>) { return 1.0; }));
        const WienerPath path = sample_path(1, 0, make_uniform_time_grid(T, 32), 0);
        const PathSolution sol = solve_path(p, TimeScheme::euler_maruyama, path);
        for (std::int64_t i = 0; i < sol.terminal.size(); ++i)
            CHECK(sol.terminal[i] == doctest::Approx(p.initial[i] + T).epsilon(1e-12));
    }
    SUBCASE("g=1 adds exactly W_T for the given path") {
        SemidiscreteProblem p = empty_problem(g, T, 1);
        p.spec.set_free_noise(0, ForcingField::of(
            [](double, std::span<const double>, std::span<const double>) { return 1.0; }));
        const WienerPath path = sample_path(7, 3, make_uniform_time_grid(T, 64), 1);
        const double w_T = path.value_at_index(64)[0];
        const PathSolution sol = solve_path(p, TimeScheme::euler_maruyama, path);
        for (std::int64_t i = 0; i < sol.terminal.size(); ++i)
            CHECK(sol.terminal[i] == doctest::Approx(p.initial[i] + w_T).epsilon(1e-13));
    }
    SUBCASE("explicit stepping refuses a CFL violation") {
        SemidiscreteProblem p = empty_problem(g, T);
        p.spec.add_diffusion({1}, CoeffField::constant(1.0));
        const WienerPath path = sample_path(1, 0, make_uniform_time_grid(T, 2), 0);
        CHECK_THROWS_WITH_AS(solve_path(p, TimeScheme::euler_maruyama, path),
                             doctest::Contains("CFL"), std::runtime_error);
    }
    SUBCASE("unstable reaction growth trips the blow-up guard") {
        SemidiscreteProblem p = empty_problem(g, 10.0);
        p.spec.set_reaction(CoeffField::constant(1000.0));
        const WienerPath path = sample_path(1, 0, make_uniform_time_grid(10.0, 100), 0);
        CHECK_THROWS_WITH_AS(solve_path(p, TimeScheme::euler_maruyama, path),
                             doctest::Contains("blow-up"), std::runtime_error);
    }
    SUBCASE("path must end at the horizon") {
        const SemidiscreteProblem p = empty_problem(g, T);
        const WienerPath path = sample_path(1, 0, make_uniform_time_grid(2.0 * T, 10), 0);
        CHECK_THROWS_AS(solve_path(p, TimeScheme::euler_maruyama, path), std::invalid_argument);
    }
}

TEST_CASE("spectral-exact integration") {
    const TestProblem heat = deterministic_heat_1d();
    const TestProblem transport = transport_diffusion_1d();

    SUBCASE("heat on a single mode matches the closed-form decay") {
        const GridPtr g = periodic_1d(64);
        const double h = g->spacing();
        const double T = 0.5;
        OperatorSpec spec;
        spec.add_diffusion({1}, CoeffField::constant(1.0));
        const SemidiscreteProblem p{
            spec, g, GridFunction::sample(g, [](auto x) { return std::sin(x[0]); }), T};
        const WienerPath path = sample_path(0, 0, make_uniform_time_grid(T, 1), 0);
        const PathSolution sol = solve_spectral_exact(p, path);
        CHECK(sol.steps == 1);
        const double decay = std::exp(T * (2.0 * std::cos(h) - 2.0) / (h * h));
        for (std::int64_t i = 0; i < sol.terminal.size(); ++i)
            CHECK(sol.terminal[i] == doctest::Approx(decay * std::sin(g->coordinate(0, i)))
                                          .epsilon(1e-12)
                                          .scale(1.0));
    }
    SUBCASE("each mode of the heat problem decays by exp(T * symbol) to 1e-12") {
        const GridPtr g = periodic_1d(128);
        const double h = g->spacing();
        const double T = 0.4;
        const SemidiscreteProblem p = heat.instantiate(g, T);
        const WienerPath path = sample_path(0, 0, make_uniform_time_grid(T, 1), 0);
        const GridFunction terminal = solve_spectral_exact(p, path).terminal;
        const double d1 = std::exp(T * (2.0 * std::cos(h) - 2.0) / (h * h));
        const double d3 = std::exp(T * (2.0 * std::cos(3.0 * h) - 2.0) / (h * h));
        for (std::int64_t i = 0; i < terminal.size(); ++i) {
            const double x = g->coordinate(0, i);
            const double expected = d1 * std::sin(x) + d3 * std::sin(3.0 * x);
            CHECK(terminal[i] == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
        }
    }
    SUBCASE("the zero mode preserves the spatial mean") {
        const GridPtr g = periodic_1d(32);
        const SemidiscreteProblem p = heat.instantiate(g, 0.7);
        SemidiscreteProblem shifted = p;
        shifted.initial = GridFunction::sample(
            g, [](auto x) { return 2.5 + std::sin(x[0]); });
        const WienerPath path = sample_path(0, 0, make_uniform_time_grid(0.7, 1), 0);
        const GridFunction terminal = solve_spectral_exact(shifted, path).terminal;
        double mean = 0.0;
        for (std::int64_t i = 0; i < terminal.size(); ++i) mean += terminal[i];
        mean /= static_cast<double>(terminal.size());
        CHECK(mean == doctest::Approx(2.5).epsilon(1e-13));
    }
    SUBCASE("transport-diffusion drift exponent is -(1-cos)^2/(2h^2) per mode") {
        const GridPtr g = periodic_1d(32);
        const double h = g->spacing();
        const OperatorSymbols sym = operator_symbols(transport.spec, *g);
        REQUIRE(sym.M.size() == 1);
        for (std::int64_t m = 0; m < g->node_count(); ++m) {
            const std::complex<double> exponent =
                sym.L[static_cast<std::size_t>(m)] -
                0.5 * sym.M[0][static_cast<std::size_t>(m)] * sym.M[0][static_cast<std::size_t>(m)];
            const double theta = kTwoPi * static_cast<double>(m) / 32.0;
            const double expected = -(1.0 - std::cos(theta)) * (1.0 - std::cos(theta)) /
                                    (2.0 * h * h);
            CHECK(exponent.real() == doctest::Approx(expected).epsilon(1e-10).scale(1.0));
            CHECK(exponent.imag() == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
            CHECK(exponent.real() <= 1e-12);  // never amplifies
        }
    }
    SUBCASE("eligibility checks") {
        const GridPtr g = periodic_1d(16);
        const WienerPath path = sample_path(0, 0, make_uniform_time_grid(0.25, 1), 1);

        SemidiscreteProblem varcoef = variable_coefficient_1d().instantiate(g, 0.25);
        CHECK_THROWS_AS(solve_spectral_exact(varcoef, path), std::invalid_argument);

        SemidiscreteProblem forced = additive_noise_manufactured_1d().instantiate(g, 0.25);
        CHECK_THROWS_AS(solve_spectral_exact(forced, path), std::invalid_argument);

        const GridPtr padded = build_grid(1, 0.1, 17, {0.0}, BoundaryMode::zero_padded, 1);
        SemidiscreteProblem boxed = heat.instantiate(padded, 0.25);
        CHECK_THROWS_AS(solve_spectral_exact(boxed, path), std::invalid_argument);
    }
}

TEST_CASE("2-D spectral solve factors over the axes") {
    // u0 = sin x sin y under du = (u_xx + u_yy) dt decays mode-wise with the
    // product of the 1-D symbols.
    const GridPtr g = build_grid(2, kTwoPi / 24.0, 24, {0.0, 0.0}, BoundaryMode::periodic, 0);
    const double h = g->spacing();
    const double T = 0.3;
    OperatorSpec spec;
    spec.add_diffusion({1, 0}, CoeffField::constant(1.0));
    spec.add_diffusion({0, 1}, CoeffField::constant(1.0));
    const SemidiscreteProblem p{
        spec, g,
        GridFunction::sample(g, [](auto x) { return std::sin(x[0]) * std::sin(x[1]); }), T};
    const WienerPath path = sample_path(0, 0, make_uniform_time_grid(T, 1), 0);
    const GridFunction terminal = solve_spectral_exact(p, path).terminal;
    const double decay = std::exp(2.0 * T * (2.0 * std::cos(h) - 2.0) / (h * h));
    std::vector<double> x(2);
    for (std::int64_t i = 0; i < terminal.size(); ++i) {
        g->coordinates(i, x);
        CHECK(terminal[i] ==
              doctest::Approx(decay * std::sin(x[0]) * std::sin(x[1])).epsilon(1e-11).scale(1.0));
    }
}

TEST_CASE("zero-padded box: heat equation against the free-space Gaussian") {
    // u0 = exp(-x^2 / 2 s^2) spreads to variance s^2 + 2t; the box [-8, 8]
    // truncates at ~1e-11 of the peak, far below the spatial error, and the
    // measurement margin keeps boundary effects out of the sup.
    const double s2 = 0.25;
    const double T = 0.5;
    const auto oracle = [&](double x) {
        const double v = s2 + 2.0 * T;
        return std::sqrt(s2 / v) * std::exp(-x * x / (2.0 * v));
    };
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::constant(1.0));

    std::vector<double> errors;
    GridPtr g = build_grid(1, 16.0 / 64.0, 65, {-8.0}, BoundaryMode::zero_padded, 8);
    for (int level = 0; level < 3; ++level) {
        const SemidiscreteProblem p{
            spec, g,
            GridFunction::sample(g, [&](auto x) { return std::exp(-x[0] * x[0] / (2.0 * s2)); }),
            T};
        const double h_f = g->spacing();
        const std::int64_t steps =
            static_cast<std::int64_t>(std::ceil(T / (0.25 * h_f * h_f)));
        const WienerPath path = sample_path(0, 0, make_uniform_time_grid(T, steps), 0);
        const GridFunction terminal = solve_path(p, TimeScheme::drift_implicit, path).terminal;
        const GridFunction exact =
            GridFunction::sample(g, [&](auto x) { return oracle(x[0]); });
        errors.push_back(terminal.sup_box_distance(exact));
        g = refine(g);
    }
    const OrderFit fit = fit_order(errors);
    CHECK(fit.slope > 1.7);
    CHECK(fit.slope < 2.3);
}

TEST_CASE("stepped schemes converge to the spectral solution in tau") {
    const TestProblem prob = transport_diffusion_1d();
    const GridPtr g = prob.make_grid(32);
    const double T = 0.5;
    const SemidiscreteProblem bound = prob.instantiate(g, T);
    const int levels = 4;
    const std::int64_t n_fine = 32 << (levels - 1);
    const int paths = 8;

    for (TimeScheme scheme : {TimeScheme::euler_maruyama, TimeScheme::drift_implicit}) {
        std::vector<double> errs(levels, 0.0);
        for (int p = 0; p < paths; ++p) {
            const WienerPath master = sample_path(31, p, make_uniform_time_grid(T, n_fine), 1);
            const GridFunction exact = solve_spectral_exact(bound, master).terminal;
            for (int l = 0; l < levels; ++l) {
                const WienerPath path = coarsen_path(master, n_fine / (32 << l));
                const GridFunction u = solve_path(bound, scheme, path).terminal;
                errs[static_cast<std::size_t>(l)] += u.sup_box_distance(exact) *
                                                     u.sup_box_distance(exact);
            }
        }
        for (auto& e : errs) e = std::sqrt(e / paths);
        const OrderFit fit = fit_order(errs);
        CHECK(fit.slope > 0.4);
        CHECK(fit.slope < 1.2);
    }
}

TEST_CASE("deterministic problems show first-order temporal error") {
    const TestProblem prob = deterministic_heat_1d();
    const GridPtr g = prob.make_grid(32);
    const double T = 0.5;
    const SemidiscreteProblem bound = prob.instantiate(g, T);
    const WienerPath one_step = sample_path(0, 0, make_uniform_time_grid(T, 1), 0);
    const GridFunction exact = solve_spectral_exact(bound, one_step).terminal;

    for (TimeScheme scheme : {TimeScheme::euler_maruyama, TimeScheme::drift_implicit}) {
        std::vector<double> errs;
        for (std::int64_t n = 32; n <= 512; n *= 2) {
            const WienerPath path = sample_path(0, 0, make_uniform_time_grid(T, n), 0);
            errs.push_back(solve_path(bound, scheme, path).terminal.sup_box_distance(exact));
        }
        const OrderFit fit = fit_order(errs);
        CHECK(fit.slope > 0.8);
        CHECK(fit.slope < 1.2);
    }
}

TEST_CASE("path solves are linear in the initial state") {
    const TestProblem prob = transport_diffusion_1d();
    const GridPtr g = prob.make_grid(32);
    const double T = 0.25;
    const WienerPath path = sample_path(17, 5, make_uniform_time_grid(T, 128), 1);

    SemidiscreteProblem pu = prob.instantiate(g, T);
    SemidiscreteProblem pv = pu;
    pv.initial = GridFunction::sample(g, [](auto x) { return std::cos(2.0 * x[0]); });
    SemidiscreteProblem pw = pu;
    const double alpha = 0.6, beta = -1.7;
    for (std::int64_t i = 0; i < pw.initial.size(); ++i)
        pw.initial[i] = alpha * pu.initial[i] + beta * pv.initial[i];

    for (TimeScheme scheme : {TimeScheme::euler_maruyama, TimeScheme::drift_implicit,
                              TimeScheme::spectral_exact}) {
        const GridFunction su = solve_path(pu, scheme, path).terminal;
        const GridFunction sv = solve_path(pv, scheme, path).terminal;
        const GridFunction sw = solve_path(pw, scheme, path).terminal;
        double worst = 0.0, scale = 0.0;
        for (std::int64_t i = 0; i < sw.size(); ++i) {
            worst = std::max(worst, std::abs(sw[i] - alpha * su[i] - beta * sv[i]));
            scale = std::max(scale, std::abs(sw[i]));
        }
        CHECK(worst <= 1e-10 * std::max(1.0, scale));
    }
}
