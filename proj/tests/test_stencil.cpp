#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "spde/stencil.hpp"

using namespace spde;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

GridPtr periodic_1d(std::int64_t n) {
    return build_grid(1, kTwoPi / static_cast<double>(n), n, {0.0}, BoundaryMode::periodic, 0);
}

GridPtr padded_1d(std::int64_t n, double h, double origin, std::int64_t margin) {
    return build_grid(1, h, n, {origin}, BoundaryMode::zero_padded, margin);
}

}  // namespace

TEST_CASE("difference operators are exact on low-degree polynomials") {
    const GridPtr g = padded_1d(21, 0.1, -1.0, 2);
    const Direction e1 = {1};

    SUBCASE("forward difference of x is 1") {
        const GridFunction f = GridFunction::sample(g, [](auto x) { return x[0]; });
        const GridFunction d = diff_forward(f, e1);
        for (std::int64_t i = g->box_lo(0); i <= g->box_hi(0); ++i)
            CHECK(d[i] == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("second difference of x^2 is exactly 2") {
        const GridFunction f = GridFunction::sample(g, [](auto x) { return x[0] * x[0]; });
        const GridFunction d = diff_second(f, e1);
        for (std::int64_t i = g->box_lo(0); i <= g->box_hi(0); ++i)
            CHECK(d[i] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("all four annihilate constants") {
        const GridFunction f(g, 4.25);
        for (const GridFunction& d : {diff_forward(f, e1), diff_backward(f, e1),
                                      diff_central(f, e1), diff_second(f, e1)})
            for (std::int64_t i = g->box_lo(0); i <= g->box_hi(0); ++i) CHECK(d[i] == 0.0);
    }
    SUBCASE("central difference of x^3 at x=1 with h=0.1") {
        // (1.1^3 - 0.9^3) / 0.2 = (1.331 - 0.729) / 0.2 = 3.01; the exact
        // derivative is 3, the defect h^2 f'''/6 = 0.01.
        const GridPtr gg = padded_1d(41, 0.1, -1.0, 1);
        const GridFunction f = GridFunction::sample(gg, [](auto x) { return x[0] * x[0] * x[0]; });
        const GridFunction d = diff_central(f, e1);
        std::int64_t at = -1;
        for (std::int64_t i = 0; i < gg->node_count(); ++i)
            if (std::abs(gg->coordinate(0, i) - 1.0) < 1e-12) at = i;
        REQUIRE(at >= 0);
        CHECK(d[at] == doctest::Approx(3.01).epsilon(1e-12));
    }
}

TEST_CASE("summation by parts on periodic grids") {
    const GridPtr g = periodic_1d(16);
    const Direction e1 = {1};
    const GridFunction f = GridFunction::sample(g, [](auto x) { return std::sin(x[0]) + 0.3; });
    const GridFunction w = GridFunction::sample(g, [](auto x) { return std::cos(2.0 * x[0]); });
    double lhs = 0.0, rhs = 0.0;
    const GridFunction df = diff_forward(f, e1);
    const GridFunction bw = diff_backward(w, e1);
    for (std::int64_t i = 0; i < g->node_count(); ++i) {
        lhs += df[i] * w[i];
        rhs -= f[i] * bw[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    // The second difference sums to zero over the torus.
    double total = 0.0;
    const GridFunction d2 = diff_second(f, e1);
    for (std::int64_t i = 0; i < g->node_count(); ++i) total += d2[i];
    CHECK(total == doctest::Approx(0.0).scale(1.0).epsilon(1e-11));
}

TEST_CASE("apply_L reproduces the symbol of the second difference on sine") {
    const GridPtr g = periodic_1d(32);
    const double h = g->spacing();
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::constant(1.0));
    const GridFunction u = GridFunction::sample(g, [](auto x) { return std::sin(x[0]); });
    const GridFunction lu = apply_L(spec, 0.0, u);
    const double symbol = (2.0 * std::cos(h) - 2.0) / (h * h);
    for (std::int64_t i = 0; i < g->node_count(); ++i)
        CHECK(lu[i] == doctest::Approx(symbol * u[i]).epsilon(1e-11).scale(1.0));
}

TEST_CASE("apply_L special cases") {
    const GridPtr g = periodic_1d(16);
    const GridFunction u = GridFunction::sample(g, [](auto x) { return std::cos(x[0]) + 2.0; });

    SUBCASE("pure reaction c=1 is the identity") {
        OperatorSpec spec;
        spec.add_diffusion({1}, CoeffField());  // explicitly zero
        spec.set_reaction(CoeffField::constant(1.0));
        const GridFunction lu = apply_L(spec, 0.0, u);
        for (std::int64_t i = 0; i < g->node_count(); ++i) CHECK(lu[i] == u[i]);
    }
    SUBCASE("differences annihilate constants") {
        OperatorSpec spec;
        spec.add_diffusion({1}, CoeffField::constant(2.0));
        spec.add_drift({1}, CoeffField::constant(1.5));
        const GridFunction c(g, 7.5);
        const GridFunction lu = apply_L(spec, 0.0, c);
        for (std::int64_t i = 0; i < g->node_count(); ++i) CHECK(lu[i] == 0.0);
    }
    SUBCASE("non-finite coefficient evaluation names the node") {
        OperatorSpec spec;
        spec.add_diffusion({1}, CoeffField::of([](double, std::span<const double> x) {
            return x[0] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
        }));
        CHECK_THROWS_WITH_AS(apply_L(spec, 0.0, u), doctest::Contains("node 0"),
                             std::runtime_error);
    }
}

TEST_CASE("apply_M matches its definition") {
    const GridPtr g = periodic_1d(32);
    const double h = g->spacing();

    SUBCASE("gradient noise on x is 1 on interior nodes") {
        const GridPtr gp = padded_1d(11, 0.1, 0.0, 1);
        OperatorSpec spec;
        spec.set_noise_count(1);
        spec.add_noise_gradient(0, {1}, CoeffField::constant(1.0));
        const GridFunction u = GridFunction::sample(gp, [](auto x) { return x[0]; });
        const GridFunction mu = apply_M(spec, 0, 0.0, u);
        for (std::int64_t i = gp->box_lo(0); i <= gp->box_hi(0); ++i)
            CHECK(mu[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("pure mass noise returns u") {
        OperatorSpec spec;
        spec.set_noise_count(1);
        spec.set_noise_mass(0, CoeffField::constant(1.0));
        const GridFunction u = GridFunction::sample(g, [](auto x) { return std::sin(2.0 * x[0]); });
        const GridFunction mu = apply_M(spec, 0, 0.0, u);
        for (std::int64_t i = 0; i < g->node_count(); ++i) CHECK(mu[i] == u[i]);
    }
    SUBCASE("central difference of sine gives cos(x) sin(h)/h") {
        OperatorSpec spec;
        spec.set_noise_count(1);
        spec.add_noise_gradient(0, {1}, CoeffField::constant(1.0));
        const GridFunction u = GridFunction::sample(g, [](auto x) { return std::sin(x[0]); });
        const GridFunction mu = apply_M(spec, 0, 0.0, u);
        for (std::int64_t i = 0; i < g->node_count(); ++i) {
            const double x = g->coordinate(0, i);
            CHECK(mu[i] ==
                  doctest::Approx(std::cos(x) * std::sin(h) / h).epsilon(1e-11).scale(1.0));
        }
    }
    SUBCASE("rho out of range is rejected") {
        OperatorSpec spec;
        spec.set_noise_count(1);
        spec.set_noise_mass(0, CoeffField::constant(1.0));
        const GridFunction u(g, 1.0);
        CHECK_THROWS_AS(apply_M(spec, 1, 0.0, u), std::invalid_argument);
        CHECK_THROWS_AS(apply_M(spec, -1, 0.0, u), std::invalid_argument);
    }
}

TEST_CASE("non-symmetric mode uses the forward difference for drift") {
    const GridPtr g = padded_1d(21, 0.1, -1.0, 1);
    OperatorSpec spec;
    spec.add_drift({1}, CoeffField::constant(1.0));
    spec.set_symmetric_mode(false);
    const GridFunction u = GridFunction::sample(g, [](auto x) { return x[0] * x[0]; });
    const GridFunction lu = apply_L(spec, 0.0, u);
    // Forward difference of x^2 is 2x + h, exactly.
    for (std::int64_t i = g->box_lo(0); i <= g->box_hi(0); ++i) {
        const double x = g->coordinate(0, i);
        CHECK(lu[i] == doctest::Approx(2.0 * x + 0.1).epsilon(1e-12));
    }
}

TEST_CASE("symmetric operators commute with reflection for even coefficients") {
    const std::int64_t n = 32;
    const GridPtr g = periodic_1d(n);
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::of([](double, std::span<const double> x) {
        return 1.0 + 0.25 * std::cos(x[0]);  // even about x = 0 on the torus
    }, true));
    const GridFunction u = GridFunction::sample(
        g, [](auto x) { return std::sin(x[0]) + 0.5 * std::cos(2.0 * x[0]); });
    const GridFunction lu = apply_L(spec, 0.0, u);

    GridFunction reflected(g);
    for (std::int64_t i = 0; i < n; ++i) reflected[i] = u[(n - i) % n];
    const GridFunction lur = apply_L(spec, 0.0, reflected);
    for (std::int64_t i = 0; i < n; ++i)
        CHECK(lur[(n - i) % n] == doctest::Approx(lu[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("decompose_diffusion") {
    SUBCASE("1-D scalar") {
        const std::vector<Direction> dirs = {{1}};
        const auto d = decompose_diffusion(std::vector<double>{2.0}, 1, dirs);
        CHECK(d.weights == std::vector<double>{2.0});
        CHECK(d.residual == 0.0);
    }
    SUBCASE("2-D identity over the axes") {
        const std::vector<Direction> dirs = {{1, 0}, {0, 1}};
        const auto d = decompose_diffusion(std::vector<double>{1, 0, 0, 1}, 2, dirs);
        CHECK(d.weights[0] == doctest::Approx(1.0));
        CHECK(d.weights[1] == doctest::Approx(1.0));
    }
    SUBCASE("correlated matrix uses the diagonal direction") {
        const std::vector<Direction> dirs = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
        const std::vector<double> a = {1.0, 0.5, 0.5, 1.0};
        const auto d = decompose_diffusion(a, 2, dirs);
        CHECK(d.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(d.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(d.weights[2] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(d.weights[3] == doctest::Approx(0.0).epsilon(1e-14));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < dirs.size(); ++k)
                    s += d.weights[k] * dirs[k][static_cast<std::size_t>(i)] *
                         dirs[k][static_cast<std::size_t>(j)];
                CHECK(s == doctest::Approx(a[static_cast<std::size_t>(2 * i + j)]).epsilon(1e-12));
            }
    }
    SUBCASE("non-axis direction sets fall back to least squares") {
        const std::vector<Direction> dirs = {{1, 0}, {1, 1}};  // no e2: monotone form unusable
        const std::vector<double> a = {2.0, 1.0, 1.0, 1.0};
        const auto d = decompose_diffusion(a, 2, dirs);
        CHECK(d.residual <= 1e-10);
        CHECK(d.weights[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(d.weights[1] == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("infeasible decomposition carries the best residual") {
        const std::vector<Direction> dirs = {{1, 0}, {0, 1}};
        try {
            decompose_diffusion(std::vector<double>{1.0, 0.9, 0.9, 1.0}, 2, dirs);
            FAIL("expected DecompositionError");
        } catch (const DecompositionError& e) {
            CHECK(e.residual == doctest::Approx(0.9).epsilon(1e-10));
            for (double w : e.best_weights) CHECK(w >= 0.0);
        }
    }
    SUBCASE("asymmetric input is rejected") {
        const std::vector<Direction> dirs = {{1, 0}, {0, 1}};
        CHECK_THROWS_AS(decompose_diffusion(std::vector<double>{1.0, 0.2, 0.1, 1.0}, 2, dirs),
                        std::invalid_argument);
    }
}

TEST_CASE("consistency_check is exact on monomials for the symmetric stencil") {
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::constant(1.0));
    const ContinuousOperator cont = ContinuousOperator::constant({1.0}, {0.0}, 0.0, {}, {}, 1, 0);
    const GridPtr g = periodic_1d(32);
    const ConsistencyReport report = consistency_check(spec, cont, g, 2);
    CHECK(report.entries.size() == 3);  // 1, x, x^2
    CHECK(report.worst_scaled <= 1e-12);
    CHECK_THROWS_AS(consistency_check(spec, cont, g, 3), std::invalid_argument);
}

TEST_CASE("quartic probe of the second difference leaves exactly 2 h^2") {
    // D2_h x^4 = 12 x^2 + 2 h^2 pointwise; this planted residual calibrates
    // the consistency tolerances.
    for (double h : {0.1, 0.05}) {
        const std::int64_t n = static_cast<std::int64_t>(std::llround(2.0 / h)) + 1;
        const GridPtr g = padded_1d(n, h, -1.0, 1);
        const GridFunction f =
            GridFunction::sample(g, [](auto x) { return x[0] * x[0] * x[0] * x[0]; });
        const GridFunction d = diff_second(f, {1});
        for (std::int64_t i = g->box_lo(0); i <= g->box_hi(0); ++i) {
            const double x = g->coordinate(0, i);
            const double residual = d[i] - 12.0 * x * x;
            CHECK(residual == doctest::Approx(2.0 * h * h).epsilon(1e-10));
        }
    }
}

TEST_CASE("parabolicity report classifies the standard cases") {
    const GridPtr g = periodic_1d(16);
    const std::vector<double> times = {0.0, 0.5};
    SUBCASE("heat is uniformly parabolic") {
        const auto cont = ContinuousOperator::constant({1.0}, {0.0}, 0.0, {}, {}, 1, 0);
        const auto rep = parabolicity_report(cont, g, times);
        CHECK(rep.min_eigenvalue == doctest::Approx(1.0));
        CHECK_FALSE(rep.degenerate);
        CHECK_FALSE(rep.indefinite);
    }
    SUBCASE("transport-diffusion is degenerate: a - sigma^2/2 = 0") {
        const auto cont = ContinuousOperator::constant({0.5}, {0.0}, 0.0, {1.0}, {0.0}, 1, 1);
        const auto rep = parabolicity_report(cont, g, times);
        CHECK(rep.min_eigenvalue == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
        CHECK(rep.degenerate);
    }
    SUBCASE("too much noise turns indefinite") {
        const auto cont = ContinuousOperator::constant({0.5}, {0.0}, 0.0, {1.5}, {0.0}, 1, 1);
        const auto rep = parabolicity_report(cont, g, times);
        CHECK(rep.indefinite);
    }
    SUBCASE("2-D matrix case") {
        const auto cont = ContinuousOperator::constant({1.0, 0.5, 0.5, 1.0}, {0.0, 0.0}, 0.0,
                                                       {}, {}, 2, 0);
        const GridPtr g2 = build_grid(2, 0.5, 8, {0.0, 0.0}, BoundaryMode::periodic, 0);
        const auto rep = parabolicity_report(cont, g2, times);
        CHECK(rep.min_eigenvalue == doctest::Approx(0.5).epsilon(1e-10));
    }
}

TEST_CASE("min_diffusion_weight surfaces the smallest sampled a_l") {
    OperatorSpec spec;
    spec.add_diffusion({1}, CoeffField::of([](double, std::span<const double> x) {
        return 1.0 + 0.5 * std::sin(x[0]);
    }, true));
    const GridPtr g = periodic_1d(64);
    const DiffusionFloor floor = min_diffusion_weight(spec, g, 0.0);
    CHECK(floor.min_value == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(floor.min_value >= 0.5 - 1e-12);

    // A sign-violating field is reported, not rejected.
    OperatorSpec bad;
    bad.add_diffusion({1}, CoeffField::of([](double, std::span<const double> x) {
        return std::sin(x[0]);
    }, true));
    const DiffusionFloor negative = min_diffusion_weight(bad, g, 0.0);
    CHECK(negative.min_value < -0.99);
    CHECK(negative.direction == Direction{1});
}
