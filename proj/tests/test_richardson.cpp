#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "spde/richardson.hpp"

using namespace spde;

namespace {

GridPtr unit_periodic(std::int64_t n) {
    return build_grid(1, 2.0 * std::numbers::pi / static_cast<double>(n), n, {0.0},
                      BoundaryMode::periodic, 0);
}

}  // namespace

TEST_CASE("weight tables match the hand-solved moment systems") {
    SUBCASE("k=0 is the identity weight") {
        const auto w = coefficients(0, 2);
        CHECK(w.weights == std::vector<double>{1.0});
        CHECK(w.rationals == std::vector<std::string>{"1"});
    }
    SUBCASE("k=1, step 1: classical Richardson 2u^{h/2} - u^h") {
        const auto w = coefficients(1, 1);
        CHECK(w.weights[0] == -1.0);
        CHECK(w.weights[1] == 2.0);
        CHECK(w.rationals[0] == "-1");
        CHECK(w.rationals[1] == "2");
    }
    SUBCASE("k=1, step 2: (-1/3, 4/3)") {
        const auto w = coefficients(1, 2);
        CHECK(w.weights[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
        CHECK(w.weights[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
        CHECK(w.rationals[0] == "-1/3");
        CHECK(w.rationals[1] == "4/3");
    }
    SUBCASE("k=2, step 2: (1/45, -4/9, 64/45)") {
        const auto w = coefficients(2, 2);
        CHECK(std::abs(w.weights[0] - 1.0 / 45.0) <= 1e-14);
        CHECK(std::abs(w.weights[1] + 4.0 / 9.0) <= 1e-14);
        CHECK(std::abs(w.weights[2] - 64.0 / 45.0) <= 1e-14);
        CHECK(w.rationals == std::vector<std::string>{"1/45", "-4/9", "64/45"});
    }
}

TEST_CASE("weights sum to one exactly and kill every moment up to k") {
    for (int step : {1, 2})
        for (int k = 0; k <= 8; ++k) {
            const auto w = coefficients(k, step);
            double sum = 0.0;
            for (int j = k; j >= 1; --j) sum += w.weights[static_cast<std::size_t>(j)];
            CHECK(w.weights[0] + sum == 1.0);  // exact by construction
            for (int m = 1; m <= k; ++m) CHECK(w.moment_residual(m) <= 1e-12);
        }
}

TEST_CASE("weight magnitudes stay tame for k <= 4") {
    for (int step : {1, 2})
        for (int k = 0; k <= 4; ++k) {
            const auto w = coefficients(k, step);
            double mass = 0.0;
            for (double c : w.weights) mass += std::abs(c);
            CHECK(mass <= 1e3);
        }
}

TEST_CASE("coefficients rejects out-of-range input") {
    CHECK_THROWS_AS(coefficients(9, 2), std::invalid_argument);
    CHECK_THROWS_AS(coefficients(-1, 2), std::invalid_argument);
    CHECK_THROWS_AS(coefficients(2, 3), std::invalid_argument);
    CHECK_THROWS_AS(coefficients(2, 0), std::invalid_argument);
}

TEST_CASE("extrapolate") {
    const GridPtr g0 = unit_periodic(16);
    const GridPtr g1 = refine(g0);
    const GridPtr g2 = refine(g1);

    SUBCASE("k=0 is the identity") {
        const GridFunction u = GridFunction::sample(g0, [](auto x) { return std::sin(x[0]); });
        const GridFunction out = extrapolate(std::vector<GridFunction>{u}, coefficients(0, 2));
        for (std::int64_t i = 0; i < u.size(); ++i) CHECK(out[i] == u[i]);
    }
    SUBCASE("identical fields pass through because the weights sum to 1") {
        const auto v = [](std::span<const double> x) { return std::cos(x[0]) - 0.4; };
        const std::vector<GridFunction> sols = {GridFunction::sample(g0, v),
                                                GridFunction::sample(g1, v),
                                                GridFunction::sample(g2, v)};
        const GridFunction out = extrapolate(sols, coefficients(2, 2));
        const GridFunction expect = GridFunction::sample(g0, v);
        for (std::int64_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-14));
    }
    SUBCASE("a planted h^2 term is annihilated at k=1, step 2") {
        const auto base = [](std::span<const double> x) { return std::sin(x[0]); };
        const auto noise = [](std::span<const double> x) { return std::cos(3.0 * x[0]); };
        const double h0 = g0->spacing();
        const GridFunction u0 = GridFunction::sample(g0, [&](auto x) {
            return base(x) + h0 * h0 * noise(x);
        });
        const double h1 = g1->spacing();
        const GridFunction u1 = GridFunction::sample(g1, [&](auto x) {
            return base(x) + h1 * h1 * noise(x);
        });
        const GridFunction out =
            extrapolate(std::vector<GridFunction>{u0, u1}, coefficients(1, 2));
        const GridFunction expect = GridFunction::sample(g0, base);
        for (std::int64_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-13));
    }
    SUBCASE("full annihilation property for k <= 3, both steps") {
        // u_j = U + sum_m alpha_m (2^-j)^(step*m) V_m recovers U exactly.
        const auto U = [](std::span<const double> x) { return std::sin(x[0]) + 0.3 * x[0]; };
        const std::vector<double> alpha = {0.9, -1.3, 0.7};
        for (int step : {1, 2})
            for (int k = 1; k <= 3; ++k) {
                const auto w = coefficients(k, step);
                std::vector<GridFunction> sols;
                GridPtr g = g0;
                for (int j = 0; j <= k; ++j) {
                    const double scale = std::pow(2.0, -j);
                    sols.push_back(GridFunction::sample(g, [&](std::span<const double> x) {
                        double v = U(x);
                        for (int m = 1; m <= k; ++m)
                            v += alpha[static_cast<std::size_t>(m - 1)] *
                                 std::pow(scale, step * m) * std::cos((m + 1) * x[0] + 0.2 * m);
                        return v;
                    }));
                    g = refine(g);
                }
                const GridFunction out = extrapolate(sols, w);
                const GridFunction expect = GridFunction::sample(g0, U);
                double worst = 0.0;
                for (std::int64_t i = 0; i < out.size(); ++i)
                    worst = std::max(worst, std::abs(out[i] - expect[i]));
                CHECK(worst <= 1e-12 * (1.0 + expect.max_abs()));
            }
    }
    SUBCASE("length and lineage mismatches are rejected") {
        const GridFunction u0(g0, 1.0);
        const GridFunction u1(g1, 1.0);
        CHECK_THROWS_AS(extrapolate(std::vector<GridFunction>{u0}, coefficients(1, 2)),
                        std::invalid_argument);
        CHECK_THROWS_AS(extrapolate(std::vector<GridFunction>{u0, u0}, coefficients(1, 2)),
                        std::invalid_argument);
        const GridPtr stranger =
            build_grid(1, g1->spacing(), 32, {0.5}, BoundaryMode::periodic, 0);
        CHECK_THROWS_AS(
            extrapolate(std::vector<GridFunction>{u0, GridFunction(stranger, 0.0)},
                        coefficients(1, 2)),
            std::invalid_argument);
    }
}

TEST_CASE("annihilation holds for randomized expansion coefficients") {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    const GridPtr g0 = unit_periodic(8);
    for (int trial = 0; trial < 10; ++trial) {
        const int step = 1 + static_cast<int>(rng() % 2);
        const int k = 1 + static_cast<int>(rng() % 3);
        std::vector<double> alpha;
        for (int m = 0; m < k; ++m) alpha.push_back(coeff(rng));
        const double offset = coeff(rng);

        std::vector<GridFunction> fields;
        GridPtr g = g0;
        for (int j = 0; j <= k; ++j) {
            const double scale = std::pow(2.0, -j);
            fields.push_back(GridFunction::sample(g, [&](std::span<const double> x) {
                double v = std::sin(x[0]) + offset;
                for (int m = 1; m <= k; ++m)
                    v += alpha[static_cast<std::size_t>(m - 1)] * std::pow(scale, step * m) *
                         std::sin((m + 1) * x[0] + 0.1 * m);
                return v;
            }));
            g = refine(g);
        }
        const GridFunction out = extrapolate(fields, coefficients(k, step));
        const GridFunction expect =
            GridFunction::sample(g0, [&](std::span<const double> x) {
                return std::sin(x[0]) + offset;
            });
        for (std::int64_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-11).scale(1.0));
    }
}

TEST_CASE("coefficients are deterministic") {
    const auto a = coefficients(4, 2);
    const auto b = coefficients(4, 2);
    CHECK(a.weights == b.weights);
    CHECK(a.rationals == b.rationals);
}
