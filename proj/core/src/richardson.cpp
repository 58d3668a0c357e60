#include "spde/richardson.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace spde {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("richardson: " + msg);
}

using Int = __int128;

Int int_abs(Int v) { return v < 0 ? -v : v; }

Int int_gcd(Int a, Int b) {
    a = int_abs(a);
    b = int_abs(b);
    while (b != 0) {
        const Int t = a % b;
        a = b;
        b = t;
    }
    return a;
}

std::string int_to_string(Int v) {
    if (v == 0) return "0";
    const bool neg = v < 0;
    if (neg) v = -v;
    std::string s;
    while (v > 0) {
        s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    return neg ? "-" + s : s;
}

// Exact rational on 128-bit integers; k <= 8, power_step <= 2 keeps every
// intermediate well inside the representable range.
struct Rational {
    Int num = 0;
    Int den = 1;

    void reduce() {
        if (den < 0) { num = -num; den = -den; }
        const Int g = int_gcd(num, den);
        if (g > 1) { num /= g; den /= g; }
    }
    static Rational make(Int n, Int d) {
        Rational r{n, d};
        r.reduce();
        return r;
    }
    Rational operator*(const Rational& o) const {
        const Int g1 = int_gcd(num, o.den);
        const Int g2 = int_gcd(o.num, den);
        return make((num / g1) * (o.num / g2), (den / g2) * (o.den / g1));
    }
    Rational operator-(const Rational& o) const {
        return make(num * o.den - o.num * den, den * o.den);
    }
    Rational operator/(const Rational& o) const {
        return *this * Rational{o.den, o.num};
    }
    double to_double() const {
        return static_cast<double>(static_cast<long double>(num) /
                                   static_cast<long double>(den));
    }
    std::string to_string() const {
        return den == 1 ? int_to_string(num) : int_to_string(num) + "/" + int_to_string(den);
    }
};

}  // namespace

double ExtrapolationWeights::moment_residual(int m) const {
    double s = 0.0;
    for (int j = 0; j <= k; ++j)
        s += weights[static_cast<std::size_t>(j)] *
             std::pow(2.0, -static_cast<double>(j) * power_step * m);
    return std::abs(s);
}

ExtrapolationWeights coefficients(int k, int power_step) {
    if (k < 0 || k > 8) fail("level count k must be in [0, 8]");
    if (power_step != 1 && power_step != 2) fail("power_step must be 1 or 2");

    // Nodes x_j = 2^{-power_step * j}; the moment system is solved by the
    // Lagrange weights for evaluation at 0: c_j = prod_{i != j} x_i / (x_i - x_j).
    std::vector<Rational> nodes;
    for (int j = 0; j <= k; ++j)
        nodes.push_back(Rational::make(1, Int{1} << (power_step * j)));

    ExtrapolationWeights out;
    out.k = k;
    out.power_step = power_step;
    for (int j = 0; j <= k; ++j) {
        Rational c{1, 1};
        for (int i = 0; i <= k; ++i) {
            if (i == j) continue;
            c = c * (nodes[static_cast<std::size_t>(i)] /
                     (nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)]));
        }
        out.weights.push_back(c.to_double());
        out.rationals.push_back(c.to_string());
    }

    // Pin the float sum to 1 exactly.
    double tail = 0.0;
    for (int j = k; j >= 1; --j) tail += out.weights[static_cast<std::size_t>(j)];
    out.weights[0] = 1.0 - tail;

    for (int m = 1; m <= k; ++m)
        if (out.moment_residual(m) > 1e-12)
            throw std::logic_error("richardson: moment condition violated after rounding");
    return out;
}

GridFunction extrapolate(std::span<const GridFunction> solutions,
                         const ExtrapolationWeights& weights) {
    if (static_cast<int>(solutions.size()) != weights.k + 1)
        fail("expected " + std::to_string(weights.k + 1) + " solutions, got " +
             std::to_string(solutions.size()));
    const GridPtr coarse = solutions[0].grid();
    const double h0 = coarse->spacing();
    for (std::size_t j = 1; j < solutions.size(); ++j) {
        const double expected = h0 / static_cast<double>(std::int64_t{1} << j);
        if (solutions[j].grid()->spacing() != expected)
            fail("solutions must sit on a halving chain h, h/2, ..., h/2^k");
    }

    GridFunction out(coarse);
    for (std::size_t j = 0; j < solutions.size(); ++j) {
        const GridFunction on_coarse =
            j == 0 ? solutions[0] : restrict_to(solutions[j], coarse);
        const double c = weights.weights[j];
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] += c * on_coarse[i];
    }
    return out;
}

}  // namespace spde
