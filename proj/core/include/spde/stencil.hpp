#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spde/lattice.hpp"

namespace spde {

/// Stencil direction: a nonzero integer lattice vector, in units of grid steps.
using Direction = std::vector<int>;

/// Scalar coefficient field of (t, x). Constant fields carry their value so
/// callers can recognize them (the spectral integrator requires constants),
/// and time-independent fields may be sampled once and reused across steps.
class CoeffField {
public:
    using Fn = std::function<double(double, std::span<const double>)>;

    CoeffField() = default;  // zero
    static CoeffField constant(double value);
    static CoeffField of(Fn fn, bool time_independent = false);

    double operator()(double t, std::span<const double> x) const {
        return fn_ ? fn_(t, x) : value_;
    }
    bool is_constant() const { return !fn_; }
    double constant_value() const { return value_; }
    bool is_zero() const { return !fn_ && value_ == 0.0; }
    bool time_independent() const { return !fn_ || time_independent_; }

private:
    Fn fn_;                         // empty means constant
    double value_ = 0.0;
    bool time_independent_ = false;
};

/// Free-term field f or g^rho. Besides (t, x) it sees the Wiener values W(t),
/// which is how path-dependent manufactured forcings reach the integrator.
class ForcingField {
public:
    using Fn = std::function<double(double, std::span<const double>, std::span<const double>)>;

    ForcingField() = default;  // zero
    static ForcingField of(Fn fn);

    double operator()(double t, std::span<const double> x, std::span<const double> w) const {
        return fn_ ? fn_(t, x, w) : 0.0;
    }
    bool is_zero() const { return !fn_; }

private:
    Fn fn_;
};

/// Directional-form specification of the operators
///   L u = sum_l a_l D2_l u + sum_l b_l D1_l u + c u
///   M^r u = sum_l sigma_l^r D1_l u + nu^r u
/// where D2_l is the symmetric second difference along direction l and D1_l
/// is the central difference in symmetric mode, the forward difference
/// otherwise. Coefficients are stored aligned with the direction list, so
/// every coefficient's direction is in the direction set by construction.
class OperatorSpec {
public:
    OperatorSpec() = default;

    void add_diffusion(Direction dir, CoeffField a);
    void add_drift(Direction dir, CoeffField b);
    void set_reaction(CoeffField c) { reaction_ = std::move(c); }
    void set_noise_count(int d1);
    void add_noise_gradient(int rho, Direction dir, CoeffField sigma);
    void set_noise_mass(int rho, CoeffField nu);
    void set_free_drift(ForcingField f) { free_drift_ = std::move(f); }
    void set_free_noise(int rho, ForcingField g);
    void set_symmetric_mode(bool on) { symmetric_mode_ = on; }

    int dim() const { return dim_; }
    const std::vector<Direction>& directions() const { return directions_; }
    int noise_count() const { return noise_count_; }
    bool symmetric_mode() const { return symmetric_mode_; }

    const CoeffField& diffusion(int dir_index) const { return diffusion_[static_cast<std::size_t>(dir_index)]; }
    const CoeffField& drift(int dir_index) const { return drift_[static_cast<std::size_t>(dir_index)]; }
    const CoeffField& reaction() const { return reaction_; }
    const CoeffField& noise_gradient(int rho, int dir_index) const {
        return noise_gradient_[static_cast<std::size_t>(rho)][static_cast<std::size_t>(dir_index)];
    }
    const CoeffField& noise_mass(int rho) const { return noise_mass_[static_cast<std::size_t>(rho)]; }
    const ForcingField& free_drift() const { return free_drift_; }
    const ForcingField& free_noise(int rho) const { return free_noise_[static_cast<std::size_t>(rho)]; }

    bool has_free_terms() const;
    bool all_coefficients_constant() const;
    bool all_time_independent() const;

private:
    int direction_index(const Direction& dir);
    void check_rho(int rho) const;

    int dim_ = 0;
    std::vector<Direction> directions_;
    std::vector<CoeffField> diffusion_;
    std::vector<CoeffField> drift_;
    CoeffField reaction_;
    int noise_count_ = 0;
    std::vector<std::vector<CoeffField>> noise_gradient_;  // [rho][dir]
    std::vector<CoeffField> noise_mass_;                   // [rho]
    ForcingField free_drift_;
    std::vector<ForcingField> free_noise_;                 // [rho]
    bool symmetric_mode_ = true;
};

// Difference operators along a direction; h is the grid spacing.
GridFunction diff_forward(const GridFunction& f, const Direction& dir);   // (f(x+hl)-f(x))/h
GridFunction diff_backward(const GridFunction& f, const Direction& dir);  // (f(x)-f(x-hl))/h
GridFunction diff_central(const GridFunction& f, const Direction& dir);   // (f(x+hl)-f(x-hl))/2h
GridFunction diff_second(const GridFunction& f, const Direction& dir);    // (f(x+hl)-2f(x)+f(x-hl))/h^2

/// Coefficients of the operator sampled on a grid at a fixed time, with
/// neighbor tables precomputed. This is the kernel form the time stepping
/// loops reuse; apply_L / apply_M are one-shot wrappers around it.
class SampledOperator {
public:
    static SampledOperator sample(const OperatorSpec& spec, const GridPtr& grid, double t);

    void apply_L(std::span<const double> u, std::span<double> out) const;
    void apply_M(int rho, std::span<const double> u, std::span<double> out) const;
    /// Diagonal of the matrix of L_h (used for preconditioning).
    void diagonal_L(std::span<double> out) const;

    double time() const { return t_; }
    /// True when re-sampling at another time would produce identical data.
    bool reusable_across_time() const { return reusable_; }
    const GridPtr& grid() const { return grid_; }
    int noise_count() const { return static_cast<int>(sigma_.size()); }

private:
    GridPtr grid_;
    double t_ = 0.0;
    double h_ = 0.0;
    bool symmetric_ = true;
    bool reusable_ = false;
    // Per direction: neighbor flat indices (-1 = outside a zero-padded box).
    std::vector<std::vector<std::int64_t>> plus_;
    std::vector<std::vector<std::int64_t>> minus_;
    std::vector<std::vector<double>> a_;       // [dir][node], empty if zero
    std::vector<std::vector<double>> b_;       // [dir][node]
    std::vector<double> c_;                    // [node], empty if zero
    std::vector<std::vector<std::vector<double>>> sigma_;  // [rho][dir][node]
    std::vector<std::vector<double>> nu_;      // [rho][node]
};

/// Discrete L_h applied to u with coefficients evaluated at time t.
GridFunction apply_L(const OperatorSpec& spec, double t, const GridFunction& u);
/// Discrete M_h^rho applied to u. Throws std::invalid_argument for rho out of range.
GridFunction apply_M(const OperatorSpec& spec, int rho, double t, const GridFunction& u);

/// Continuous-side operator data, used by consistency and parabolicity checks:
/// L = a^{ij} D_i D_j + b^i D_i + c, M^rho = sigma^{i rho} D_i + nu^rho.
struct ContinuousOperator {
    int dim = 0;
    int noise_count = 0;
    std::function<std::vector<double>(double, std::span<const double>)> a;      // d x d row-major
    std::function<std::vector<double>(double, std::span<const double>)> b;      // d
    CoeffField c;
    std::function<std::vector<double>(double, std::span<const double>)> sigma;  // d x d1 row-major
    std::function<std::vector<double>(double, std::span<const double>)> nu;     // d1

    static ContinuousOperator constant(std::vector<double> a, std::vector<double> b,
                                       double c, std::vector<double> sigma,
                                       std::vector<double> nu, int dim, int noise_count);
};

struct DiffusionDecomposition {
    std::vector<double> weights;  // aligned with the direction list passed in
    double residual;              // max entrywise reconstruction error
};

class DecompositionError : public std::runtime_error {
public:
    DecompositionError(const std::string& msg, double residual, std::vector<double> best);
    double residual;
    std::vector<double> best_weights;
};

/// Find nonnegative weights with sum_l w_l l l^T = a. Axis plus diagonal
/// direction sets use the classical monotone construction; anything else
/// falls back to nonnegative least squares. Throws DecompositionError
/// (carrying the best residual) when no nonnegative decomposition fits.
DiffusionDecomposition decompose_diffusion(std::span<const double> a_matrix, int dim,
                                           std::span<const Direction> directions);

struct ConsistencyEntry {
    std::string op;                 // "L" or "M[rho]"
    std::vector<int> exponents;     // monomial x^e
    double max_abs_residual;
    double max_scaled_residual;     // residual / max(1, |x|_inf^2) at the worst node
};

struct ConsistencyReport {
    std::vector<ConsistencyEntry> entries;
    double worst_scaled = 0.0;
};

/// Apply the discrete operators to all monomials of total degree <= degree on
/// stencil-interior nodes and compare against the analytic image under the
/// continuous operator. degree must be 1 or 2. Report only; never throws on
/// large residuals.
ConsistencyReport consistency_check(const OperatorSpec& spec, const ContinuousOperator& cont,
                                    const GridPtr& grid, int degree, double t = 0.0);

struct ParabolicityReport {
    double min_eigenvalue = 0.0;    // of a - (1/2) sigma sigma^T over samples
    std::vector<double> at_x;
    double at_t = 0.0;
    bool degenerate = false;        // |min| <= tol
    bool indefinite = false;        // min < -tol
};

/// Sample a - (1/2) sigma sigma^T over grid nodes at the given times and
/// report the smallest eigenvalue seen. Reported, not enforced; degenerate
/// problems are legitimate.
ParabolicityReport parabolicity_report(const ContinuousOperator& cont, const GridPtr& grid,
                                       std::span<const double> times);

/// Smallest sampled diffusion weight a_l(t, x); negative values break the
/// monotone form of the scheme and are worth surfacing.
struct DiffusionFloor {
    double min_value = 0.0;
    Direction direction;
    std::vector<double> at_x;
};
DiffusionFloor min_diffusion_weight(const OperatorSpec& spec, const GridPtr& grid, double t);

}  // namespace spde
