#include "spde/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace spde {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("stencil: " + msg); }

std::string node_label(const Grid& grid, std::int64_t flat) {
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    grid.coordinates(flat, x);
    std::ostringstream os;
    os << "node " << flat << " at x=(";
    for (int a = 0; a < grid.dim(); ++a) os << (a ? "," : "") << x[a];
    os << ")";
    return os.str();
}

void check_direction(const Direction& dir, int dim) {
    if (dim > 0 && static_cast<int>(dir.size()) != dim) fail("direction dimension mismatch");
    if (std::all_of(dir.begin(), dir.end(), [](int c) { return c == 0; }))
        fail("direction must be nonzero");
}

// Flat index of node + sign*dir, or -1 when it falls outside a padded box.
std::vector<std::int64_t> neighbor_table(const Grid& grid, const Direction& dir, int sign) {
    std::vector<std::int64_t> table(static_cast<std::size_t>(grid.node_count()));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(grid.dim()), 0);
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
        std::int64_t flat = 0;
        bool outside = false;
        for (int a = 0; a < grid.dim(); ++a) {
            std::int64_t j = idx[a] + sign * dir[static_cast<std::size_t>(a)];
            const std::int64_t n = grid.extents()[a];
            if (grid.boundary_mode() == BoundaryMode::periodic) {
                j %= n;
                if (j < 0) j += n;
            } else if (j < 0 || j >= n) {
                outside = true;
                break;
            }
            flat += j * grid.strides()[a];
        }
        table[static_cast<std::size_t>(i)] = outside ? -1 : flat;
        for (int a = grid.dim() - 1; a >= 0; --a) {
            if (++idx[a] < grid.extents()[a]) break;
            idx[a] = 0;
        }
    }
    return table;
}

inline double at(std::span<const double> u, std::int64_t i) {
    return i < 0 ? 0.0 : u[static_cast<std::size_t>(i)];
}

}  // namespace

CoeffField CoeffField::constant(double value) {
    CoeffField f;
    f.value_ = value;
    return f;
}

CoeffField CoeffField::of(Fn fn, bool time_independent) {
    CoeffField f;
    f.fn_ = std::move(fn);
    f.time_independent_ = time_independent;
    return f;
}

ForcingField ForcingField::of(Fn fn) {
    ForcingField f;
    f.fn_ = std::move(fn);
    return f;
}

int OperatorSpec::direction_index(const Direction& dir) {
    if (dim_ == 0) dim_ = static_cast<int>(dir.size());
    check_direction(dir, dim_);
    for (std::size_t i = 0; i < directions_.size(); ++i)
        if (directions_[i] == dir) return static_cast<int>(i);
    directions_.push_back(dir);
    diffusion_.emplace_back();
    drift_.emplace_back();
    for (auto& row : noise_gradient_) row.emplace_back();
    return static_cast<int>(directions_.size()) - 1;
}

void OperatorSpec::check_rho(int rho) const {
    if (rho < 0 || rho >= noise_count_)
        fail("noise component " + std::to_string(rho) + " out of range [0, " +
             std::to_string(noise_count_) + ")");
}

void OperatorSpec::add_diffusion(Direction dir, CoeffField a) {
    diffusion_[static_cast<std::size_t>(direction_index(dir))] = std::move(a);
}

void OperatorSpec::add_drift(Direction dir, CoeffField b) {
    drift_[static_cast<std::size_t>(direction_index(dir))] = std::move(b);
}

void OperatorSpec::set_noise_count(int d1) {
    if (d1 < 0) fail("noise count must be nonnegative");
    noise_count_ = d1;
    noise_gradient_.assign(static_cast<std::size_t>(d1),
                           std::vector<CoeffField>(directions_.size()));
    noise_mass_.assign(static_cast<std::size_t>(d1), CoeffField());
    free_noise_.assign(static_cast<std::size_t>(d1), ForcingField());
}

void OperatorSpec::add_noise_gradient(int rho, Direction dir, CoeffField sigma) {
    check_rho(rho);
    noise_gradient_[static_cast<std::size_t>(rho)][static_cast<std::size_t>(direction_index(dir))] =
        std::move(sigma);
}

void OperatorSpec::set_noise_mass(int rho, CoeffField nu) {
    check_rho(rho);
    noise_mass_[static_cast<std::size_t>(rho)] = std::move(nu);
}

void OperatorSpec::set_free_noise(int rho, ForcingField g) {
    check_rho(rho);
    free_noise_[static_cast<std::size_t>(rho)] = std::move(g);
}

bool OperatorSpec::has_free_terms() const {
    if (!free_drift_.is_zero()) return true;
    return std::any_of(free_noise_.begin(), free_noise_.end(),
                       [](const ForcingField& g) { return !g.is_zero(); });
}

bool OperatorSpec::all_coefficients_constant() const {
    auto all = [](const std::vector<CoeffField>& v) {
        return std::all_of(v.begin(), v.end(), [](const CoeffField& f) { return f.is_constant(); });
    };
    if (!all(diffusion_) || !all(drift_) || !all(noise_mass_) || !reaction_.is_constant())
        return false;
    for (const auto& row : noise_gradient_)
        if (!all(row)) return false;
    return true;
}

bool OperatorSpec::all_time_independent() const {
    auto all = [](const std::vector<CoeffField>& v) {
        return std::all_of(v.begin(), v.end(),
                           [](const CoeffField& f) { return f.time_independent(); });
    };
    if (!all(diffusion_) || !all(drift_) || !all(noise_mass_) || !reaction_.time_independent())
        return false;
    for (const auto& row : noise_gradient_)
        if (!all(row)) return false;
    return true;
}

namespace {

enum class DiffKind { forward, backward, central, second };

GridFunction difference(const GridFunction& f, const Direction& dir, DiffKind kind) {
    const Grid& g = *f.grid();
    check_direction(dir, g.dim());
    const double h = g.spacing();
    GridFunction out(f.grid());
    const auto u = f.values();
    const auto plus = neighbor_table(g, dir, +1);
    const auto minus = neighbor_table(g, dir, -1);
    const std::int64_t n = g.node_count();
    for (std::int64_t i = 0; i < n; ++i) {
        const double ui = u[static_cast<std::size_t>(i)];
        switch (kind) {
            case DiffKind::forward:
                out[i] = (at(u, plus[static_cast<std::size_t>(i)]) - ui) / h;
                break;
            case DiffKind::backward:
                out[i] = (ui - at(u, minus[static_cast<std::size_t>(i)])) / h;
                break;
            case DiffKind::central:
                out[i] = (at(u, plus[static_cast<std::size_t>(i)]) -
                          at(u, minus[static_cast<std::size_t>(i)])) / (2.0 * h);
                break;
            case DiffKind::second:
                out[i] = (at(u, plus[static_cast<std::size_t>(i)]) - 2.0 * ui +
                          at(u, minus[static_cast<std::size_t>(i)])) / (h * h);
                break;
        }
    }
    return out;
}

}  // namespace

GridFunction diff_forward(const GridFunction& f, const Direction& dir) {
    return difference(f, dir, DiffKind::forward);
}
GridFunction diff_backward(const GridFunction& f, const Direction& dir) {
    return difference(f, dir, DiffKind::backward);
}
GridFunction diff_central(const GridFunction& f, const Direction& dir) {
    return difference(f, dir, DiffKind::central);
}
GridFunction diff_second(const GridFunction& f, const Direction& dir) {
    return difference(f, dir, DiffKind::second);
}

SampledOperator SampledOperator::sample(const OperatorSpec& spec, const GridPtr& grid,
                                        double t) {
    if (spec.dim() != 0 && spec.dim() != grid->dim())
        fail("operator dimension does not match the grid");
    SampledOperator op;
    op.grid_ = grid;
    op.t_ = t;
    op.h_ = grid->spacing();
    op.symmetric_ = spec.symmetric_mode();
    op.reusable_ = spec.all_time_independent();

    const std::int64_t n = grid->node_count();
    std::vector<double> x(static_cast<std::size_t>(grid->dim()));

    auto sample_field = [&](const CoeffField& f, const char* what) -> std::vector<double> {
        if (f.is_zero()) return {};
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            grid->coordinates(i, x);
            const double v = f(t, x);
            if (!std::isfinite(v))
                throw std::runtime_error(std::string("stencil: non-finite ") + what + " at " +
                                         node_label(*grid, i) + ", t=" + std::to_string(t));
            vals[static_cast<std::size_t>(i)] = v;
        }
        return vals;
    };

    const auto& dirs = spec.directions();
    op.plus_.resize(dirs.size());
    op.minus_.resize(dirs.size());
    op.a_.resize(dirs.size());
    op.b_.resize(dirs.size());
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        op.plus_[d] = neighbor_table(*grid, dirs[d], +1);
        op.minus_[d] = neighbor_table(*grid, dirs[d], -1);
        op.a_[d] = sample_field(spec.diffusion(static_cast<int>(d)), "diffusion coefficient");
        op.b_[d] = sample_field(spec.drift(static_cast<int>(d)), "drift coefficient");
    }
    op.c_ = sample_field(spec.reaction(), "reaction coefficient");
    op.sigma_.resize(static_cast<std::size_t>(spec.noise_count()));
    op.nu_.resize(static_cast<std::size_t>(spec.noise_count()));
    for (int rho = 0; rho < spec.noise_count(); ++rho) {
        op.sigma_[static_cast<std::size_t>(rho)].resize(dirs.size());
        for (std::size_t d = 0; d < dirs.size(); ++d)
            op.sigma_[static_cast<std::size_t>(rho)][d] =
                sample_field(spec.noise_gradient(rho, static_cast<int>(d)), "noise gradient coefficient");
        op.nu_[static_cast<std::size_t>(rho)] =
            sample_field(spec.noise_mass(rho), "noise mass coefficient");
    }
    return op;
}

void SampledOperator::apply_L(std::span<const double> u, std::span<double> out) const {
    const std::int64_t n = grid_->node_count();
    const double inv_h2 = 1.0 / (h_ * h_);
    const double inv_2h = 1.0 / (2.0 * h_);
    const double inv_h = 1.0 / h_;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t d = 0; d < plus_.size(); ++d) {
        const auto& plus = plus_[d];
        const auto& minus = minus_[d];
        if (!a_[d].empty()) {
            const auto& a = a_[d];
            for (std::int64_t i = 0; i < n; ++i) {
                const std::size_t s = static_cast<std::size_t>(i);
                out[s] += a[s] * (at(u, plus[s]) - 2.0 * u[s] + at(u, minus[s])) * inv_h2;
            }
        }
        if (!b_[d].empty()) {
            const auto& b = b_[d];
            if (symmetric_) {
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::size_t s = static_cast<std::size_t>(i);
                    out[s] += b[s] * (at(u, plus[s]) - at(u, minus[s])) * inv_2h;
                }
            } else {
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::size_t s = static_cast<std::size_t>(i);
                    out[s] += b[s] * (at(u, plus[s]) - u[s]) * inv_h;
                }
            }
        }
    }
    if (!c_.empty())
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t s = static_cast<std::size_t>(i);
            out[s] += c_[s] * u[s];
        }
}

void SampledOperator::apply_M(int rho, std::span<const double> u, std::span<double> out) const {
    if (rho < 0 || rho >= noise_count())
        fail("noise component " + std::to_string(rho) + " out of range [0, " +
             std::to_string(noise_count()) + ")");
    const std::int64_t n = grid_->node_count();
    const double inv_2h = 1.0 / (2.0 * h_);
    const double inv_h = 1.0 / h_;
    std::fill(out.begin(), out.end(), 0.0);
    const auto& sig = sigma_[static_cast<std::size_t>(rho)];
    for (std::size_t d = 0; d < plus_.size(); ++d) {
        if (sig[d].empty()) continue;
        const auto& s_vals = sig[d];
        const auto& plus = plus_[d];
        const auto& minus = minus_[d];
        if (symmetric_) {
            for (std::int64_t i = 0; i < n; ++i) {
                const std::size_t s = static_cast<std::size_t>(i);
                out[s] += s_vals[s] * (at(u, plus[s]) - at(u, minus[s])) * inv_2h;
            }
        } else {
            for (std::int64_t i = 0; i < n; ++i) {
                const std::size_t s = static_cast<std::size_t>(i);
                out[s] += s_vals[s] * (at(u, plus[s]) - u[s]) * inv_h;
            }
        }
    }
    const auto& nu = nu_[static_cast<std::size_t>(rho)];
    if (!nu.empty())
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t s = static_cast<std::size_t>(i);
            out[s] += nu[s] * u[s];
        }
}

void SampledOperator::diagonal_L(std::span<double> out) const {
    const std::int64_t n = grid_->node_count();
    const double inv_h2 = 1.0 / (h_ * h_);
    const double inv_h = 1.0 / h_;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t d = 0; d < plus_.size(); ++d) {
        if (!a_[d].empty())
            for (std::int64_t i = 0; i < n; ++i)
                out[static_cast<std::size_t>(i)] -= 2.0 * a_[d][static_cast<std::size_t>(i)] * inv_h2;
        if (!b_[d].empty() && !symmetric_)
            for (std::int64_t i = 0; i < n; ++i)
                out[static_cast<std::size_t>(i)] -= b_[d][static_cast<std::size_t>(i)] * inv_h;
    }
    if (!c_.empty())
        for (std::int64_t i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] += c_[static_cast<std::size_t>(i)];
}

GridFunction apply_L(const OperatorSpec& spec, double t, const GridFunction& u) {
    GridFunction out(u.grid());
    SampledOperator::sample(spec, u.grid(), t).apply_L(u.values(), out.values());
    return out;
}

GridFunction apply_M(const OperatorSpec& spec, int rho, double t, const GridFunction& u) {
    GridFunction out(u.grid());
    SampledOperator::sample(spec, u.grid(), t).apply_M(rho, u.values(), out.values());
    return out;
}

ContinuousOperator ContinuousOperator::constant(std::vector<double> a, std::vector<double> b,
                                                double c, std::vector<double> sigma,
                                                std::vector<double> nu, int dim,
                                                int noise_count) {
    ContinuousOperator op;
    op.dim = dim;
    op.noise_count = noise_count;
    op.a = [a](double, std::span<const double>) { return a; };
    op.b = [b](double, std::span<const double>) { return b; };
    op.c = CoeffField::constant(c);
    op.sigma = [sigma](double, std::span<const double>) { return sigma; };
    op.nu = [nu](double, std::span<const double>) { return nu; };
    return op;
}

// ---------------------------------------------------------------------------
// Diffusion decomposition
// ---------------------------------------------------------------------------

DecompositionError::DecompositionError(const std::string& msg, double res,
                                       std::vector<double> best)
    : std::runtime_error(msg), residual(res), best_weights(std::move(best)) {}

namespace {

int find_direction(std::span<const Direction> dirs, const Direction& wanted) {
    for (std::size_t i = 0; i < dirs.size(); ++i)
        if (dirs[i] == wanted) return static_cast<int>(i);
    return -1;
}

double reconstruction_residual(std::span<const double> a, int dim,
                               std::span<const Direction> dirs,
                               std::span<const double> w) {
    double worst = 0.0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < dirs.size(); ++d)
                s += w[d] * dirs[d][static_cast<std::size_t>(i)] * dirs[d][static_cast<std::size_t>(j)];
            worst = std::max(worst, std::abs(s - a[static_cast<std::size_t>(i * dim + j)]));
        }
    return worst;
}

// Lawson-Hanson nonnegative least squares on a small dense system.
std::vector<double> nnls(const std::vector<std::vector<double>>& cols,
                         const std::vector<double>& b) {
    const std::size_t ncols = cols.size();
    const std::size_t nrows = b.size();
    std::vector<double> w(ncols, 0.0);
    std::vector<bool> passive(ncols, false);
    std::vector<double> residual = b;

    auto solve_passive = [&](std::vector<double>& z) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < ncols; ++j)
            if (passive[j]) idx.push_back(j);
        const std::size_t m = idx.size();
        std::vector<double> G(m * m, 0.0), rhs(m, 0.0);
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = 0; q < m; ++q)
                for (std::size_t r = 0; r < nrows; ++r)
                    G[p * m + q] += cols[idx[p]][r] * cols[idx[q]][r];
            for (std::size_t r = 0; r < nrows; ++r) rhs[p] += cols[idx[p]][r] * b[r];
        }
        // Gaussian elimination with partial pivoting.
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t piv = k;
            for (std::size_t r = k + 1; r < m; ++r)
                if (std::abs(G[r * m + k]) > std::abs(G[piv * m + k])) piv = r;
            if (piv != k) {
                for (std::size_t cq = 0; cq < m; ++cq) std::swap(G[k * m + cq], G[piv * m + cq]);
                std::swap(rhs[k], rhs[piv]);
            }
            const double pivot = G[k * m + k];
            if (std::abs(pivot) < 1e-300) { rhs[k] = 0.0; continue; }
            for (std::size_t r = k + 1; r < m; ++r) {
                const double factor = G[r * m + k] / pivot;
                for (std::size_t cq = k; cq < m; ++cq) G[r * m + cq] -= factor * G[k * m + cq];
                rhs[r] -= factor * rhs[k];
            }
        }
        for (std::size_t k = m; k-- > 0;) {
            double s = rhs[k];
            for (std::size_t cq = k + 1; cq < m; ++cq) s -= G[k * m + cq] * rhs[cq];
            const double pivot = G[k * m + k];
            rhs[k] = std::abs(pivot) < 1e-300 ? 0.0 : s / pivot;
        }
        z.assign(ncols, 0.0);
        for (std::size_t p = 0; p < m; ++p) z[idx[p]] = rhs[p];
    };

    const double grad_tol = 1e-12;
    for (std::size_t outer = 0; outer < 4 * ncols + 8; ++outer) {
        // Most negative gradient of 0.5||Aw-b||^2 among active columns.
        std::size_t best = ncols;
        double best_grad = grad_tol;
        for (std::size_t j = 0; j < ncols; ++j) {
            if (passive[j]) continue;
            double g = 0.0;
            for (std::size_t r = 0; r < nrows; ++r) g += cols[j][r] * residual[r];
            if (g > best_grad) { best_grad = g; best = j; }
        }
        if (best == ncols) break;
        passive[best] = true;

        std::vector<double> z;
        for (std::size_t inner = 0; inner < 4 * ncols + 8; ++inner) {
            solve_passive(z);
            bool feasible = true;
            double alpha = 1.0;
            for (std::size_t j = 0; j < ncols; ++j) {
                if (!passive[j] || z[j] > 1e-14) continue;
                feasible = false;
                const double denom = w[j] - z[j];
                if (denom > 0) alpha = std::min(alpha, w[j] / denom);
            }
            if (feasible) { w = z; break; }
            for (std::size_t j = 0; j < ncols; ++j)
                if (passive[j]) w[j] += alpha * (z[j] - w[j]);
            for (std::size_t j = 0; j < ncols; ++j)
                if (passive[j] && w[j] <= 1e-14) { w[j] = 0.0; passive[j] = false; }
        }
        for (std::size_t r = 0; r < nrows; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < ncols; ++j) s += cols[j][r] * w[j];
            residual[r] = b[r] - s;
        }
    }
    return w;
}

}  // namespace

DiffusionDecomposition decompose_diffusion(std::span<const double> a_matrix, int dim,
                                           std::span<const Direction> directions) {
    if (dim < 1) fail("dim must be positive");
    if (static_cast<int>(a_matrix.size()) != dim * dim) fail("a_matrix must be dim x dim");
    if (directions.empty()) fail("direction set is empty");
    double scale = 1.0;
    for (double v : a_matrix) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (std::abs(a_matrix[static_cast<std::size_t>(i * dim + j)] -
                         a_matrix[static_cast<std::size_t>(j * dim + i)]) > 1e-12 * scale)
                fail("a_matrix must be symmetric");
    for (const auto& d : directions) check_direction(d, dim);

    const double exact_tol = 1e-10 * scale;

    // Classical monotone construction on axis + diagonal stencils:
    // w[e_i +- e_j] = |a_ij|, w[e_i] = a_ii - sum_j |a_ij|.
    {
        std::vector<double> w(directions.size(), 0.0);
        bool applicable = true;
        std::vector<int> axis_index(static_cast<std::size_t>(dim), -1);
        for (int i = 0; i < dim && applicable; ++i) {
            Direction e(static_cast<std::size_t>(dim), 0);
            e[static_cast<std::size_t>(i)] = 1;
            axis_index[static_cast<std::size_t>(i)] = find_direction(directions, e);
            if (axis_index[static_cast<std::size_t>(i)] < 0) applicable = false;
        }
        std::vector<double> off_sum(static_cast<std::size_t>(dim), 0.0);
        for (int i = 0; i < dim && applicable; ++i)
            for (int j = i + 1; j < dim && applicable; ++j) {
                const double aij = a_matrix[static_cast<std::size_t>(i * dim + j)];
                if (aij == 0.0) continue;
                Direction diag(static_cast<std::size_t>(dim), 0);
                diag[static_cast<std::size_t>(i)] = 1;
                diag[static_cast<std::size_t>(j)] = aij > 0 ? 1 : -1;
                const int di = find_direction(directions, diag);
                if (di < 0) { applicable = false; break; }
                w[static_cast<std::size_t>(di)] += std::abs(aij);
                off_sum[static_cast<std::size_t>(i)] += std::abs(aij);
                off_sum[static_cast<std::size_t>(j)] += std::abs(aij);
            }
        if (applicable) {
            for (int i = 0; i < dim; ++i) {
                const double wi = a_matrix[static_cast<std::size_t>(i * dim + i)] -
                                  off_sum[static_cast<std::size_t>(i)];
                if (wi < 0.0) { applicable = false; break; }
                w[static_cast<std::size_t>(axis_index[static_cast<std::size_t>(i)])] += wi;
            }
        }
        if (applicable) {
            const double res = reconstruction_residual(a_matrix, dim, directions, w);
            if (res <= exact_tol) return {std::move(w), res};
        }
    }

    // General direction sets: nonnegative least squares on the moment system.
    std::vector<std::vector<double>> cols(directions.size());
    std::vector<double> rhs;
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j)
            rhs.push_back(a_matrix[static_cast<std::size_t>(i * dim + j)]);
    for (std::size_t d = 0; d < directions.size(); ++d) {
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j)
                cols[d].push_back(static_cast<double>(directions[d][static_cast<std::size_t>(i)] *
                                                      directions[d][static_cast<std::size_t>(j)]));
    }
    std::vector<double> w = nnls(cols, rhs);
    const double res = reconstruction_residual(a_matrix, dim, directions, w);
    if (res > exact_tol)
        throw DecompositionError(
            "stencil: no nonnegative decomposition over the given directions (best residual " +
                std::to_string(res) + ")",
            res, std::move(w));
    return {std::move(w), res};
}

// ---------------------------------------------------------------------------
// Consistency and parabolicity
// ---------------------------------------------------------------------------

namespace {

void enumerate_monomials(int dim, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> e(static_cast<std::size_t>(dim), 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == dim) { out.push_back(e); return; }
        for (int p = 0; p <= left; ++p) {
            e[static_cast<std::size_t>(axis)] = p;
            rec(axis + 1, left - p);
        }
        e[static_cast<std::size_t>(axis)] = 0;
    };
    rec(0, degree);
}

double monomial_value(std::span<const int> e, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t a = 0; a < e.size(); ++a)
        for (int p = 0; p < e[a]; ++p) v *= x[a];
    return v;
}

double monomial_d1(std::span<const int> e, std::span<const double> x, int i) {
    if (e[static_cast<std::size_t>(i)] == 0) return 0.0;
    std::vector<int> f(e.begin(), e.end());
    f[static_cast<std::size_t>(i)] -= 1;
    return e[static_cast<std::size_t>(i)] * monomial_value(f, x);
}

double monomial_d2(std::span<const int> e, std::span<const double> x, int i, int j) {
    std::vector<int> f(e.begin(), e.end());
    double coef = f[static_cast<std::size_t>(i)];
    if (coef == 0.0) return 0.0;
    f[static_cast<std::size_t>(i)] -= 1;
    coef *= f[static_cast<std::size_t>(j)];
    if (coef == 0.0) return 0.0;
    f[static_cast<std::size_t>(j)] -= 1;
    return coef * monomial_value(f, x);
}

// Jacobi eigenvalue sweep for a small symmetric matrix; returns the min eigenvalue.
double min_eigenvalue_sym(std::vector<double> m, int dim) {
    if (dim == 1) return m[0];
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < dim; ++p)
            for (int q = p + 1; q < dim; ++q) off += std::abs(m[static_cast<std::size_t>(p * dim + q)]);
        if (off < 1e-15) break;
        for (int p = 0; p < dim; ++p)
            for (int q = p + 1; q < dim; ++q) {
                const double apq = m[static_cast<std::size_t>(p * dim + q)];
                if (std::abs(apq) < 1e-18) continue;
                const double app = m[static_cast<std::size_t>(p * dim + p)];
                const double aqq = m[static_cast<std::size_t>(q * dim + q)];
                const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double c = std::cos(theta), s = std::sin(theta);
                for (int r = 0; r < dim; ++r) {
                    const double mrp = m[static_cast<std::size_t>(r * dim + p)];
                    const double mrq = m[static_cast<std::size_t>(r * dim + q)];
                    m[static_cast<std::size_t>(r * dim + p)] = c * mrp - s * mrq;
                    m[static_cast<std::size_t>(r * dim + q)] = s * mrp + c * mrq;
                }
                for (int r = 0; r < dim; ++r) {
                    const double mpr = m[static_cast<std::size_t>(p * dim + r)];
                    const double mqr = m[static_cast<std::size_t>(q * dim + r)];
                    m[static_cast<std::size_t>(p * dim + r)] = c * mpr - s * mqr;
                    m[static_cast<std::size_t>(q * dim + r)] = s * mpr + c * mqr;
                }
            }
    }
    double mn = m[0];
    for (int p = 1; p < dim; ++p) mn = std::min(mn, m[static_cast<std::size_t>(p * dim + p)]);
    return mn;
}

}  // namespace

ConsistencyReport consistency_check(const OperatorSpec& spec, const ContinuousOperator& cont,
                                    const GridPtr& grid, int degree, double t) {
    if (degree != 1 && degree != 2) fail("consistency degree must be 1 or 2");
    const int dim = grid->dim();

    // Stencil radius per axis; only nodes whose stencil needs no wrap and no
    // padding are probed, since monomials are neither periodic nor compactly
    // supported.
    std::vector<std::int64_t> radius(static_cast<std::size_t>(dim), 0);
    for (const auto& d : spec.directions())
        for (int a = 0; a < dim; ++a)
            radius[static_cast<std::size_t>(a)] =
                std::max<std::int64_t>(radius[static_cast<std::size_t>(a)],
                                       std::abs(d[static_cast<std::size_t>(a)]));

    std::vector<std::vector<int>> monomials;
    enumerate_monomials(dim, degree, monomials);

    const SampledOperator op = SampledOperator::sample(spec, grid, t);
    ConsistencyReport report;
    std::vector<double> x(static_cast<std::size_t>(dim));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(dim));

    for (const auto& e : monomials) {
        GridFunction m = GridFunction::sample(
            grid, [&e](std::span<const double> xx) { return monomial_value(e, xx); });
        std::vector<GridFunction> images;
        images.emplace_back(grid);
        op.apply_L(m.values(), images.back().values());
        for (int rho = 0; rho < spec.noise_count(); ++rho) {
            images.emplace_back(grid);
            op.apply_M(rho, m.values(), images.back().values());
        }

        for (std::size_t which = 0; which < images.size(); ++which) {
            const int rho = static_cast<int>(which) - 1;
            ConsistencyEntry entry;
            entry.op = which == 0 ? "L" : "M[" + std::to_string(rho) + "]";
            entry.exponents = e;
            entry.max_abs_residual = 0.0;
            entry.max_scaled_residual = 0.0;
            for (std::int64_t i = 0; i < grid->node_count(); ++i) {
                grid->unflatten(i, idx);
                bool interior = true;
                for (int a = 0; a < dim; ++a) {
                    const std::int64_t lo = std::max(grid->box_lo(a), radius[static_cast<std::size_t>(a)]);
                    const std::int64_t hi = std::min(grid->box_hi(a),
                                                     grid->extents()[a] - 1 - radius[static_cast<std::size_t>(a)]);
                    if (idx[a] < lo || idx[a] > hi) { interior = false; break; }
                }
                if (!interior) continue;
                grid->coordinates(i, x);

                double exact = 0.0;
                if (which == 0) {
                    const auto a = cont.a(t, x);
                    const auto b = cont.b(t, x);
                    for (int p = 0; p < dim; ++p) {
                        for (int q = 0; q < dim; ++q)
                            exact += a[static_cast<std::size_t>(p * dim + q)] * monomial_d2(e, x, p, q);
                        exact += b[static_cast<std::size_t>(p)] * monomial_d1(e, x, p);
                    }
                    exact += cont.c(t, x) * monomial_value(e, x);
                } else {
                    const auto sig = cont.sigma(t, x);
                    const auto nu = cont.nu(t, x);
                    for (int p = 0; p < dim; ++p)
                        exact += sig[static_cast<std::size_t>(p * cont.noise_count + rho)] *
                                 monomial_d1(e, x, p);
                    exact += nu[static_cast<std::size_t>(rho)] * monomial_value(e, x);
                }

                const double res = std::abs(images[which][i] - exact);
                double xmax = 0.0;
                for (int a = 0; a < dim; ++a) xmax = std::max(xmax, std::abs(x[static_cast<std::size_t>(a)]));
                const double scaled = res / std::max(1.0, xmax * xmax);
                entry.max_abs_residual = std::max(entry.max_abs_residual, res);
                entry.max_scaled_residual = std::max(entry.max_scaled_residual, scaled);
            }
            report.worst_scaled = std::max(report.worst_scaled, entry.max_scaled_residual);
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

ParabolicityReport parabolicity_report(const ContinuousOperator& cont, const GridPtr& grid,
                                       std::span<const double> times) {
    const int dim = cont.dim;
    const int d1 = cont.noise_count;
    ParabolicityReport report;
    bool first = true;
    std::vector<double> x(static_cast<std::size_t>(grid->dim()));
    for (double t : times) {
        for (std::int64_t i = 0; i < grid->node_count(); ++i) {
            grid->coordinates(i, x);
            const auto a = cont.a(t, x);
            const auto sig = cont.sigma(t, x);
            std::vector<double> m(static_cast<std::size_t>(dim * dim), 0.0);
            for (int p = 0; p < dim; ++p)
                for (int q = 0; q < dim; ++q) {
                    double ss = 0.0;
                    for (int r = 0; r < d1; ++r)
                        ss += sig[static_cast<std::size_t>(p * d1 + r)] *
                              sig[static_cast<std::size_t>(q * d1 + r)];
                    m[static_cast<std::size_t>(p * dim + q)] =
                        a[static_cast<std::size_t>(p * dim + q)] - 0.5 * ss;
                }
            const double mn = min_eigenvalue_sym(std::move(m), dim);
            if (first || mn < report.min_eigenvalue) {
                report.min_eigenvalue = mn;
                report.at_x = x;
                report.at_t = t;
                first = false;
            }
        }
    }
    const double tol = 1e-12;
    report.indefinite = report.min_eigenvalue < -tol;
    report.degenerate = !report.indefinite && std::abs(report.min_eigenvalue) <= tol;
    return report;
}

DiffusionFloor min_diffusion_weight(const OperatorSpec& spec, const GridPtr& grid, double t) {
    DiffusionFloor floor;
    bool first = true;
    std::vector<double> x(static_cast<std::size_t>(grid->dim()));
    for (std::size_t d = 0; d < spec.directions().size(); ++d) {
        const CoeffField& a = spec.diffusion(static_cast<int>(d));
        if (a.is_zero()) continue;
        for (std::int64_t i = 0; i < grid->node_count(); ++i) {
            grid->coordinates(i, x);
            const double v = a(t, x);
            if (first || v < floor.min_value) {
                floor.min_value = v;
                floor.direction = spec.directions()[d];
                floor.at_x = x;
                first = false;
            }
        }
    }
    return floor;
}

}  // namespace spde
