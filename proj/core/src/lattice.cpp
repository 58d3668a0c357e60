#include "spde/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spde {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("lattice: " + msg); }

}  // namespace

Grid::Grid(double spacing, std::vector<std::int64_t> extents,
           std::vector<double> origin, BoundaryMode mode, std::int64_t margin)
    : spacing_(spacing),
      extents_(std::move(extents)),
      origin_(std::move(origin)),
      mode_(mode),
      margin_(margin) {
    if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) fail("spacing must be positive and finite");
    if (extents_.empty()) fail("at least one axis required");
    if (origin_.size() != extents_.size()) fail("origin dimension does not match extents");
    if (margin_ < 0) fail("margin must be nonnegative");
    if (mode_ == BoundaryMode::zero_padded && margin_ < 1)
        fail("zero-padded mode requires an interior measurement box (margin >= 1)");
    for (std::int64_t n : extents_) {
        if (n < 2) fail("extent must be at least 2 per axis");
        if (2 * margin_ >= n) fail("margin too large for extent");
    }
    strides_.assign(extents_.size(), 1);
    for (int a = static_cast<int>(extents_.size()) - 2; a >= 0; --a)
        strides_[a] = strides_[a + 1] * extents_[a + 1];
    node_count_ = strides_[0] * extents_[0];
}

void Grid::coordinates(std::int64_t flat, std::span<double> out) const {
    for (int a = 0; a < dim(); ++a) {
        const std::int64_t i = (flat / strides_[a]) % extents_[a];
        out[a] = coordinate(a, i);
    }
}

std::int64_t Grid::flat_index(std::span<const std::int64_t> idx) const {
    std::int64_t flat = 0;
    for (int a = 0; a < dim(); ++a) flat += idx[a] * strides_[a];
    return flat;
}

void Grid::unflatten(std::int64_t flat, std::span<std::int64_t> idx) const {
    for (int a = 0; a < dim(); ++a) idx[a] = (flat / strides_[a]) % extents_[a];
}

bool Grid::operator==(const Grid& other) const {
    return spacing_ == other.spacing_ && extents_ == other.extents_ &&
           origin_ == other.origin_ && mode_ == other.mode_ && margin_ == other.margin_;
}

GridPtr build_grid(double spacing, std::vector<std::int64_t> extents,
                   std::vector<double> origin, BoundaryMode mode,
                   std::int64_t margin) {
    return std::make_shared<Grid>(spacing, std::move(extents), std::move(origin), mode, margin);
}

GridPtr build_grid(int dim, double spacing, std::int64_t extent,
                   std::vector<double> origin, BoundaryMode mode,
                   std::int64_t margin) {
    if (dim < 1) fail("dim must be positive");
    return build_grid(spacing, std::vector<std::int64_t>(static_cast<std::size_t>(dim), extent),
                      std::move(origin), mode, margin);
}

GridPtr refine(const GridPtr& grid) {
    std::vector<std::int64_t> extents = grid->extents();
    for (auto& n : extents)
        n = grid->boundary_mode() == BoundaryMode::periodic ? 2 * n : 2 * n - 1;
    // h/2 is exact in binary floating point, so coarse coordinates
    // origin + i*h equal fine coordinates origin + 2i*(h/2) bit for bit.
    return build_grid(grid->spacing() / 2.0, std::move(extents), grid->origin(),
                      grid->boundary_mode(), 2 * grid->margin());
}

GridFunction::GridFunction(GridPtr grid, double fill)
    : grid_(std::move(grid)),
      values_(static_cast<std::size_t>(grid_->node_count()), fill) {}

GridFunction::GridFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::int64_t>(values_.size()) != grid_->node_count())
        fail("value count does not match grid node count");
}

GridFunction GridFunction::sample(GridPtr grid,
                                  const std::function<double(std::span<const double>)>& f) {
    GridFunction out(grid);
    std::vector<double> x(static_cast<std::size_t>(grid->dim()));
    for (std::int64_t i = 0; i < grid->node_count(); ++i) {
        grid->coordinates(i, x);
        out[i] = f(x);
    }
    return out;
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::sup_box_distance(const GridFunction& other) const {
    if (!(*grid_ == *other.grid_)) fail("sup_box_distance requires matching grids");
    const Grid& g = *grid_;
    double worst = 0.0;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(g.dim()));
    for (std::int64_t i = 0; i < g.node_count(); ++i) {
        g.unflatten(i, idx);
        bool inside = true;
        for (int a = 0; a < g.dim(); ++a)
            if (idx[a] < g.box_lo(a) || idx[a] > g.box_hi(a)) { inside = false; break; }
        if (!inside) continue;
        worst = std::max(worst, std::abs(values_[static_cast<std::size_t>(i)] -
                                         other.values_[static_cast<std::size_t>(i)]));
    }
    return worst;
}

namespace {

/// Nesting factor 2^m between coarse and fine, or -1 if not nested.
int nesting_level(const Grid& fine, const Grid& coarse) {
    if (fine.dim() != coarse.dim()) return -1;
    if (fine.boundary_mode() != coarse.boundary_mode()) return -1;
    if (fine.origin() != coarse.origin()) return -1;
    double h = coarse.spacing();
    for (int m = 0; m <= 62; ++m) {
        if (h == fine.spacing()) {
            const std::int64_t factor = std::int64_t{1} << m;
            for (int a = 0; a < fine.dim(); ++a) {
                const std::int64_t nc = coarse.extents()[a];
                const std::int64_t nf = fine.extents()[a];
                const bool ok = fine.boundary_mode() == BoundaryMode::periodic
                                    ? nf == nc * factor
                                    : nf == (nc - 1) * factor + 1;
                if (!ok) return -1;
            }
            return m;
        }
        h /= 2.0;
    }
    return -1;
}

}  // namespace

GridFunction restrict_to(const GridFunction& fine, const GridPtr& coarse) {
    const int m = nesting_level(*fine.grid(), *coarse);
    if (m < 0) fail("restrict_to requires grids from the same refinement lineage");
    const std::int64_t factor = std::int64_t{1} << m;
    GridFunction out(coarse);
    const Grid& gc = *coarse;
    const Grid& gf = *fine.grid();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(gc.dim()));
    for (std::int64_t i = 0; i < gc.node_count(); ++i) {
        gc.unflatten(i, idx);
        std::int64_t flat_fine = 0;
        for (int a = 0; a < gc.dim(); ++a) flat_fine += idx[a] * factor * gf.strides()[a];
        out[i] = fine[flat_fine];
    }
    return out;
}

GridFunction shift(const GridFunction& f, std::span<const int> direction,
                   std::int64_t steps) {
    const Grid& g = *f.grid();
    if (static_cast<int>(direction.size()) != g.dim())
        fail("shift direction dimension mismatch");
    bool nonzero = false;
    for (int c : direction) nonzero |= (c != 0);
    if (!nonzero) fail("shift direction must be nonzero");

    GridFunction out(f.grid());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(g.dim()));
    for (std::int64_t i = 0; i < g.node_count(); ++i) {
        g.unflatten(i, idx);
        std::int64_t flat = 0;
        bool outside = false;
        for (int a = 0; a < g.dim(); ++a) {
            std::int64_t j = idx[a] + steps * direction[a];
            const std::int64_t n = g.extents()[a];
            if (g.boundary_mode() == BoundaryMode::periodic) {
                j %= n;
                if (j < 0) j += n;
            } else if (j < 0 || j >= n) {
                outside = true;
                break;
            }
            flat += j * g.strides()[a];
        }
        out[i] = outside ? 0.0 : f[flat];
    }
    return out;
}

void for_each_node(const Grid& grid,
                   const std::function<void(std::int64_t, std::span<const std::int64_t>)>& fn) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(grid.dim()), 0);
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
        fn(i, idx);
        for (int a = grid.dim() - 1; a >= 0; --a) {
            if (++idx[a] < grid.extents()[a]) break;
            idx[a] = 0;
        }
    }
}

}  // namespace spde
