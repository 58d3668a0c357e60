#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace spde {

/// How the truncated domain closes: wrap-around torus or zero outside.
enum class BoundaryMode { periodic, zero_padded };

/// Uniform lattice over a truncated box.
///
/// Nodes along axis a sit at origin[a] + i * spacing for i in [0, extent[a]).
/// The spacing is halved exactly under refinement (binary scaling), so every
/// coarse node coordinate is bit-identical to the coinciding fine node
/// coordinate. Errors are evaluated only on the measurement box, an interior
/// index range controlled by `margin`; periodic grids may use margin 0,
/// zero-padded grids require margin >= 1.
///
/// Grids are immutable after construction and shared via GridPtr.
class Grid {
public:
    Grid(double spacing, std::vector<std::int64_t> extents,
         std::vector<double> origin, BoundaryMode mode, std::int64_t margin);

    int dim() const { return static_cast<int>(extents_.size()); }
    double spacing() const { return spacing_; }
    const std::vector<std::int64_t>& extents() const { return extents_; }
    const std::vector<double>& origin() const { return origin_; }
    BoundaryMode boundary_mode() const { return mode_; }
    std::int64_t margin() const { return margin_; }

    std::int64_t node_count() const { return node_count_; }
    const std::vector<std::int64_t>& strides() const { return strides_; }

    /// Inclusive index bounds of the measurement box along one axis.
    std::int64_t box_lo(int) const { return margin_; }
    std::int64_t box_hi(int axis) const { return extents_[axis] - 1 - margin_; }

    double coordinate(int axis, std::int64_t i) const {
        return origin_[axis] + static_cast<double>(i) * spacing_;
    }
    void coordinates(std::int64_t flat, std::span<double> out) const;

    std::int64_t flat_index(std::span<const std::int64_t> idx) const;
    void unflatten(std::int64_t flat, std::span<std::int64_t> idx) const;

    bool operator==(const Grid& other) const;

private:
    double spacing_;
    std::vector<std::int64_t> extents_;
    std::vector<double> origin_;
    BoundaryMode mode_;
    std::int64_t margin_;
    std::vector<std::int64_t> strides_;  // row-major, last axis fastest
    std::int64_t node_count_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// General constructor; dim is extents.size().
GridPtr build_grid(double spacing, std::vector<std::int64_t> extents,
                   std::vector<double> origin, BoundaryMode mode,
                   std::int64_t margin);

/// Uniform extent across `dim` axes.
GridPtr build_grid(int dim, double spacing, std::int64_t extent,
                   std::vector<double> origin, BoundaryMode mode,
                   std::int64_t margin);

/// Halve the spacing. Periodic: extent doubles; zero-padded: 2N-1 so the box
/// endpoints stay put. Coarse node i coincides with fine node 2i, and the
/// measurement region covers the same physical volume (margin doubles).
GridPtr refine(const GridPtr& grid);

/// Scalar field over grid nodes, flat row-major storage.
class GridFunction {
public:
    explicit GridFunction(GridPtr grid, double fill = 0.0);
    GridFunction(GridPtr grid, std::vector<double> values);

    /// Pointwise sample of f(x) on every node.
    static GridFunction sample(GridPtr grid,
                               const std::function<double(std::span<const double>)>& f);

    const GridPtr& grid() const { return grid_; }
    std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }

    double operator[](std::int64_t flat) const { return values_[static_cast<std::size_t>(flat)]; }
    double& operator[](std::int64_t flat) { return values_[static_cast<std::size_t>(flat)]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Max |value| over the full grid.
    double max_abs() const;
    /// Max |this - other| over the measurement box of this grid.
    double sup_box_distance(const GridFunction& other) const;

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Injection onto a coarser grid of the same refinement lineage: the value at
/// each coarse node is the fine value at the coinciding node, no averaging.
/// Throws std::invalid_argument if the grids are not nested.
GridFunction restrict_to(const GridFunction& fine, const GridPtr& coarse);

/// Translate by steps * direction lattice cells: out(x) = f(x + steps*h*dir).
/// Periodic grids wrap; zero-padded grids read 0 outside the index range.
GridFunction shift(const GridFunction& f, std::span<const int> direction,
                   std::int64_t steps);

/// Visit every node as (flat index, multi-index).
void for_each_node(const Grid& grid,
                   const std::function<void(std::int64_t, std::span<const std::int64_t>)>& fn);

}  // namespace spde
