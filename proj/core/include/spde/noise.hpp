#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace spde {

namespace detail {
/// Philox4x32-10 block: counter words c0..c3 under a 64-bit key. Exposed so
/// the generator can be pinned against the published test vectors.
std::array<std::uint32_t, 4> philox4x32(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                                        std::uint32_t c3, std::uint64_t key);
}  // namespace detail

/// One realization of d1 independent Wiener processes sampled on a time grid.
///
/// Every increment is produced by a counter-based generator keyed on
/// (master_seed, path_index, step, component), so a path is a pure function
/// of its arguments: regenerating with the same inputs is bit-identical, and
/// paths can be drawn concurrently in any order without changing results.
class WienerPath {
public:
    WienerPath(std::uint64_t master_seed, std::uint64_t path_index,
               std::vector<double> time_grid, int noise_count,
               std::vector<double> increments);

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t path_index() const { return path_index_; }
    int noise_count() const { return noise_count_; }
    const std::vector<double>& time_grid() const { return time_grid_; }
    std::int64_t step_count() const { return static_cast<std::int64_t>(time_grid_.size()) - 1; }

    /// Increment of component rho over [t_i, t_{i+1}].
    double increment(std::int64_t step, int rho) const {
        return increments_[static_cast<std::size_t>(step) * static_cast<std::size_t>(noise_count_) +
                           static_cast<std::size_t>(rho)];
    }
    /// Row of all d1 increments for one step.
    std::span<const double> increments_at(std::int64_t step) const {
        return {increments_.data() + static_cast<std::size_t>(step) * static_cast<std::size_t>(noise_count_),
                static_cast<std::size_t>(noise_count_)};
    }
    std::span<const double> raw_increments() const { return increments_; }

    /// W(t_i) as the prefix sum of increments; W(t_0) = 0.
    /// Throws std::invalid_argument if t is not a grid time.
    std::span<const double> value_at(double t) const;
    /// W at grid time index i (0 = initial time).
    std::span<const double> value_at_index(std::int64_t i) const;

    /// FNV-1a digest of the increment array, for shared-noise audits.
    std::uint64_t digest() const;

private:
    std::uint64_t master_seed_;
    std::uint64_t path_index_;
    int noise_count_;
    std::vector<double> time_grid_;
    std::vector<double> increments_;  // step-major: [step][rho]
    std::vector<double> cumulative_;  // (n+1) x d1, cumulative_[0] = 0
};

/// Draw a path. time_grid must be strictly increasing and start at 0.
WienerPath sample_path(std::uint64_t master_seed, std::uint64_t path_index,
                       std::vector<double> time_grid, int noise_count);

/// Merge consecutive increments by `factor`: the coarse path visits every
/// factor-th grid time of the fine path and its increments are the exact sums
/// of the fine ones. step_count must be divisible by factor.
WienerPath coarsen_path(const WienerPath& fine, std::int64_t factor);

/// Uniform grid 0, T/n, ..., T.
std::vector<double> make_uniform_time_grid(double horizon, std::int64_t n_steps);

}  // namespace spde
