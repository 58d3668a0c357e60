#include "spde/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spde {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("noise: " + msg); }

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t c1 = ctr[1];
    const std::uint32_t c3 = ctr[3];
    ctr[0] = hi1 ^ c1 ^ key[0];
    ctr[1] = lo1;
    ctr[2] = hi0 ^ c3 ^ key[1];
    ctr[3] = lo0;
}

// Uniform in (0,1), never exactly 0 or 1.
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal keyed on (seed, path, step, component) via Box-Muller.
double standard_normal(std::uint64_t seed, std::uint64_t path,
                       std::uint64_t step, std::uint32_t component) {
    const auto b = detail::philox4x32(static_cast<std::uint32_t>(step), component,
                                      static_cast<std::uint32_t>(path),
                                      static_cast<std::uint32_t>(path >> 32), seed);
    const std::uint64_t u = (std::uint64_t{b[0]} << 32) | b[1];
    const std::uint64_t v = (std::uint64_t{b[2]} << 32) | b[3];
    return std::sqrt(-2.0 * std::log(to_unit(u))) *
           std::cos(2.0 * std::numbers::pi * to_unit(v));
}

}  // namespace

namespace detail {

// Philox4x32-10 (Salmon, Moraes, Dror, Shaw: "Parallel random numbers: as
// easy as 1, 2, 3" constants; round i uses the key bumped i times).
std::array<std::uint32_t, 4> philox4x32(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                                        std::uint32_t c3, std::uint64_t key64) {
    std::uint32_t ctr[4] = {c0, c1, c2, c3};
    std::uint32_t key[2] = {static_cast<std::uint32_t>(key64),
                            static_cast<std::uint32_t>(key64 >> 32)};
    for (int round = 0; round < 10; ++round) {
        philox_round(ctr, key);
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
    }
    return {ctr[0], ctr[1], ctr[2], ctr[3]};
}

}  // namespace detail

WienerPath::WienerPath(std::uint64_t master_seed, std::uint64_t path_index,
                       std::vector<double> time_grid, int noise_count,
                       std::vector<double> increments)
    : master_seed_(master_seed),
      path_index_(path_index),
      noise_count_(noise_count),
      time_grid_(std::move(time_grid)),
      increments_(std::move(increments)) {
    if (noise_count_ < 0) fail("noise_count must be nonnegative");
    if (time_grid_.size() < 2) fail("time grid needs at least two points");
    if (time_grid_.front() != 0.0) fail("time grid must start at 0");
    for (std::size_t i = 1; i < time_grid_.size(); ++i)
        if (!(time_grid_[i] > time_grid_[i - 1])) fail("time grid must be strictly increasing");
    const std::size_t expected =
        (time_grid_.size() - 1) * static_cast<std::size_t>(noise_count_);
    if (increments_.size() != expected) fail("increment array shape mismatch");

    // Prefix sums in fixed step order, so value_at is scheduling-free.
    cumulative_.assign(time_grid_.size() * static_cast<std::size_t>(noise_count_), 0.0);
    for (std::size_t s = 0; s + 1 < time_grid_.size(); ++s)
        for (int rho = 0; rho < noise_count_; ++rho) {
            const std::size_t at = (s + 1) * static_cast<std::size_t>(noise_count_) +
                                   static_cast<std::size_t>(rho);
            cumulative_[at] = cumulative_[at - static_cast<std::size_t>(noise_count_)] +
                              increments_[s * static_cast<std::size_t>(noise_count_) +
                                          static_cast<std::size_t>(rho)];
        }
}

std::span<const double> WienerPath::value_at_index(std::int64_t i) const {
    if (i < 0 || i >= static_cast<std::int64_t>(time_grid_.size()))
        fail("time index out of range");
    return {cumulative_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(noise_count_),
            static_cast<std::size_t>(noise_count_)};
}

std::span<const double> WienerPath::value_at(double t) const {
    for (std::size_t i = 0; i < time_grid_.size(); ++i)
        if (time_grid_[i] == t) return value_at_index(static_cast<std::int64_t>(i));
    fail("time " + std::to_string(t) + " is not on the path's grid");
}

std::uint64_t WienerPath::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
    };
    const std::uint64_t shape[2] = {static_cast<std::uint64_t>(step_count()),
                                    static_cast<std::uint64_t>(noise_count_)};
    mix(shape, sizeof shape);
    mix(increments_.data(), increments_.size() * sizeof(double));
    return h;
}

WienerPath sample_path(std::uint64_t master_seed, std::uint64_t path_index,
                       std::vector<double> time_grid, int noise_count) {
    if (time_grid.size() < 2) fail("time grid needs at least two points");
    const std::size_t n = time_grid.size() - 1;
    std::vector<double> increments(n * static_cast<std::size_t>(noise_count));
    for (std::size_t s = 0; s < n; ++s) {
        const double tau = time_grid[s + 1] - time_grid[s];
        if (!(tau > 0.0)) fail("time grid must be strictly increasing");
        const double scale = std::sqrt(tau);
        for (int rho = 0; rho < noise_count; ++rho)
            increments[s * static_cast<std::size_t>(noise_count) + static_cast<std::size_t>(rho)] =
                scale * standard_normal(master_seed, path_index, s,
                                        static_cast<std::uint32_t>(rho));
    }
    return WienerPath(master_seed, path_index, std::move(time_grid), noise_count,
                      std::move(increments));
}

WienerPath coarsen_path(const WienerPath& fine, std::int64_t factor) {
    if (factor < 1) fail("coarsening factor must be >= 1");
    const std::int64_t n = fine.step_count();
    if (n % factor != 0) fail("step count not divisible by coarsening factor");
    const std::int64_t m = n / factor;
    const int d1 = fine.noise_count();
    std::vector<double> grid(static_cast<std::size_t>(m) + 1);
    for (std::int64_t i = 0; i <= m; ++i)
        grid[static_cast<std::size_t>(i)] = fine.time_grid()[static_cast<std::size_t>(i * factor)];
    std::vector<double> increments(static_cast<std::size_t>(m) * static_cast<std::size_t>(d1), 0.0);
    for (std::int64_t s = 0; s < m; ++s)
        for (std::int64_t j = 0; j < factor; ++j)
            for (int rho = 0; rho < d1; ++rho)
                increments[static_cast<std::size_t>(s * d1 + rho)] +=
                    fine.increment(s * factor + j, rho);
    return WienerPath(fine.master_seed(), fine.path_index(), std::move(grid), d1,
                      std::move(increments));
}

std::vector<double> make_uniform_time_grid(double horizon, std::int64_t n_steps) {
    if (!(horizon > 0.0)) fail("horizon must be positive");
    if (n_steps < 1) fail("need at least one step");
    std::vector<double> grid(static_cast<std::size_t>(n_steps) + 1);
    for (std::int64_t i = 0; i <= n_steps; ++i)
        grid[static_cast<std::size_t>(i)] =
            horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    grid[0] = 0.0;
    grid[static_cast<std::size_t>(n_steps)] = horizon;
    return grid;
}

}  // namespace spde
