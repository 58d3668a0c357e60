#pragma once

#include <span>
#include <string>
#include <vector>

#include "spde/lattice.hpp"

namespace spde {

/// Weights c_0..c_k of the accelerated combination sum_j c_j u^{h/2^j}.
///
/// They solve the moment system sum_j c_j q^{j m} = delta_{m0} for m = 0..k
/// with q = 2^{-power_step}: the combination reproduces the limit (weights
/// sum to one) and annihilates every error-expansion term h^{power_step * m},
/// m = 1..k. power_step is 1 for a general expansion in powers of h and 2
/// when stencil symmetry leaves only even powers.
struct ExtrapolationWeights {
    int k = 0;
    int power_step = 2;
    std::vector<double> weights;          // c_0 (coarsest) .. c_k (finest)
    std::vector<std::string> rationals;   // exact values, e.g. "-1/3"

    /// |sum_j c_j 2^{-j*power_step*m}| as rounded to double.
    double moment_residual(int m) const;
};

/// Compute the weights by exact rational arithmetic (Lagrange form of the
/// Vandermonde solve), rounded to double once at the end; c_0 is then set to
/// 1 - sum_{j>=1} c_j so the float weights sum to 1 exactly.
/// Requires 0 <= k <= 8 and power_step in {1, 2}.
ExtrapolationWeights coefficients(int k, int power_step);

/// Combine solutions on the halving chain h, h/2, ..., h/2^k into one field
/// on the coarsest grid. Each solution is restricted by injection first; the
/// caller guarantees all solutions were driven by the same Wiener path and
/// time grid. Throws std::invalid_argument on length or lineage mismatch.
GridFunction extrapolate(std::span<const GridFunction> solutions,
                         const ExtrapolationWeights& weights);

}  // namespace spde
