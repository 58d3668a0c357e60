#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spde/richardson.hpp"
#include "spde/testbed.hpp"

namespace spde {

enum class SchemeChoice { automatic, spectral, euler_maruyama, drift_implicit };

std::string to_string(SchemeChoice scheme);
SchemeChoice scheme_from_string(const std::string& name);

struct ExperimentConfig {
    std::string problem;
    std::int64_t coarse_extent = 16;  // N on the coarsest measured grid
    int refinements = 4;              // R: measured resolutions N, 2N, ..., N*2^{R-1}
    int level = 0;                    // k: acceleration level
    int power_step = 2;
    SchemeChoice scheme = SchemeChoice::automatic;
    std::int64_t paths = 1;
    std::uint64_t master_seed = 0;
    double horizon = 0.0;             // 0 selects the problem default
    double time_step = 0.0;           // 0 selects the tau rule
    int threads = 0;                  // 0 selects hardware concurrency
    std::string output_dir;
    std::string output_basename = "run";
};

struct ResolutionRow {
    double h = 0.0;
    double rms_sup_error = 0.0;
    double q10 = 0.0, q50 = 0.0, q90 = 0.0;
    std::optional<double> local_order;  // log2(e_prev / e_this); absent on the first row
    std::vector<double> per_path_errors;
};

struct ConvergenceTable {
    ExperimentConfig config;          // as resolved (horizon, scheme filled in)
    ExtrapolationWeights weights;
    std::vector<ResolutionRow> rows;  // sorted by decreasing h
    std::optional<double> slope;      // least-squares order over all rows
    bool exact = false;               // some rms error was exactly zero
    std::string scheme_used;
    std::string oracle_kind;          // "closed_form" or "surrogate"
    double tau = 0.0;                 // 0 for spectral integration
    std::int64_t time_steps = 0;
    /// Wiener-increment digests per [resolution][path][chain level].
    std::vector<std::vector<std::vector<std::uint64_t>>> noise_digests;
    bool noise_digests_consistent = true;
};

struct OrderFit {
    std::vector<double> local;  // log2(e_r / e_{r+1})
    double slope = 0.0;         // least-squares order, assuming spacing halves per entry
    bool exact = false;         // a zero error short-circuits the fit
};

/// Orders from errors measured at h, h/2, h/4, ...; throws on negative or
/// non-finite input, flags exact on zeros.
OrderFit fit_order(std::span<const double> errors);

struct McSummary {
    double rms = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double q90 = 0.0;
    double rms_standard_error = 0.0;  // delta method
    std::int64_t count = 0;
};
McSummary mc_stats(std::span<const double> per_path_errors);

/// Concrete scheme for a problem: 'automatic' picks spectral integration when
/// the problem is eligible and drift-implicit stepping otherwise.
SchemeChoice resolve_scheme(const TestProblem& problem, SchemeChoice requested);

/// Time grid for one experiment. Spectral integration takes a single exact
/// step; stepped schemes use tau = min(h_finest^2, h_finest^{p+1}) with
/// p = power_step * (k+1) unless the config pins time_step, capped at 10^6
/// steps. One grid serves every resolution and path of the experiment.
std::vector<double> plan_time_grid(const ExperimentConfig& config, double horizon,
                                   double h_finest, bool spectral);

/// Replacement solver for harness self-tests: receives the problem bound to
/// one chain grid plus the shared path, returns the terminal field.
using SolveOverride =
    std::function<GridFunction(const SemidiscreteProblem&, const WienerPath&)>;

/// Run the nested-grid Monte Carlo convergence experiment:
/// for every resolution r and path p, solve on the chain h_r, h_r/2, ...,
/// h_r/2^k driven by one shared Wiener path, extrapolate, and take the sup
/// error over the measurement box against the oracle; aggregate the rms over
/// paths per resolution and fit orders. One time grid serves the whole
/// experiment, so paths are common across resolutions. Deterministic for a
/// fixed master seed regardless of thread count.
ConvergenceTable run_convergence(const ExperimentConfig& config,
                                 const SolveOverride& override_solver = nullptr);

/// Same, for a problem object that is not in the built-in registry.
ConvergenceTable run_convergence(const TestProblem& problem, const ExperimentConfig& config,
                                 const SolveOverride& override_solver = nullptr);

/// CSV with columns
/// h,k,power_step,paths,rms_sup_error,q10,q50,q90,local_order,slope
/// (shortest round-trip decimal, '.' decimal point, bytes stable per seed).
std::string to_csv(const ConvergenceTable& table);

/// key = value sidecar echoing the config, weights and run facts.
std::string to_metadata(const ConvergenceTable& table);

/// log2(h) vs log2(error) pairs for external plotting.
std::string to_plot_data(const ConvergenceTable& table);

}  // namespace spde
