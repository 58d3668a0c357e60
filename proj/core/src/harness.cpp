#include "spde/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spde {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("harness: " + msg); }

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

constexpr std::int64_t kMaxTimeSteps = 1'000'000;
constexpr std::int64_t kMaxNodes = std::int64_t{1} << 22;

}  // namespace

std::string to_string(SchemeChoice scheme) {
    switch (scheme) {
        case SchemeChoice::automatic: return "auto";
        case SchemeChoice::spectral: return "spectral";
        case SchemeChoice::euler_maruyama: return "euler_maruyama";
        case SchemeChoice::drift_implicit: return "drift_implicit";
    }
    return "auto";
}

SchemeChoice scheme_from_string(const std::string& name) {
    if (name == "auto") return SchemeChoice::automatic;
    if (name == "spectral") return SchemeChoice::spectral;
    if (name == "euler_maruyama") return SchemeChoice::euler_maruyama;
    if (name == "drift_implicit") return SchemeChoice::drift_implicit;
    fail("unknown scheme '" + name + "' (auto, spectral, euler_maruyama, drift_implicit)");
}

OrderFit fit_order(std::span<const double> errors) {
    if (errors.empty()) fail("fit_order needs at least one error");
    OrderFit out;
    for (double e : errors) {
        if (!std::isfinite(e) || e < 0.0) fail("fit_order requires finite nonnegative errors");
        if (e == 0.0) out.exact = true;
    }
    if (out.exact) return out;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i)
        out.local.push_back(std::log2(errors[i] / errors[i + 1]));
    // Least squares of log2(e) against log2(h); h halves per entry, so the
    // abscissa is -i up to a constant.
    const std::size_t n = errors.size();
    if (n < 2) { out.slope = 0.0; return out; }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = -static_cast<double>(i);
        const double y = std::log2(errors[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    out.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    return out;
}

McSummary mc_stats(std::span<const double> per_path_errors) {
    if (per_path_errors.empty()) fail("mc_stats needs at least one error");
    McSummary s;
    s.count = static_cast<std::int64_t>(per_path_errors.size());
    double sum = 0.0, sum_sq = 0.0;
    for (double e : per_path_errors) {
        sum += e;
        sum_sq += e * e;
    }
    const double n = static_cast<double>(s.count);
    s.mean = sum / n;
    s.rms = std::sqrt(sum_sq / n);
    std::vector<double> sorted(per_path_errors.begin(), per_path_errors.end());
    std::sort(sorted.begin(), sorted.end());
    s.median = quantile_sorted(sorted, 0.5);
    s.q90 = quantile_sorted(sorted, 0.9);
    if (s.rms > 0.0 && s.count > 1) {
        // Delta method: Var(rms) ~ Var(e^2) / (4 rms^2 n).
        double var_e2 = 0.0;
        const double mean_e2 = sum_sq / n;
        for (double e : per_path_errors) var_e2 += (e * e - mean_e2) * (e * e - mean_e2);
        var_e2 /= (n - 1.0);
        s.rms_standard_error = std::sqrt(var_e2 / n) / (2.0 * s.rms);
    }
    return s;
}

namespace {

struct PathOutcome {
    std::vector<double> errors;                  // per resolution
    std::vector<std::uint64_t> pool_digests;     // per chain grid level
    double surrogate_gap = 0.0;                  // reference vs one-level-coarser reference
};

struct RunPlan {
    TestProblem problem;
    ExperimentConfig config;   // resolved
    SchemeChoice scheme;       // concrete (never automatic)
    ExtrapolationWeights weights;
    std::vector<GridPtr> pool; // refine chain, coarsest first
    std::vector<double> time_grid;
    double tau = 0.0;
    std::int64_t steps = 0;
};

GridFunction run_solver(const RunPlan& plan, const GridPtr& grid, const WienerPath& path,
                        const SolveOverride& override_solver) {
    const SemidiscreteProblem bound = plan.problem.instantiate(grid, plan.config.horizon);
    if (override_solver) return override_solver(bound, path);
    switch (plan.scheme) {
        case SchemeChoice::spectral: return solve_spectral_exact(bound, path).terminal;
        case SchemeChoice::euler_maruyama:
            return solve_path(bound, TimeScheme::euler_maruyama, path).terminal;
        case SchemeChoice::drift_implicit:
            return solve_path(bound, TimeScheme::drift_implicit, path).terminal;
        case SchemeChoice::automatic: break;
    }
    fail("scheme was not resolved");
}

PathOutcome run_one_path(const RunPlan& plan, std::int64_t path_index,
                         const SolveOverride& override_solver) {
    const ExperimentConfig& cfg = plan.config;
    const WienerPath path = sample_path(cfg.master_seed, static_cast<std::uint64_t>(path_index),
                                        plan.time_grid, plan.problem.noise_count);
    PathOutcome out;

    // One solve per pool grid; chains for consecutive resolutions overlap and
    // must agree anyway since they consume the same path.
    std::vector<GridFunction> solutions;
    solutions.reserve(plan.pool.size());
    for (std::size_t q = 0; q < plan.pool.size(); ++q) {
        try {
            solutions.push_back(run_solver(plan, plan.pool[q], path, override_solver));
            out.pool_digests.push_back(path.digest());
        } catch (const std::exception& e) {
            throw std::runtime_error("harness: path " + std::to_string(path_index) +
                                     ", chain grid " + std::to_string(q) + " (extent " +
                                     std::to_string(plan.pool[q]->extents()[0]) +
                                     "): " + e.what());
        }
    }

    // Surrogate reference: drift-implicit on a grid two refinements past the
    // finest chain grid, tau <= h_ref^3, plus the one-level-coarser reference
    // for the self-consistency gap.
    std::vector<GridFunction> oracle_fields;
    if (plan.problem.flags.surrogate_oracle) {
        auto reference_on = [&](const GridPtr& grid) {
            const SemidiscreteProblem bound = plan.problem.instantiate(grid, cfg.horizon);
            const double h_ref = grid->spacing();
            // At most h_ref^3, and never coarser in time than the measured
            // solves, so the reference's own time error stays subdominant.
            double tau_ref = h_ref * h_ref * h_ref;
            if (plan.tau > 0.0) tau_ref = std::min(tau_ref, plan.tau);
            const std::int64_t n = std::clamp<std::int64_t>(
                static_cast<std::int64_t>(std::ceil(cfg.horizon / tau_ref)), 1,
                kMaxTimeSteps);
            const WienerPath ref_path =
                sample_path(cfg.master_seed, static_cast<std::uint64_t>(path_index),
                            make_uniform_time_grid(cfg.horizon, n), plan.problem.noise_count);
            return solve_path(bound, TimeScheme::drift_implicit, ref_path).terminal;
        };
        const GridPtr ref_minus = refine(plan.pool.back());
        const GridPtr ref_grid = refine(ref_minus);
        const GridFunction reference = reference_on(ref_grid);
        const GridFunction reference_minus = reference_on(ref_minus);
        out.surrogate_gap = restrict_to(reference, plan.pool.front())
                                .sup_box_distance(restrict_to(reference_minus, plan.pool.front()));
        for (int r = 0; r < cfg.refinements; ++r)
            oracle_fields.push_back(restrict_to(reference, plan.pool[static_cast<std::size_t>(r)]));
    }

    for (int r = 0; r < cfg.refinements; ++r) {
        const std::span<const GridFunction> chain(solutions.data() + r,
                                                  static_cast<std::size_t>(cfg.level) + 1);
        const GridFunction combined = extrapolate(chain, plan.weights);
        const GridPtr& coarse = plan.pool[static_cast<std::size_t>(r)];
        const GridFunction oracle_gf =
            plan.problem.flags.surrogate_oracle
                ? oracle_fields[static_cast<std::size_t>(r)]
                : GridFunction::sample(coarse, [&](std::span<const double> x) {
                      return plan.problem.oracle(cfg.horizon, x, path);
                  });
        out.errors.push_back(combined.sup_box_distance(oracle_gf));
    }
    return out;
}

}  // namespace

SchemeChoice resolve_scheme(const TestProblem& problem, SchemeChoice requested) {
    if (requested != SchemeChoice::automatic) return requested;
    return problem.flags.spectral_exact_ok ? SchemeChoice::spectral
                                           : SchemeChoice::drift_implicit;
}

std::vector<double> plan_time_grid(const ExperimentConfig& config, double horizon,
                                   double h_finest, bool spectral) {
    if (spectral) return {0.0, horizon};
    double tau = config.time_step;
    if (tau <= 0.0) {
        // Keep time error below the target spatial order p = step*(k+1).
        const int target_order = config.power_step * (config.level + 1);
        tau = std::min(h_finest * h_finest, std::pow(h_finest, target_order + 1));
    }
    const std::int64_t steps = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::ceil(horizon / tau)), 1, kMaxTimeSteps);
    return make_uniform_time_grid(horizon, steps);
}

ConvergenceTable run_convergence(const ExperimentConfig& config,
                                 const SolveOverride& override_solver) {
    return run_convergence(problem_by_name(config.problem), config, override_solver);
}

ConvergenceTable run_convergence(const TestProblem& problem, const ExperimentConfig& config,
                                 const SolveOverride& override_solver) {
    RunPlan plan;
    plan.problem = problem;
    plan.config = config;
    ExperimentConfig& cfg = plan.config;
    cfg.problem = problem.name;

    if (cfg.refinements < 2) fail("refinements must be >= 2 so orders can be fitted");
    if (cfg.paths < 1) fail("paths must be >= 1");
    if (cfg.coarse_extent < 2) fail("coarse extent must be >= 2");
    if (!plan.problem.flags.surrogate_oracle && !plan.problem.oracle)
        fail("problem '" + plan.problem.name + "' has no oracle and is not marked surrogate");
    if (cfg.horizon <= 0.0) cfg.horizon = plan.problem.default_horizon;
    plan.weights = coefficients(cfg.level, cfg.power_step);

    const int extra = plan.problem.flags.surrogate_oracle ? 2 : 0;
    const int finest_q = cfg.refinements - 1 + cfg.level;
    {
        const double finest_extent =
            static_cast<double>(cfg.coarse_extent) * std::pow(2.0, finest_q + extra);
        if (std::pow(finest_extent, plan.problem.dim) > static_cast<double>(kMaxNodes))
            fail("refinement ladder exceeds the memory guard of " + std::to_string(kMaxNodes) +
                 " nodes");
    }

    plan.scheme = resolve_scheme(plan.problem, cfg.scheme);
    if (plan.scheme == SchemeChoice::spectral && !plan.problem.flags.spectral_exact_ok)
        fail("problem '" + cfg.problem + "' is not eligible for spectral integration");
    if (plan.problem.flags.surrogate_oracle && plan.problem.noise_count > 0)
        fail("surrogate oracles are supported for deterministic problems only");

    plan.pool.push_back(plan.problem.make_grid(cfg.coarse_extent));
    for (int q = 1; q <= finest_q; ++q) plan.pool.push_back(refine(plan.pool.back()));

    plan.time_grid = plan_time_grid(cfg, cfg.horizon, plan.pool.back()->spacing(),
                                    plan.scheme == SchemeChoice::spectral);
    plan.steps = static_cast<std::int64_t>(plan.time_grid.size()) - 1;
    plan.tau = plan.scheme == SchemeChoice::spectral
                   ? 0.0
                   : cfg.horizon / static_cast<double>(plan.steps);

    // Paths are the unit of parallelism; results land in per-index slots and
    // are reduced in path order, so the table is thread-count independent.
    const std::int64_t paths = cfg.paths;
    std::vector<PathOutcome> outcomes(static_cast<std::size_t>(paths));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(paths));
    {
        unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
        workers = static_cast<unsigned>(
            std::min<std::int64_t>(paths, static_cast<std::int64_t>(workers)));
        auto work = [&](unsigned w) {
            for (std::int64_t p = w; p < paths; p += workers) {
                try {
                    outcomes[static_cast<std::size_t>(p)] = run_one_path(plan, p, override_solver);
                } catch (...) {
                    errors[static_cast<std::size_t>(p)] = std::current_exception();
                }
            }
        };
        if (workers <= 1) {
            work(0);
        } else {
            std::vector<std::thread> threads;
            for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
            for (auto& t : threads) t.join();
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    ConvergenceTable table;
    table.config = cfg;
    table.config.scheme = plan.scheme;
    table.weights = plan.weights;
    table.scheme_used = to_string(plan.scheme) + (plan.scheme == SchemeChoice::spectral
                                                      ? "_exact"
                                                      : "");
    table.oracle_kind = plan.problem.flags.surrogate_oracle ? "surrogate" : "closed_form";
    table.tau = plan.tau;
    table.time_steps = plan.steps;

    std::vector<double> rms_per_resolution;
    table.noise_digests.resize(static_cast<std::size_t>(cfg.refinements));
    for (int r = 0; r < cfg.refinements; ++r) {
        ResolutionRow row;
        row.h = plan.pool[static_cast<std::size_t>(r)]->spacing();
        for (std::int64_t p = 0; p < paths; ++p)
            row.per_path_errors.push_back(
                outcomes[static_cast<std::size_t>(p)].errors[static_cast<std::size_t>(r)]);
        const McSummary stats = mc_stats(row.per_path_errors);
        row.rms_sup_error = stats.rms;
        std::vector<double> sorted = row.per_path_errors;
        std::sort(sorted.begin(), sorted.end());
        row.q10 = quantile_sorted(sorted, 0.1);
        row.q50 = stats.median;
        row.q90 = stats.q90;
        rms_per_resolution.push_back(stats.rms);
        table.rows.push_back(std::move(row));

        auto& cell_digests = table.noise_digests[static_cast<std::size_t>(r)];
        for (std::int64_t p = 0; p < paths; ++p) {
            const auto& pool_digests = outcomes[static_cast<std::size_t>(p)].pool_digests;
            std::vector<std::uint64_t> levels(
                pool_digests.begin() + r, pool_digests.begin() + r + cfg.level + 1);
            for (std::uint64_t d : levels)
                table.noise_digests_consistent &= (d == levels.front());
            cell_digests.push_back(std::move(levels));
        }
    }

    const OrderFit fit = fit_order(rms_per_resolution);
    table.exact = fit.exact;
    if (!fit.exact) {
        for (std::size_t i = 0; i < fit.local.size(); ++i)
            table.rows[i + 1].local_order = fit.local[i];
        if (rms_per_resolution.size() >= 2) table.slope = fit.slope;
    }

    if (plan.problem.flags.surrogate_oracle) {
        double gap = 0.0;
        for (const auto& o : outcomes) gap = std::max(gap, o.surrogate_gap);
        const double budget = rms_per_resolution.front() / 10.0;
        if (gap > budget)
            throw std::runtime_error(
                "harness: surrogate oracle self-consistency failed (reference gap " +
                std::to_string(gap) + " exceeds coarsest error / 10 = " + std::to_string(budget) +
                "); refine the reference or coarsen the run");
    }
    return table;
}

std::string to_csv(const ConvergenceTable& table) {
    std::string out = "h,k,power_step,paths,rms_sup_error,q10,q50,q90,local_order,slope\n";
    for (const auto& row : table.rows) {
        out += fmt(row.h);
        out += ',' + std::to_string(table.config.level);
        out += ',' + std::to_string(table.config.power_step);
        out += ',' + std::to_string(table.config.paths);
        out += ',' + fmt(row.rms_sup_error);
        out += ',' + fmt(row.q10);
        out += ',' + fmt(row.q50);
        out += ',' + fmt(row.q90);
        out += ',';
        if (row.local_order) out += fmt(*row.local_order);
        out += ',';
        if (table.slope) out += fmt(*table.slope);
        out += '\n';
    }
    return out;
}

std::string to_metadata(const ConvergenceTable& table) {
    std::ostringstream os;
    const ExperimentConfig& cfg = table.config;
    os << "[problem]\n";
    os << "name = " << cfg.problem << "\n";
    os << "horizon = " << fmt(cfg.horizon) << "\n";
    os << "oracle = " << table.oracle_kind << "\n";
    os << "\n[grid]\n";
    os << "coarse_extent = " << cfg.coarse_extent << "\n";
    os << "refinements = " << cfg.refinements << "\n";
    os << "coarse_spacing = " << (table.rows.empty() ? "" : fmt(table.rows.front().h)) << "\n";
    os << "\n[richardson]\n";
    os << "k = " << cfg.level << "\n";
    os << "power_step = " << cfg.power_step << "\n";
    os << "weights =";
    for (double w : table.weights.weights) os << " " << fmt(w);
    os << "\nweights_exact =";
    for (const auto& r : table.weights.rationals) os << " " << r;
    os << "\n";
    os << "\n[run]\n";
    os << "scheme = " << table.scheme_used << "\n";
    os << "paths = " << cfg.paths << "\n";
    os << "master_seed = " << cfg.master_seed << "\n";
    os << "tau = " << fmt(table.tau) << "\n";
    os << "time_steps = " << table.time_steps << "\n";
    os << "error_metric = rms over paths of sup over measurement box\n";
    os << "noise_digests_consistent = " << (table.noise_digests_consistent ? "true" : "false")
       << "\n";
    os << "\n[results]\n";
    os << "exact = " << (table.exact ? "true" : "false") << "\n";
    os << "slope = " << (table.slope ? fmt(*table.slope) : "") << "\n";
    os << "local_orders =";
    for (const auto& row : table.rows)
        if (row.local_order) os << " " << fmt(*row.local_order);
    os << "\n";
    return os.str();
}

std::string to_plot_data(const ConvergenceTable& table) {
    std::string out;
    for (const auto& row : table.rows) {
        if (row.rms_sup_error <= 0.0) continue;
        out += fmt(std::log2(row.h)) + " " + fmt(std::log2(row.rms_sup_error)) + "\n";
    }
    return out;
}

}  // namespace spde
