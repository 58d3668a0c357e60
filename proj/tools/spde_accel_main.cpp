// Command-line front end: extrapolation weight tables, operator checks,
// single-path solves and nested-grid convergence runs driven by key = value
// manifests. Data goes to standard output or files, diagnostics to standard
// error; the exit code is 0 iff no operation failed.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spde/config.hpp"
#include "spde/harness.hpp"

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string monomial_label(const std::vector<int>& exponents) {
    std::string label;
    for (std::size_t a = 0; a < exponents.size(); ++a) {
        if (exponents[a] == 0) continue;
        if (!label.empty()) label += "*";
        label += exponents.size() == 1 ? "x" : "x" + std::to_string(a);
        if (exponents[a] > 1) label += "^" + std::to_string(exponents[a]);
    }
    return label.empty() ? "1" : label;
}

struct ConvergeArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    std::int64_t paths = 0;
    int level = -1;
    int power_step = 0;
    bool plot_data = false;
};

spde::ExperimentConfig load_experiment(const ConvergeArgs& args) {
    spde::ExperimentConfig cfg =
        spde::experiment_from_config(spde::ConfigFile::parse_file(args.config_path));
    if (args.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(args.seed);
    if (args.paths > 0) cfg.paths = args.paths;
    if (args.level >= 0) cfg.level = args.level;
    if (args.power_step > 0) cfg.power_step = args.power_step;
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    if (cfg.output_dir.empty()) {
        if (const char* env = std::getenv("SPDE_ACCEL_OUT")) cfg.output_dir = env;
        if (cfg.output_dir.empty()) cfg.output_dir = ".";
    }
    return cfg;
}

int cmd_coeffs(int k, int power_step) {
    const spde::ExtrapolationWeights w = spde::coefficients(k, power_step);
    std::cout << "k = " << w.k << ", power_step = " << w.power_step << "\n";
    for (int j = 0; j <= w.k; ++j)
        std::cout << "c[" << j << "] = " << w.rationals[static_cast<std::size_t>(j)] << " = "
                  << fmt(w.weights[static_cast<std::size_t>(j)]) << "\n";
    return 0;
}

int cmd_check(const std::string& problem_name, std::int64_t extent) {
    const spde::TestProblem problem = spde::problem_by_name(problem_name);
    const spde::GridPtr grid = problem.make_grid(extent);

    const spde::ConsistencyReport report =
        spde::consistency_check(problem.spec, problem.continuous, grid, 2);
    std::cout << "consistency of the discrete operators on monomials (extent " << extent
              << ", h = " << fmt(grid->spacing()) << "):\n";
    for (const auto& entry : report.entries)
        std::cout << "  " << entry.op << " on " << monomial_label(entry.exponents)
                  << ": max residual " << fmt(entry.max_abs_residual) << " (scaled "
                  << fmt(entry.max_scaled_residual) << ")\n";
    std::cout << "  worst scaled residual: " << fmt(report.worst_scaled) << "\n";

    const double T = problem.default_horizon;
    const std::vector<double> times = {0.0, 0.5 * T, T};
    const spde::ParabolicityReport par =
        spde::parabolicity_report(problem.continuous, grid, times);
    std::cout << "stochastic parabolicity: min eig(a - sigma sigma^T / 2) = "
              << fmt(par.min_eigenvalue);
    if (par.indefinite)
        std::cout << " -> INDEFINITE (outside the well-posed regime)\n";
    else if (par.degenerate)
        std::cout << " -> degenerate\n";
    else
        std::cout << " -> uniformly parabolic\n";

    const spde::DiffusionFloor floor = spde::min_diffusion_weight(problem.spec, grid, 0.0);
    std::cout << "min diffusion weight a_l: " << fmt(floor.min_value)
              << (floor.min_value < 0.0 ? " (NEGATIVE: monotone form broken)" : "") << "\n";
    return 0;
}

int cmd_converge(const ConvergeArgs& args) {
    const spde::ExperimentConfig cfg = load_experiment(args);
    const spde::ConvergenceTable table = spde::run_convergence(cfg);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const fs::path csv_path = fs::path(cfg.output_dir) / (cfg.output_basename + ".csv");
    const fs::path meta_path = fs::path(cfg.output_dir) / (cfg.output_basename + ".meta");
    std::ofstream(csv_path) << spde::to_csv(table);
    std::ofstream(meta_path) << spde::to_metadata(table);

    std::ostream& summary = args.plot_data ? std::cerr : std::cout;
    summary << "problem " << table.config.problem << ", scheme " << table.scheme_used
            << ", paths " << table.config.paths << ", seed " << table.config.master_seed
            << ", k " << table.config.level << ", power_step " << table.config.power_step
            << "\n";
    for (const auto& row : table.rows) {
        summary << "  h = " << fmt(row.h) << "  rms_sup_error = " << fmt(row.rms_sup_error);
        if (row.local_order) summary << "  local_order = " << fmt(*row.local_order);
        summary << "\n";
    }
    if (table.exact)
        summary << "errors are exactly zero\n";
    else if (table.slope)
        summary << "least-squares order: " << fmt(*table.slope) << "\n";
    if (args.plot_data) std::cout << spde::to_plot_data(table);
    std::cerr << "wrote " << csv_path.string() << " and " << meta_path.string() << "\n";
    return 0;
}

int cmd_solve(const ConvergeArgs& args) {
    const spde::ExperimentConfig cfg = load_experiment(args);
    const spde::TestProblem problem = spde::problem_by_name(cfg.problem);
    const double horizon = cfg.horizon > 0.0 ? cfg.horizon : problem.default_horizon;
    const spde::SchemeChoice scheme = spde::resolve_scheme(problem, cfg.scheme);

    std::vector<spde::GridPtr> pool{problem.make_grid(cfg.coarse_extent)};
    for (int q = 1; q <= cfg.level; ++q) pool.push_back(spde::refine(pool.back()));
    const std::vector<double> time_grid = spde::plan_time_grid(
        cfg, horizon, pool.back()->spacing(), scheme == spde::SchemeChoice::spectral);
    const spde::WienerPath path =
        spde::sample_path(cfg.master_seed, 0, time_grid, problem.noise_count);

    std::vector<spde::GridFunction> solutions;
    for (const auto& grid : pool) {
        const spde::SemidiscreteProblem bound = problem.instantiate(grid, horizon);
        solutions.push_back(scheme == spde::SchemeChoice::spectral
                                ? spde::solve_spectral_exact(bound, path).terminal
                                : spde::solve_path(bound,
                                                   scheme == spde::SchemeChoice::euler_maruyama
                                                       ? spde::TimeScheme::euler_maruyama
                                                       : spde::TimeScheme::drift_implicit,
                                                   path).terminal);
    }
    const spde::GridFunction field =
        spde::extrapolate(solutions, spde::coefficients(cfg.level, cfg.power_step));

    const spde::Grid& grid = *field.grid();
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
        grid.coordinates(i, x);
        for (double c : x) std::cout << fmt(c) << " ";
        std::cout << fmt(field[i]) << "\n";
    }
    std::cerr << "problem " << problem.name << ", scheme "
              << spde::to_string(scheme) << ", horizon " << fmt(horizon) << ", k "
              << cfg.level << ", nodes " << grid.node_count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-difference solver for linear parabolic SPDEs with "
                 "Richardson-extrapolated convergence acceleration"};
    app.require_subcommand(1);

    int coeffs_k = 0, coeffs_step = 2;
    CLI::App* coeffs = app.add_subcommand("coeffs", "Print an extrapolation weight table");
    coeffs->add_option("--k", coeffs_k, "Acceleration level (0..8)")->required();
    coeffs->add_option("--power-step", coeffs_step, "Expansion step: 1 or 2");

    std::string check_problem;
    std::int64_t check_extent = 32;
    CLI::App* check = app.add_subcommand("check", "Consistency and parabolicity report");
    check->add_option("--problem", check_problem, "Built-in problem name")->required();
    check->add_option("--extent", check_extent, "Grid nodes per axis");

    ConvergeArgs conv;
    CLI::App* converge = app.add_subcommand("converge", "Run a convergence experiment");
    converge->add_option("--config", conv.config_path, "Experiment manifest")->required();
    converge->add_option("--seed", conv.seed, "Override run.master_seed");
    converge->add_option("--paths", conv.paths, "Override run.paths");
    converge->add_option("--k", conv.level, "Override richardson.k");
    converge->add_option("--power-step", conv.power_step, "Override richardson.power_step");
    converge->add_option("--out", conv.out_dir, "Output directory (else config, else $SPDE_ACCEL_OUT)");
    converge->add_flag("--plot-data", conv.plot_data,
                       "Emit log2(h) log2(error) pairs on standard output");

    ConvergeArgs solve_args;
    CLI::App* solve = app.add_subcommand("solve", "Dump the terminal field of one path");
    solve->add_option("--config", solve_args.config_path, "Experiment manifest")->required();
    solve->add_option("--seed", solve_args.seed, "Override run.master_seed");
    solve->add_option("--k", solve_args.level, "Override richardson.k (accelerated dump)");
    solve->add_option("--power-step", solve_args.power_step, "Override richardson.power_step");

    try {
        app.parse(argc, argv);
        if (coeffs->parsed()) return cmd_coeffs(coeffs_k, coeffs_step);
        if (check->parsed()) return cmd_check(check_problem, check_extent);
        if (converge->parsed()) return cmd_converge(conv);
        if (solve->parsed()) return cmd_solve(solve_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
