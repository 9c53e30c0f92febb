// cdapicard command-line driver: solve, sweep, verify, mesh-info.

#include "cdapicard/bench.hpp"
#include "cdapicard/linear_solver.hpp"
#include "cdapicard/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace cdapicard;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Overrides {
    std::string config;
    std::vector<std::pair<std::string, std::string>> pairs;
    bool hybrid = false;
};

void add_overrides(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config, "Flat JSON experiment file");
    auto kv = [&o, cmd](const std::string& flag, const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(
            flag, [&o, key](const std::string& v) { o.pairs.emplace_back(key, v); }, help);
    };
    kv("--n", "n", "Cells per side before barycentric refinement (h = sqrt(2)/n; n = 91 gives h < 1/64)");
    kv("--ra", "ra", "Rayleigh number; Ri = Ra nu kappa");
    kv("--H", "H", "Observation spacing 1/m, e.g. 1/8");
    kv("--mu-u", "mu_u", "Velocity nudging weight (default 1000 clean, 1 noisy)");
    kv("--mu-T", "mu_T", "Temperature nudging weight (default 1000 clean, 1 noisy)");
    kv("--mode", "mode", "Nudged fields: both|u|t|off");
    kv("--noise", "noise", "Relative offset added to the nonzero observations");
    kv("--tol", "tol", "Stopping tolerance on the B-norm of the update");
    kv("--max-iter", "max_iter", "Iteration limit");
    kv("--switch-tol", "switch_tol", "Hybrid hand-off threshold");
    kv("--output", "output", "Prefix for <prefix>.trace.csv / <prefix>.summary.csv");
    cmd->add_flag("--hybrid", o.hybrid, "Switch to Newton once the update drops below switch_tol");
}

ExperimentConfig build_config(const Overrides& o)
{
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    for (const auto& [k, v] : o.pairs) apply_override(cfg, k, v);
    if (o.hybrid) cfg.hybrid = true;
    cfg.validate();
    return cfg;
}

void print_result(const ExperimentResult& r)
{
    const auto& c = r.config;
    std::cout << "Ra " << c.ra << ", H " << format_coarse_spacing(c.coarse_m) << ", mode "
              << to_string(c.effective_mode()) << ", noise " << c.noise << (c.hybrid ? ", hybrid" : "") << '\n'
              << "  status " << to_string(r.trace.status) << " after " << r.trace.iterations() << " iterations";
    if (!r.trace.message.empty()) std::cout << " (" << r.trace.message << ')';
    std::cout << '\n' << std::scientific << std::setprecision(3) << "  final residual " << r.trace.final_residual()
              << ", final error " << r.trace.final_error();
    if (r.fit.ok) std::cout << ", rate " << r.fit.rho << " over iterations " << r.fit.first << '-' << r.fit.last;
    std::cout << std::defaultfloat << std::setprecision(6) << '\n';
}

int run_solve(const Overrides& o)
{
    const ExperimentConfig cfg = build_config(o);
    const auto r = run_experiment(cfg);
    print_result(r);
    if (cfg.output.empty()) {
        write_summary_header(std::cout);
        write_summary_row(std::cout, r);
    }
    return r.converged() ? kExitOk : kExitSolver;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int run_sweep(const Overrides& o, const std::string& axis_name, const std::string& values)
{
    const ExperimentConfig base = build_config(o);
    const SweepAxis axis = parse_sweep_axis(axis_name);
    const auto list = split_list(values);
    ReferenceCache cache;
    const auto s = sweep(base, axis, list, cache);
    for (const auto& r : s.rows) print_result(r);
    if (!base.output.empty()) {
        std::ofstream rows(base.output + ".sweep.csv");
        std::ofstream verdicts(base.output + ".verdicts.csv");
        write_sweep_csv(rows, s);
        write_verdicts_csv(verdicts, s);
    }
    write_sweep_csv(std::cout, s);
    write_verdicts_csv(std::cout, s);
    bool all_converged = true;
    for (const auto& r : s.rows) all_converged = all_converged && r.converged();
    return all_converged ? kExitOk : kExitSolver;
}

int run_verify(std::uint64_t seed, const std::string& suite, const std::string& csv)
{
    const auto report = run_verification(parse_suite(suite), seed);
    write_report_text(std::cout, report);
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw ConfigError("cannot write '" + csv + "'");
        write_report_csv(out, report);
    }
    return report.all_passed() ? kExitOk : kExitFailure;
}

int run_mesh_info(int n, const std::string& dump)
{
    if (n < 1) throw ConfigError("mesh-info: n must be >= 1");
    const auto mesh = std::make_shared<const Mesh>(cavity_mesh(n));
    const auto vel = build_dofmap(mesh, Family::p2_vector);
    const auto pres = build_dofmap(mesh, Family::p1_disc);
    const auto temp = build_dofmap(mesh, Family::p2_scalar);
    std::cout << "unit_square(" << n << ") + barycentric refinement\n"
              << "  vertices   " << mesh->num_vertices() << '\n'
              << "  edges      " << mesh->num_edges() << '\n'
              << "  triangles  " << mesh->num_triangles() << '\n'
              << "  max diam   " << mesh->max_diameter() << " (1/" << 1.0 / mesh->max_diameter() << ")\n"
              << "  velocity   " << vel->num_dofs() << '\n'
              << "  pressure   " << pres->num_dofs() << '\n'
              << "  temperature " << temp->num_dofs() << '\n'
              << "  Oseen system " << vel->num_dofs() + pres->num_dofs() << '\n'
              << "  sparse LU  " << DirectSolver::backend() << '\n';
    if (!dump.empty()) {
        std::ofstream out(dump);
        if (!out) throw ConfigError("cannot write '" + dump + "'");
        write_mesh(out, *mesh);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    ensure_sparse_backend(argv);

    CLI::App app{"Picard, nudged Picard and Newton solvers for steady natural convection"};
    app.require_subcommand(1);

    Overrides solve_o, sweep_o;
    auto* solve_cmd = app.add_subcommand("solve", "Run one experiment");
    add_overrides(solve_cmd, solve_o);

    auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per value of an axis");
    add_overrides(sweep_cmd, sweep_o);
    std::string axis, values;
    sweep_cmd->add_option("--axis", axis, "H|mu|mode|ra|noise")->required();
    sweep_cmd->add_option("--values", values, "Comma-separated axis values, e.g. 1/4,1/8,1/16")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Run the verification suites");
    std::uint64_t seed = kDefaultSeed;
    std::string suite = "all", csv;
    verify_cmd->add_option("--seed", seed, "Seed for the randomized checks");
    verify_cmd->add_option("--suite", suite, "properties|manufactured|oracle|all");
    verify_cmd->add_option("--csv", csv, "Write margins as CSV");

    auto* mesh_cmd = app.add_subcommand("mesh-info", "Describe the cavity mesh and space sizes");
    int mesh_n = 32;
    std::string dump;
    mesh_cmd->add_option("--n", mesh_n, "Cells per side before refinement (h = sqrt(2)/n)");
    mesh_cmd->add_option("--write", dump, "Write the refined mesh as text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*solve_cmd) return run_solve(solve_o);
        if (*sweep_cmd) return run_sweep(sweep_o, axis, values);
        if (*verify_cmd) return run_verify(seed, suite, csv);
        if (*mesh_cmd) return run_mesh_info(mesh_n, dump);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
