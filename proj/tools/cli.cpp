#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "vemflow/errors.hpp"
#include "vemflow/io.hpp"

namespace vemflow::cli {
namespace {

namespace fs = std::filesystem;

struct MeshArgs {
  std::string kind = "cartesian";
  int n = 0;
  std::uint64_t seed = 1;
  int lloyd = 3;
  std::string out;
  std::string check;
  double rho0 = 0.05;
  double rho1 = 0.01;
};

struct ConvergeArgs {
  std::string problem = "example1";
  std::string family = "cartesian";
  int levels = 4;
  double tau0 = 0.0;
  std::string stab = "drecipe";
  double sigma = 1e-3;
  int base = 0;
  std::uint64_t seed = 1;
  int lloyd = 3;
  int k = 0;
  int R = 1;
  std::string csv;
};

// Values of `run`; the RunConfig fields they override are applied only when
// the flag was actually given, so a config file keeps its other settings.
struct RunArgs {
  std::string config;
  std::string problem, mesh_kind, mesh_file, stab, out;
  int mesh_n = 0, k = 0, R = 1, out_every = 0, max_iterations = 10;
  std::uint64_t seed = 1;
  double tau = 0.0, T = 0.0, sigma = 1e-3, tolerance = 1e-10;
  bool fct = false;
  bool quiet = false;
};

Mesh make_mesh(const std::string& kind, int n, const Rect& bounds, std::uint64_t seed, int lloyd) {
  if (n <= 0) throw InvalidInput("mesh size must be positive, got " + std::to_string(n));
  if (kind == "cartesian") return build_cartesian(n, n, bounds);
  if (kind == "voronoi") return build_voronoi(n, bounds, seed, lloyd);
  throw InvalidInput("unknown mesh kind '" + kind + "' (cartesian, voronoi)");
}

void print_quality(std::ostream& out, const Mesh& mesh, const MeshQuality& q) {
  out << "vertices=" << mesh.num_vertices() << " cells=" << mesh.num_cells() << " h=" << format_double(q.h)
      << " min_star_ratio=" << format_double(q.min_star_ratio) << " min_edge_ratio=" << format_double(q.min_edge_ratio)
      << " min_size_ratio=" << format_double(q.min_size_ratio) << " d1=" << q.d1 << " d2=" << q.d2 << " d3=" << q.d3
      << '\n';
}

int mesh_command(const MeshArgs& a, std::ostream& out) {
  if (!a.check.empty()) {
    const Mesh mesh = read_mesh_file(a.check);
    const MeshQuality q = check_assumptions(mesh, a.rho0, a.rho1);
    print_quality(out, mesh, q);
    return q.all() ? kOk : kValidation;
  }
  const Mesh mesh = make_mesh(a.kind, a.n, unit_square(), a.seed, a.lloyd);
  if (a.out.empty()) {
    write_mesh(out, mesh);
  } else {
    write_mesh_file(a.out, mesh);
    print_quality(out, mesh, check_assumptions(mesh, a.rho0, a.rho1));
  }
  return kOk;
}

int converge_command(const ConvergeArgs& a, std::ostream& out) {
  const Problem problem = problem_by_name(a.problem);
  ConvergenceOptions opt;
  opt.family = parse_mesh_family(a.family);
  opt.levels = a.levels;
  opt.tau0 = a.tau0 > 0 ? a.tau0 : problem.T / 5;
  opt.base_cells = a.base > 0 ? a.base : (opt.family == MeshFamily::Cartesian ? 8 : 64);
  opt.seed = a.seed;
  opt.lloyd_iterations = a.lloyd;
  opt.solver.k = a.k;
  opt.solver.reuse_period = a.R;
  opt.solver.stabilization = {parse_stabilization(a.stab), a.sigma};
  const ConvergenceReport report = convergence_study(problem, opt);
  if (a.csv.empty()) {
    write_convergence_csv(out, report);
  } else {
    std::ofstream f(a.csv);
    if (!f) throw InvalidInput("cannot open '" + a.csv + "' for writing");
    write_convergence_csv(f, report);
    for (std::size_t i = 0; i < report.rates.size(); ++i)
      out << "level=" << i + 1 << " rate_c=" << format_double(report.rates[i][0])
          << " rate_u=" << format_double(report.rates[i][1]) << " rate_p=" << format_double(report.rates[i][2])
          << '\n';
  }
  return kOk;
}

void print_errors(std::ostream& out, const ErrorReport& r) {
  const auto tag = [](bool absolute) { return absolute ? " (absolute)" : ""; };
  out << "err_c=" << format_double(r.c) << tag(r.c_absolute) << " err_u=" << format_double(r.u) << tag(r.u_absolute)
      << " err_p=" << format_double(r.p) << tag(r.p_absolute) << " h=" << format_double(r.h) << '\n';
}

std::string step_stem(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%05d", step);
  return buf;
}

int run_command(RunConfig cfg, bool quiet, std::ostream& out) {
  const Problem problem = problem_by_name(cfg.problem);
  if (cfg.tau == 0) cfg.tau = problem.default_tau;
  if (cfg.T == 0) cfg.T = problem.T;
  Mesh mesh = [&] {
    if (!cfg.mesh_file.empty()) return read_mesh_file(cfg.mesh_file);
    if (cfg.mesh_n == 0)
      cfg.mesh_n = cfg.mesh_kind == "voronoi" ? problem.default_mesh_n * problem.default_mesh_n : problem.default_mesh_n;
    return make_mesh(cfg.mesh_kind, cfg.mesh_n, problem.domain, cfg.seed, cfg.lloyd_iterations);
  }();
  const Discretization d(std::move(mesh), cfg.k);
  const Coefficients coeffs = problem.coefficients(d.mesh());

  SolverConfig sc;
  sc.tau = cfg.tau;
  sc.T = cfg.T;
  sc.k = cfg.k;
  sc.stabilization = {cfg.stabilization, cfg.sigma};
  sc.fct = cfg.fct;
  sc.reuse_period = cfg.reuse_period;
  sc.tolerance = cfg.tolerance;
  sc.max_iterations = cfg.max_iterations;
  sc.snapshot_every = cfg.out_dir.empty() ? 0 : cfg.out_every;
  sc.progress = quiet ? nullptr : &out;
  sc.validate();

  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw InvalidInput("cannot create '" + cfg.out_dir + "': " + ec.message());
    save_config((fs::path(cfg.out_dir) / "config.ini").string(), cfg);
    write_mesh_file((fs::path(cfg.out_dir) / "mesh.txt").string(), d.mesh());
  }

  const SimulationResult result = run_simulation(d, coeffs, sc);

  double c_min = std::numeric_limits<double>::infinity(), c_max = -c_min, defect = 0.0;
  for (const StepDiagnostics& s : result.steps) {
    c_min = std::min(c_min, s.c_min);
    c_max = std::max(c_max, s.c_max);
    if (s.darcy_updated) defect = std::max(defect, s.divergence_defect);
  }
  out << "done steps=" << result.final_state.step << " t=" << format_double(result.final_state.t)
      << " c_min=" << format_double(c_min) << " c_max=" << format_double(c_max)
      << " divergence_defect=" << format_double(defect) << '\n';
  if (problem.exact) print_errors(out, compute_relative_errors(result.final_state, *problem.exact, d));

  if (!cfg.out_dir.empty()) {
    for (const State& s : result.snapshots) export_fields(s, d, cfg.out_dir, step_stem(s.step));
    export_fields(result.final_state, d, cfg.out_dir, "final");
    const fs::path state_path = fs::path(cfg.out_dir) / "final_state.txt";
    std::ofstream f(state_path);
    if (!f) throw InvalidInput("cannot open '" + state_path.string() + "' for writing");
    write_state(f, result.final_state);
  }
  return kOk;
}

int errors_command(const std::string& dir, std::ostream& out) {
  const RunConfig cfg = load_config((fs::path(dir) / "config.ini").string());
  const Problem problem = problem_by_name(cfg.problem);
  if (!problem.exact) throw ConfigError("problem '" + problem.name + "' has no exact solution");
  const Discretization d(read_mesh_file((fs::path(dir) / "mesh.txt").string()), cfg.k);
  const fs::path state_path = fs::path(dir) / "final_state.txt";
  std::ifstream f(state_path);
  if (!f) throw InvalidInput("cannot read '" + state_path.string() + "'");
  const State state = read_state(f);
  if (state.C.size() != d.dofs().num_z() || state.U.size() != d.dofs().num_v() || state.P.size() != d.dofs().num_q())
    throw InvalidInput("state in '" + dir + "' does not match its mesh");
  print_errors(out, compute_relative_errors(state, *problem.exact, d));
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Virtual element solver for miscible displacement", "vemflow"};
  app.require_subcommand(1);

  MeshArgs ma;
  auto* mesh = app.add_subcommand("mesh", "Generate a mesh on the unit square, or check an existing one");
  mesh->add_option("--kind", ma.kind, "cartesian | voronoi")->check(CLI::IsMember({"cartesian", "voronoi"}));
  mesh->add_option("--n", ma.n, "Cells per side (cartesian) or cell count (voronoi)");
  mesh->add_option("--seed", ma.seed, "Voronoi seed");
  mesh->add_option("--lloyd", ma.lloyd, "Lloyd iterations");
  mesh->add_option("--out", ma.out, "Output file (default: stdout)");
  auto* check = mesh->add_option("--check", ma.check, "Mesh file to check against the shape assumptions");
  mesh->add_option("--rho0", ma.rho0, "Star-shape and edge-length threshold");
  mesh->add_option("--rho1", ma.rho1, "Cell-size ratio threshold");
  check->excludes("--n")->excludes("--out");

  ConvergeArgs ca;
  auto* converge = app.add_subcommand("converge", "Convergence study of a manufactured problem");
  converge->add_option("--problem", ca.problem, "Problem with an exact solution");
  converge->add_option("--family", ca.family, "cartesian | voronoi");
  converge->add_option("--levels", ca.levels, "Refinement levels (>= 2)");
  converge->add_option("--tau0", ca.tau0, "Coarsest time step (default T/5)");
  converge->add_option("--stab", ca.stab, "dofi | drecipe");
  converge->add_option("--sigma", ca.sigma, "D-recipe safeguard");
  converge->add_option("--base", ca.base, "Level-0 cells per side (cartesian, default 8) or cells (voronoi, 64)");
  converge->add_option("--seed", ca.seed, "Voronoi seed");
  converge->add_option("--lloyd", ca.lloyd, "Lloyd iterations");
  converge->add_option("--k", ca.k, "Polynomial degree");
  converge->add_option("--R", ca.R, "Darcy reuse period");
  converge->add_option("--csv", ca.csv, "Write the CSV here and print rates (default: CSV to stdout)");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Time-dependent simulation");
  run->add_option("--config", ra.config, "Config file; flags override its values");
  auto* o_problem = run->add_option("--problem", ra.problem, "example1 | example2a | example2b");
  auto* o_kind = run->add_option("--mesh-kind", ra.mesh_kind, "cartesian | voronoi");
  auto* o_n = run->add_option("--mesh-n", ra.mesh_n, "Cells per side (cartesian) or cell count (voronoi)");
  auto* o_file = run->add_option("--mesh-file", ra.mesh_file, "Read the mesh from a file");
  auto* o_seed = run->add_option("--seed", ra.seed, "Voronoi seed");
  auto* o_k = run->add_option("--k", ra.k, "Polynomial degree");
  auto* o_tau = run->add_option("--tau", ra.tau, "Time step");
  auto* o_T = run->add_option("--T", ra.T, "Final time");
  auto* o_R = run->add_option("--R", ra.R, "Darcy reuse period");
  auto* o_fct = run->add_flag("--fct", ra.fct, "Flux-corrected transport (k = 0)");
  auto* o_stab = run->add_option("--stab", ra.stab, "dofi | drecipe");
  auto* o_sigma = run->add_option("--sigma", ra.sigma, "D-recipe safeguard");
  auto* o_tol = run->add_option("--tolerance", ra.tolerance, "Relative residual of linear solves");
  auto* o_maxit = run->add_option("--max-iterations", ra.max_iterations, "Refinement sweeps per solve");
  auto* o_every = run->add_option("--out-every", ra.out_every, "Export fields every N steps");
  auto* o_out = run->add_option("--out", ra.out, "Output directory");
  run->add_flag("--quiet", ra.quiet, "No progress lines");

  std::string errors_dir;
  auto* errors = app.add_subcommand("errors", "Relative errors of a finished run directory");
  errors->add_option("--dir", errors_dir, "Directory written by run --out")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kValidation;
  }

  try {
    if (*mesh) {
      if (ma.check.empty() && ma.n <= 0) {
        err << "error: mesh needs --n or --check\n\n" << mesh->help();
        return kValidation;
      }
      return mesh_command(ma, out);
    }
    if (*converge) return converge_command(ca, out);
    if (*errors) return errors_command(errors_dir, out);

    if (ra.config.empty() && !*o_problem) {
      err << "error: run needs --problem or --config\n\n" << run->help();
      return kValidation;
    }
    RunConfig cfg = ra.config.empty() ? RunConfig{} : load_config(ra.config);
    if (*o_problem) cfg.problem = ra.problem;
    if (*o_kind) cfg.mesh_kind = ra.mesh_kind;
    if (*o_n) cfg.mesh_n = ra.mesh_n;
    if (*o_file) cfg.mesh_file = ra.mesh_file;
    if (*o_seed) cfg.seed = ra.seed;
    if (*o_k) cfg.k = ra.k;
    if (*o_tau) cfg.tau = ra.tau;
    if (*o_T) cfg.T = ra.T;
    if (*o_R) cfg.reuse_period = ra.R;
    if (*o_fct) cfg.fct = ra.fct;
    if (*o_stab) cfg.stabilization = parse_stabilization(ra.stab);
    if (*o_sigma) cfg.sigma = ra.sigma;
    if (*o_tol) cfg.tolerance = ra.tolerance;
    if (*o_maxit) cfg.max_iterations = ra.max_iterations;
    if (*o_every) cfg.out_every = ra.out_every;
    if (*o_out) cfg.out_dir = ra.out;
    return run_command(std::move(cfg), ra.quiet, out);
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const ConvergenceFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace vemflow::cli
