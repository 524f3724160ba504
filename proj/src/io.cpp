#include "vemflow/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "vemflow/errors.hpp"
#include "vemflow/log.hpp"

namespace vemflow {

std::string format_double(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17) << v;
  return s.str();
}

Vector pressure_coefficients(const Discretization& d, int cell, const Vector& P) {
  return d.pressure_basis(cell) * d.local_q(cell, P);
}

ErrorReport compute_relative_errors(const State& state, const ExactSolution& exact, const Discretization& d) {
  const int k = d.k();
  const double t = state.t;
  double ec = 0, eu = 0, ep = 0, nc = 0, nu = 0, np = 0;
  for (int c = 0; c < d.num_cells(); ++c) {
    const ElementOperators& ops = d.ops(c);
    const MonomialBasis b = ops.element.basis(k + 1);
    const int nk = poly_dim(k);
    const Vector cc = ops.pi0 * d.local_z(c, state.C);
    const Vector uc = ops.pi0_vec * d.local_v(c, state.U);
    const Vector pc = pressure_coefficients(d, c, state.P);
    for (const auto& qp : quadrature_points(d.mesh(), c, 2 * k + 4)) {
      const Vector m = b.values(qp.x);
      const double ch = m.dot(cc);
      const Vec2 uh(m.head(nk).dot(uc.head(nk)), m.head(nk).dot(uc.tail(nk)));
      const double ph = m.head(nk).dot(pc);
      const double ce = exact.c(qp.x, t);
      const Vec2 ue = exact.u(qp.x, t);
      const double pe = exact.p(qp.x, t);
      ec += qp.w * (ce - ch) * (ce - ch);
      eu += qp.w * (ue - uh).squaredNorm();
      ep += qp.w * (pe - ph) * (pe - ph);
      nc += qp.w * ce * ce;
      nu += qp.w * ue.squaredNorm();
      np += qp.w * pe * pe;
    }
  }
  ErrorReport r;
  auto rel = [](double e, double n, bool& absolute) {
    absolute = !(n > 0.0);
    return absolute ? std::sqrt(e) : std::sqrt(e / n);
  };
  r.c = rel(ec, nc, r.c_absolute);
  r.u = rel(eu, nu, r.u_absolute);
  r.p = rel(ep, np, r.p_absolute);
  r.h = d.mesh().h();
  r.cells = d.num_cells();
  r.nz = d.dofs().num_z();
  r.nv = d.dofs().num_v();
  r.nq = d.dofs().num_q();
  return r;
}

std::string to_string(MeshFamily f) { return f == MeshFamily::Cartesian ? "cartesian" : "voronoi"; }

MeshFamily parse_mesh_family(const std::string& name) {
  if (name == "cartesian") return MeshFamily::Cartesian;
  if (name == "voronoi") return MeshFamily::Voronoi;
  throw ConfigError("unknown mesh family '" + name + "' (expected cartesian or voronoi)");
}

Mesh family_mesh(MeshFamily family, int level, const Rect& bounds, int base_cells, std::uint64_t seed,
                 int lloyd_iterations) {
  if (level < 0 || base_cells < 1) throw InvalidInput("family_mesh: bad level or base size");
  if (family == MeshFamily::Cartesian) {
    const int n = base_cells << level;
    return build_cartesian(n, n, bounds);
  }
  return build_voronoi(base_cells << (2 * level), bounds, seed, lloyd_iterations);
}

double convergence_rate(double e0, double e1, double h0, double h1) {
  if (h0 == h1 || !(e0 > 0.0) || !(e1 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(e0 / e1);
}

ConvergenceReport convergence_study(const Problem& problem, const ConvergenceOptions& options) {
  if (options.levels < 2) throw ConfigError("a convergence study needs at least two levels");
  if (!problem.exact) throw ConfigError("problem '" + problem.name + "' has no exact solution");
  ConvergenceReport report;
  report.family = options.family;
  report.stabilization = options.solver.stabilization.variant;
  for (int level = 0; level < options.levels; ++level) {
    SolverConfig cfg = options.solver;
    cfg.T = problem.T;
    cfg.tau = options.tau0 / std::ldexp(1.0, level);
    try {
      const Discretization d(family_mesh(options.family, level, problem.domain, options.base_cells, options.seed,
                                         options.lloyd_iterations),
                             cfg.k);
      const Coefficients coeffs = problem.coefficients(d.mesh());
      const SimulationResult run = run_simulation(d, coeffs, cfg);
      ErrorReport r = compute_relative_errors(run.final_state, *problem.exact, d);
      r.tau = cfg.T / cfg.num_steps();
      for (const StepDiagnostics& s : run.steps)
        if (s.darcy_updated) r.divergence_defect = std::max(r.divergence_defect, s.divergence_defect);
      report.levels.push_back(r);
    } catch (const SolverFailure& e) {
      throw SolverFailure(e.step(), "level " + std::to_string(level) + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i + 1 < report.levels.size(); ++i) {
    const ErrorReport& a = report.levels[i];
    const ErrorReport& b = report.levels[i + 1];
    report.rates.push_back({convergence_rate(a.c, b.c, a.h, b.h), convergence_rate(a.u, b.u, a.h, b.h),
                            convergence_rate(a.p, b.p, a.h, b.h)});
  }
  return report;
}

void write_convergence_csv(std::ostream& out, const ConvergenceReport& report) {
  std::ostringstream s;
  s << "level,cells,h,tau,nz,nv,nq,err_c,err_u,err_p,rate_c,rate_u,rate_p\n";
  for (std::size_t i = 0; i < report.levels.size(); ++i) {
    const ErrorReport& r = report.levels[i];
    s << i << ',' << r.cells << ',' << format_double(r.h) << ',' << format_double(r.tau) << ',' << r.nz << ','
      << r.nv << ',' << r.nq << ',' << format_double(r.c) << ',' << format_double(r.u) << ',' << format_double(r.p);
    for (int v = 0; v < 3; ++v) {
      s << ',';
      if (i > 0) s << format_double(report.rates[i - 1][v]);
    }
    s << '\n';
  }
  out << s.str();
}

void write_cell_fields(std::ostream& out, const State& state, const Discretization& d) {
  const int k = d.k();
  const int nk = poly_dim(k);
  std::ostringstream s;
  s << "cell,x,y,c,ux,uy,p\n";
  for (int c = 0; c < d.num_cells(); ++c) {
    const ElementOperators& ops = d.ops(c);
    const Vec2 x = ops.element.centroid();
    const Vector m = ops.element.basis(k + 1).values(x);
    const double cv = m.dot(ops.pi0 * d.local_z(c, state.C));
    const Vector uc = ops.pi0_vec * d.local_v(c, state.U);
    const double pv = m.head(nk).dot(pressure_coefficients(d, c, state.P));
    s << c << ',' << format_double(x.x()) << ',' << format_double(x.y()) << ',' << format_double(cv) << ','
      << format_double(m.head(nk).dot(uc.head(nk))) << ',' << format_double(m.head(nk).dot(uc.tail(nk))) << ','
      << format_double(pv) << '\n';
  }
  out << s.str();
}

void write_vertex_fields(std::ostream& out, const State& state, const Discretization& d) {
  std::ostringstream s;
  s << "vertex,x,y,c\n";
  for (int v = 0; v < d.mesh().num_vertices(); ++v) {
    const Vec2& x = d.mesh().vertex(v);
    s << v << ',' << format_double(x.x()) << ',' << format_double(x.y()) << ','
      << format_double(state.C(d.dofs().z_vertex_dof(v))) << '\n';
  }
  out << s.str();
}

namespace {
std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open '" + path + "' for writing");
  return f;
}
}  // namespace

void export_fields(const State& state, const Discretization& d, const std::string& dir, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create directory '" + dir + "': " + ec.message());
  const std::string base = (std::filesystem::path(dir) / stem).string();
  {
    std::ofstream f = open_output(base + "_cells.csv");
    write_cell_fields(f, state, d);
    if (!f) throw InvalidInput("write failed for '" + base + "_cells.csv'");
  }
  {
    std::ofstream f = open_output(base + "_vertices.csv");
    write_vertex_fields(f, state, d);
    if (!f) throw InvalidInput("write failed for '" + base + "_vertices.csv'");
  }
}

namespace {
double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad number for " + what + ": '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad integer for " + what + ": '" + s + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad integer for " + what + ": '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("bad boolean for " + what + ": '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

std::vector<CellFieldRow> read_cell_fields(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "cell,x,y,c,ux,uy,p") throw InvalidInput("cell field CSV: bad header");
  std::vector<CellFieldRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(trim(item));
    if (parts.size() != 7) throw InvalidInput("cell field CSV: expected 7 columns");
    CellFieldRow r;
    r.cell = static_cast<int>(parse_int(parts[0], "cell"));
    r.x = parse_double(parts[1], "x");
    r.y = parse_double(parts[2], "y");
    r.c = parse_double(parts[3], "c");
    r.ux = parse_double(parts[4], "ux");
    r.uy = parse_double(parts[5], "uy");
    r.p = parse_double(parts[6], "p");
    rows.push_back(r);
  }
  return rows;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream s;
  s << "[problem]\nname = " << c.problem << "\n\n";
  s << "[mesh]\nkind = " << c.mesh_kind << "\nn = " << c.mesh_n << "\nseed = " << c.seed
    << "\nlloyd = " << c.lloyd_iterations << "\nfile = " << c.mesh_file << "\n\n";
  s << "[time]\ntau = " << format_double(c.tau) << "\nT = " << format_double(c.T) << "\nR = " << c.reuse_period
    << "\n\n";
  s << "[discretization]\nk = " << c.k << "\nstabilization = " << to_string(c.stabilization)
    << "\nsigma = " << format_double(c.sigma) << "\nfct = " << (c.fct ? "true" : "false") << "\n\n";
  s << "[solver]\ntolerance = " << format_double(c.tolerance) << "\nmax_iterations = " << c.max_iterations
    << "\n\n";
  s << "[output]\ndir = " << c.out_dir << "\nevery = " << c.out_every << "\n";
  return s.str();
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string full = section + "." + key;
    if (full == "problem.name") c.problem = value;
    else if (full == "mesh.kind") c.mesh_kind = value;
    else if (full == "mesh.n") c.mesh_n = static_cast<int>(parse_int(value, full));
    else if (full == "mesh.seed") c.seed = parse_uint(value, full);
    else if (full == "mesh.lloyd") c.lloyd_iterations = static_cast<int>(parse_int(value, full));
    else if (full == "mesh.file") c.mesh_file = value;
    else if (full == "time.tau") c.tau = parse_double(value, full);
    else if (full == "time.T") c.T = parse_double(value, full);
    else if (full == "time.R") c.reuse_period = static_cast<int>(parse_int(value, full));
    else if (full == "discretization.k") c.k = static_cast<int>(parse_int(value, full));
    else if (full == "discretization.stabilization") c.stabilization = parse_stabilization(value);
    else if (full == "discretization.sigma") c.sigma = parse_double(value, full);
    else if (full == "discretization.fct") c.fct = parse_bool(value, full);
    else if (full == "solver.tolerance") c.tolerance = parse_double(value, full);
    else if (full == "solver.max_iterations") c.max_iterations = static_cast<int>(parse_int(value, full));
    else if (full == "output.dir") c.out_dir = value;
    else if (full == "output.every") c.out_every = static_cast<int>(parse_int(value, full));
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + full + "'");
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::string& path, const RunConfig& config) {
  std::ofstream f = open_output(path);
  f << serialize_config(config);
  if (!f) throw InvalidInput("write failed for '" + path + "'");
}

void write_state(std::ostream& out, const State& state) {
  out << "state 1\nstep " << state.step << "\nt " << format_double(state.t) << "\n";
  const auto block = [&](const char* tag, const Vector& v) {
    out << tag << ' ' << v.size() << '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
  };
  block("C", state.C);
  block("U", state.U);
  block("P", state.P);
}

State read_state(std::istream& in) {
  std::string tag, value;
  const auto expect = [&](const char* want) {
    if (!(in >> tag >> value) || tag != want) throw InvalidInput(std::string("state file: expected '") + want + "'");
    return value;
  };
  if (expect("state") != "1") throw InvalidInput("state file: unsupported version " + value);
  State s;
  s.step = static_cast<int>(parse_int(expect("step"), "step"));
  s.t = parse_double(expect("t"), "t");
  for (auto [name, v] : {std::pair{"C", &s.C}, std::pair{"U", &s.U}, std::pair{"P", &s.P}}) {
    const long long n = parse_int(expect(name), name);
    if (n < 0) throw InvalidInput(std::string("state file: negative size for ") + name);
    v->resize(n);
    for (long long i = 0; i < n; ++i) {
      if (!(in >> value)) throw InvalidInput(std::string("state file: truncated ") + name + " block");
      (*v)[i] = parse_double(value, name);
    }
  }
  return s;
}

}  // namespace vemflow
