#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vemflow/forms.hpp"
#include "vemflow/physics.hpp"
#include "vemflow/solver.hpp"

namespace vemflow {

struct ErrorReport {
  /// Relative L2 errors of Pi0_{k+1} C, Pi0_k U and the piecewise P_k pressure.
  double c = 0.0;
  double u = 0.0;
  double p = 0.0;
  /// Set when the exact field vanishes and the error is reported absolute.
  bool c_absolute = false;
  bool u_absolute = false;
  bool p_absolute = false;
  double h = 0.0;
  double tau = 0.0;
  int cells = 0;
  int nz = 0;
  int nv = 0;
  int nq = 0;
  /// Largest divergence defect over all Darcy solves of the run.
  double divergence_defect = 0.0;
};

/// Pressure polynomial coefficients (scaled monomials of degree k) on a cell.
Vector pressure_coefficients(const Discretization& d, int cell, const Vector& P);

/// Relative L2 errors at time state.t, integrated with a rule of order 2k+4.
ErrorReport compute_relative_errors(const State& state, const ExactSolution& exact, const Discretization& d);

enum class MeshFamily { Cartesian, Voronoi };
std::string to_string(MeshFamily f);
MeshFamily parse_mesh_family(const std::string& name);

/// Mesh of refinement level `level` (0-based): n 2^level squared cells for the
/// Cartesian family, n 4^level Voronoi cells otherwise.
Mesh family_mesh(MeshFamily family, int level, const Rect& bounds, int base_cells, std::uint64_t seed,
                 int lloyd_iterations);

struct ConvergenceOptions {
  MeshFamily family = MeshFamily::Cartesian;
  int levels = 4;
  /// Time step of the coarsest level; halved on every refinement.
  double tau0 = 0.0;
  /// Cells per side (Cartesian) or total cells (Voronoi) on level 0.
  int base_cells = 8;
  std::uint64_t seed = 1;
  int lloyd_iterations = 3;
  /// Degree, stabilization, reuse period and tolerances; tau and T are set per level.
  SolverConfig solver;
};

struct ConvergenceReport {
  MeshFamily family = MeshFamily::Cartesian;
  StabilizationVariant stabilization = StabilizationVariant::Dofi;
  std::vector<ErrorReport> levels;
  /// rates[i] = log2(e_i / e_{i+1}) for (c, u, p); NaN when h does not change.
  std::vector<std::array<double, 3>> rates;
};

/// log2(e0 / e1), or NaN when h0 == h1 or an error is not positive.
double convergence_rate(double e0, double e1, double h0, double h1);

ConvergenceReport convergence_study(const Problem& problem, const ConvergenceOptions& options);

/// One row per level: level,cells,h,tau,nz,nv,nq,err_c,err_u,err_p,rate_c,rate_u,rate_p.
void write_convergence_csv(std::ostream& out, const ConvergenceReport& report);

/// Cell CSV: cell,x,y,c,ux,uy,p (projected values at the centroid).
void write_cell_fields(std::ostream& out, const State& state, const Discretization& d);
/// Vertex CSV: vertex,x,y,c.
void write_vertex_fields(std::ostream& out, const State& state, const Discretization& d);
/// Writes <dir>/<stem>_cells.csv and <dir>/<stem>_vertices.csv.
void export_fields(const State& state, const Discretization& d, const std::string& dir, const std::string& stem);

struct CellFieldRow {
  int cell = 0;
  double x = 0, y = 0, c = 0, ux = 0, uy = 0, p = 0;
};
std::vector<CellFieldRow> read_cell_fields(std::istream& in);

/// Full DOF vectors of a state:
///   state 1
///   step <n>
///   t <t>
///   C <count>   followed by one value per line, then U and P likewise.
void write_state(std::ostream& out, const State& state);
State read_state(std::istream& in);

/// Run description stored as sectioned "key = value" text.
struct RunConfig {
  std::string problem = "example1";
  std::string mesh_kind = "cartesian";
  int mesh_n = 0;  // 0: problem default
  std::uint64_t seed = 1;
  int lloyd_iterations = 3;
  std::string mesh_file;
  int k = 0;
  double tau = 0.0;  // 0: problem default
  double T = 0.0;    // 0: problem default
  int reuse_period = 1;
  StabilizationVariant stabilization = StabilizationVariant::DRecipe;
  double sigma = 1e-3;
  bool fct = false;
  double tolerance = 1e-10;
  int max_iterations = 10;
  std::string out_dir;
  int out_every = 0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string serialize_config(const RunConfig& config);
/// Throws ConfigError on unknown sections/keys or malformed values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& config);

/// Formats a double with 17 significant digits in the classic locale.
std::string format_double(double v);

}  // namespace vemflow
