#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "vemflow/errors.hpp"
#include "vemflow/io.hpp"

namespace py = pybind11;
using namespace vemflow;

namespace {

using Bounds = std::array<double, 4>;

Rect to_rect(const Bounds& b) { return {b[0], b[1], b[2], b[3]}; }

Mesh mesh_from_arrays(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>>& xy,
                      std::vector<std::vector<int>> cells) {
  std::vector<Vec2> v(xy.rows());
  for (Eigen::Index i = 0; i < xy.rows(); ++i) v[i] = Vec2(xy(i, 0), xy(i, 1));
  return Mesh(std::move(v), std::move(cells));
}

Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> points(const std::vector<Vec2>& v) {
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> out(v.size(), 2);
  for (std::size_t i = 0; i < v.size(); ++i) out.row(i) = v[i].transpose();
  return out;
}

py::dict error_dict(const ErrorReport& r) {
  py::dict d;
  d["c"] = r.c;
  d["u"] = r.u;
  d["p"] = r.p;
  d["c_absolute"] = r.c_absolute;
  d["u_absolute"] = r.u_absolute;
  d["p_absolute"] = r.p_absolute;
  d["h"] = r.h;
  d["tau"] = r.tau;
  d["cells"] = r.cells;
  d["nz"] = r.nz;
  d["nv"] = r.nv;
  d["nq"] = r.nq;
  d["divergence_defect"] = r.divergence_defect;
  return d;
}

py::dict simulate(const std::string& problem_name, const Mesh* mesh, int k, double tau, double T, int R, bool fct,
                  const std::string& stabilization, double sigma, int snapshot_every) {
  const Problem problem = problem_by_name(problem_name);
  Discretization d(mesh ? *mesh : build_cartesian(problem.default_mesh_n, problem.default_mesh_n, problem.domain), k);
  const Coefficients co = problem.coefficients(d.mesh());
  SolverConfig cfg;
  cfg.tau = tau > 0 ? tau : problem.default_tau;
  cfg.T = T > 0 ? T : problem.T;
  cfg.k = k;
  cfg.reuse_period = R;
  cfg.fct = fct;
  cfg.stabilization = {parse_stabilization(stabilization), sigma};
  cfg.snapshot_every = snapshot_every;
  SimulationResult r;
  {
    py::gil_scoped_release release;
    r = run_simulation(d, co, cfg);
  }
  py::dict out;
  out["t"] = r.final_state.t;
  out["steps"] = r.final_state.step;
  out["C"] = r.final_state.C;
  out["U"] = r.final_state.U;
  out["P"] = r.final_state.P;
  const std::size_t n = r.steps.size();
  Vector t(n), rc(n), rup(n), cmin(n), cmax(n), mass(n), defect(n);
  std::vector<bool> updated(n);
  for (std::size_t i = 0; i < n; ++i) {
    const StepDiagnostics& s = r.steps[i];
    t[i] = s.t;
    rc[i] = s.residual_c;
    rup[i] = s.residual_up;
    cmin[i] = s.c_min;
    cmax[i] = s.c_max;
    mass[i] = s.lumped_mass;
    defect[i] = s.divergence_defect;
    updated[i] = s.darcy_updated;
  }
  py::dict diag;
  diag["t"] = t;
  diag["residual_c"] = rc;
  diag["residual_up"] = rup;
  diag["c_min"] = cmin;
  diag["c_max"] = cmax;
  diag["lumped_mass"] = mass;
  diag["divergence_defect"] = defect;
  diag["darcy_updated"] = updated;
  out["diagnostics"] = diag;
  py::list snaps;
  for (const State& s : r.snapshots) snaps.append(py::make_tuple(s.step, s.t, s.C));
  out["snapshots"] = snaps;
  out["errors"] = problem.exact ? py::object(error_dict(compute_relative_errors(r.final_state, *problem.exact, d)))
                                : py::object(py::none());
  return out;
}

}  // namespace

PYBIND11_MODULE(_vemflow, m) {
  m.doc() = "Virtual element solver for miscible displacement in porous media";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<InvalidMesh>(m, "InvalidMesh", base.ptr());
  py::register_exception<IllShapedCell>(m, "IllShapedCell", base.ptr());
  py::register_exception<InvalidCoefficient>(m, "InvalidCoefficient", base.ptr());
  py::register_exception<UnsupportedDegree>(m, "UnsupportedDegree", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ConvergenceFailure>(m, "ConvergenceFailure", base.ptr());
  py::register_exception<SolverFailure>(m, "SolverFailure", base.ptr());

  py::class_<Mesh>(m, "Mesh")
      .def(py::init(&mesh_from_arrays), py::arg("vertices"), py::arg("cells"))
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_cells", &Mesh::num_cells)
      .def_property_readonly("num_edges", &Mesh::num_edges)
      .def_property_readonly("h", &Mesh::h)
      .def_property_readonly("domain_area", &Mesh::domain_area)
      .def_property_readonly("vertices", [](const Mesh& self) { return points(self.vertices()); })
      .def_property_readonly("cells", &Mesh::cells)
      .def("cell_areas",
           [](const Mesh& self) {
             Vector a(self.num_cells());
             for (int c = 0; c < self.num_cells(); ++c) a[c] = self.geometry(c).area;
             return a;
           })
      .def("centroids",
           [](const Mesh& self) {
             std::vector<Vec2> x(self.num_cells());
             for (int c = 0; c < self.num_cells(); ++c) x[c] = self.geometry(c).centroid;
             return points(x);
           })
      .def(
          "check",
          [](const Mesh& self, double rho0, double rho1) {
            const MeshQuality q = check_assumptions(self, rho0, rho1);
            py::dict d;
            d["h"] = q.h;
            d["min_star_ratio"] = q.min_star_ratio;
            d["min_edge_ratio"] = q.min_edge_ratio;
            d["min_size_ratio"] = q.min_size_ratio;
            d["d1"] = q.d1;
            d["d2"] = q.d2;
            d["d3"] = q.d3;
            return d;
          },
          py::arg("rho0") = 0.05, py::arg("rho1") = 0.01)
      .def("to_text",
           [](const Mesh& self) {
             std::ostringstream s;
             write_mesh(s, self);
             return s.str();
           })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream s(text);
        return read_mesh(s);
      });

  m.def("build_cartesian", [](int nx, int ny, const Bounds& b) { return build_cartesian(nx, ny, to_rect(b)); },
        py::arg("nx"), py::arg("ny"), py::arg("bounds") = Bounds{0, 0, 1, 1});
  m.def(
      "build_voronoi",
      [](int n, const Bounds& b, std::uint64_t seed, int lloyd) { return build_voronoi(n, to_rect(b), seed, lloyd); },
      py::arg("n_cells"), py::arg("bounds") = Bounds{0, 0, 1, 1}, py::arg("seed") = 1, py::arg("lloyd") = 3);

  m.def(
      "element_operators",
      [](const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>>& xy, int k) {
        std::vector<Vec2> v(xy.rows());
        for (Eigen::Index i = 0; i < xy.rows(); ++i) v[i] = Vec2(xy(i, 0), xy(i, 1));
        const ElementOperators ops = build_element_operators(LocalElement::from_polygon(std::move(v), k));
        py::dict d;
        d["pinabla"] = ops.pinabla;
        d["pi0"] = ops.pi0;
        d["pi0_grad"] = ops.pi0_grad;
        d["pi0_vec"] = ops.pi0_vec;
        d["divergence"] = ops.divergence;
        d["z_dofs_of_monomials"] = ops.z_dofs_of_monomials;
        d["v_dofs_of_monomials"] = ops.v_dofs_of_monomials;
        d["area"] = ops.element.area();
        d["diameter"] = ops.element.diameter();
        d["centroid"] = Vec2(ops.element.centroid());
        return d;
      },
      py::arg("vertices"), py::arg("k") = 0,
      "Projector matrices of one counter-clockwise polygon in its scaled monomial basis.");

  m.def("simulate", &simulate, py::arg("problem"), py::arg("mesh") = nullptr, py::arg("k") = 0,
        py::arg("tau") = 0.0, py::arg("T") = 0.0, py::arg("R") = 1, py::arg("fct") = false,
        py::arg("stabilization") = "drecipe", py::arg("sigma") = 1e-3, py::arg("snapshot_every") = 0,
        "Runs example1 | example2a | example2b. tau and T default to the problem's values, the mesh to its "
        "default Cartesian grid.");

  m.def(
      "convergence_study",
      [](const std::string& problem, const std::string& family, int levels, double tau0,
         const std::string& stabilization, double sigma, int base_cells, std::uint64_t seed) {
        const Problem p = problem_by_name(problem);
        ConvergenceOptions opt;
        opt.family = parse_mesh_family(family);
        opt.levels = levels;
        opt.tau0 = tau0 > 0 ? tau0 : p.T / 5;
        opt.base_cells = base_cells > 0 ? base_cells : (opt.family == MeshFamily::Cartesian ? 8 : 64);
        opt.seed = seed;
        opt.solver.stabilization = {parse_stabilization(stabilization), sigma};
        ConvergenceReport r;
        {
          py::gil_scoped_release release;
          r = convergence_study(p, opt);
        }
        py::list lv;
        for (const ErrorReport& e : r.levels) lv.append(error_dict(e));
        py::dict d;
        d["levels"] = lv;
        d["rates"] = r.rates;
        std::ostringstream csv;
        write_convergence_csv(csv, r);
        d["csv"] = csv.str();
        return d;
      },
      py::arg("problem") = "example1", py::arg("family") = "cartesian", py::arg("levels") = 4, py::arg("tau0") = 0.0,
      py::arg("stabilization") = "drecipe", py::arg("sigma") = 1e-3, py::arg("base_cells") = 0,
      py::arg("seed") = 1);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
