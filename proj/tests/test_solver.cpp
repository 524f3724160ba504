#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dense_oracle.hpp"
#include "vemflow/errors.hpp"
#include "vemflow/solver.hpp"

using namespace vemflow;

namespace {

SparseMatrix sparse(const Matrix& m) { return m.sparseView(); }

// No sources, no velocity, constant porosity: pure diffusion.
Coefficients quiet_coefficients() {
  Coefficients k;
  k.porosity = [](const Vec2&) { return 1.0; };
  k.porosity_lower = 1.0;
  k.dispersion = {0.1, 1.0, 0.5};
  k.mobility = {[](double, const Vec2&) { return 1.0; }, 0.5, 2.0};
  k.q_plus = [](int, const Vec2&, double) { return 0.0; };
  k.q_minus = k.q_plus;
  k.c_hat = k.q_plus;
  k.c0 = [](const Vec2& x) { return x.x() > 0.5 ? 1.0 : 0.0; };
  return k;
}

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST_CASE("linear solve contract") {
  const Vector b = Vector::LinSpaced(4, 1.0, 4.0);
  CHECK(max_abs_diff(linear_solve(sparse(Matrix::Identity(4, 4)), b), b) == 0.0);

  Matrix a(3, 3);
  a << 4, 1, 0, 1, 3, 1, 0, 1, 2;  // det = 18
  Matrix inv(3, 3);
  inv << 5, -2, 1, -2, 8, -4, 1, -4, 11;
  inv /= 18.0;
  const Vector rhs(Vector::LinSpaced(3, -1.0, 2.0));
  double res = -1.0;
  CHECK(max_abs_diff(linear_solve(sparse(a), rhs, 1e-12, &res), inv * rhs) < 1e-12);
  CHECK(res <= 1e-12);

  Matrix singular = a;
  singular.row(2) = singular.row(0);
  singular.col(2) = singular.col(0);
  CHECK_THROWS_AS(linear_solve(sparse(singular), rhs), ConvergenceFailure);
  CHECK(linear_solve(sparse(a), Vector::Zero(3)).norm() == 0.0);
  CHECK_THROWS_AS(linear_solve(sparse(a), Vector::Zero(2)), InvalidInput);
}

TEST_CASE("darcy with zero data is zero") {
  const Discretization d(build_voronoi(30, unit_square(), 2), 0);
  const Coefficients k = quiet_coefficients();
  const Vector C = interpolate_scalar(d.mesh(), d.dofs(), k.c0);
  const DarcyResult r = darcy_solve(d, k, C, 0.0, {});
  CHECK(r.U.norm() == 0.0);
  CHECK(r.P.norm() == 0.0);
}

TEST_CASE("darcy divergence and gauge on the quarter five-spot") {
  const Problem p = example2_problem(Example2Variant::TestA);
  for (int k : {0, 1}) {
    const Discretization d(build_cartesian(10, 10, p.domain), k);
    const Coefficients co = p.coefficients(d.mesh());
    const Vector C = Vector::Zero(d.dofs().num_z());
    const DarcyResult r = darcy_solve(d, co, C, 0.0, {});
    CHECK(r.divergence_defect < 1e-9);
    CHECK(r.residual < 1e-10);
    double total_div = 0.0, mean_p = 0.0, scale = 0.0;
    for (int c = 0; c < d.num_cells(); ++c) {
      const ElementOperators& ops = d.ops(c);
      const Vector dv = ops.divergence * d.local_v(c, r.U);
      total_div += dv(0) * ops.element.area();
      // Integral of the pressure: only the constant dual basis function has nonzero mean.
      const Vector pc = d.pressure_basis(c) * d.local_q(c, r.P);
      mean_p += pc.dot(ops.mass.row(0).head(pc.size()).transpose());
      scale += std::abs(pc(0)) * ops.element.area();
    }
    CHECK(std::abs(total_div) < 1e-10);
    CHECK(std::abs(mean_p) < 1e-9 * scale);
  }
}

TEST_CASE("concentration step basics") {
  const Discretization d(build_voronoi(40, unit_square(), 5), 0);
  Coefficients k = quiet_coefficients();
  const Vector U = Vector::Zero(d.dofs().num_v());
  const Vector zero = Vector::Zero(d.dofs().num_z());
  CHECK(concentration_step(d, k, zero, U, 0.01, 0.01, {}).norm() == 0.0);

  // Backward Euler energy decay over 50 steps.
  const SparseMatrix M = assemble_mass_concentration(d, k.porosity, {});
  Vector C = interpolate_scalar(d.mesh(), d.dofs(), k.c0);
  double energy = C.dot(M * C);
  bool decays = true;
  for (int n = 1; n <= 50; ++n) {
    C = concentration_step(d, k, C, U, 0.01, 0.01 * n, {});
    const double e = C.dot(M * C);
    decays = decays && e <= energy * (1 + 1e-13);
    energy = e;
  }
  CHECK(decays);
}

namespace {

double rel_diff(const Vector& got, const Vector& want, double floor = 0.0) {
  return max_abs_diff(got, want) / std::max(floor, want.lpNorm<Eigen::Infinity>());
}

void compare_with_oracle(const Problem& p, const SpaceField& c_start, double t0, double tau, double darcy_floor) {
  const Mesh mesh = build_cartesian(2, 2, p.domain);
  const Discretization d(mesh, 0);
  const Coefficients co = p.coefficients(mesh);
  for (auto variant : {StabilizationVariant::Dofi, StabilizationVariant::DRecipe}) {
    CAPTURE(p.name);
    CAPTURE(to_string(variant));
    const StabilizationRecipe recipe{variant, 1e-3};
    const dense_oracle::Oracle oracle(
        mesh, co, variant == StabilizationVariant::Dofi ? dense_oracle::Recipe::Dofi : dense_oracle::Recipe::DRecipe,
        1e-3);
    const Vector C0 = interpolate_scalar(mesh, d.dofs(), c_start);
    const DarcyResult dr0 = darcy_solve(d, co, C0, t0, recipe);
    const Vector C1 = concentration_step(d, co, C0, dr0.U, tau, t0 + tau, recipe);
    const DarcyResult dr1 = darcy_solve(d, co, C1, t0 + tau, recipe);
    const dense_oracle::StepResult ref = oracle.step(C0, dr0.U, tau, t0 + tau);
    CHECK(rel_diff(C1, ref.C) < 1e-10);
    CHECK(rel_diff(dr1.U, ref.U, darcy_floor) < 1e-10);
    CHECK(rel_diff(dr1.P, ref.P, darcy_floor) < 1e-10);
  }
}

}  // namespace

TEST_CASE("single step matches the dense oracle") {
  // Manufactured problem: every transport term is active. The source g has
  // zero mean on each quarter of the square, so the discrete velocity is
  // round-off and is compared in absolute terms.
  const ManufacturedProblem mp = example1_problem();
  compare_with_oracle(mp.problem, [&](const Vec2& x) { return 1e4 * mp.exact.c(x, 0.006); }, 0.006, 0.002, 1.0);
  // Wells with concentration-dependent mobility: nontrivial Darcy solve.
  const Problem b = example2_problem(Example2Variant::TestB);
  compare_with_oracle(b, [](const Vec2& x) { return x.x() * x.y() / 1e6; }, 0.0, 36.0, 0.0);
}

TEST_CASE("flux-corrected step") {
  const Problem p = example2_problem(Example2Variant::TestB);
  const Discretization d(build_cartesian(12, 12, p.domain), 0);
  const Coefficients co = p.coefficients(d.mesh());
  SolverConfig cfg;
  cfg.T = 30 * p.default_tau;
  cfg.tau = p.default_tau;
  cfg.fct = true;
  const SimulationResult run = run_simulation(d, co, cfg);
  bool bounded = true, alphas = true, monotone = true;
  for (std::size_t i = 1; i < run.steps.size(); ++i) {
    const StepDiagnostics& s = run.steps[i];
    bounded = bounded && s.c_min >= -1e-8 && s.c_max <= 1 + 1e-8;
    alphas = alphas && s.alpha_min >= 0.0 && s.alpha_max <= 1.0;
    monotone = monotone && s.lumped_mass >= run.steps[i - 1].lumped_mass - 1e-9;
    CHECK(std::abs(s.flux_sum) < 1e-10);
  }
  CHECK(bounded);
  CHECK(alphas);
  CHECK(monotone);

  // Antidiffusive corrections do not change the lumped mass of the low-order solution.
  const SparseMatrix M = assemble_mass_concentration(d, co.porosity, {});
  const Vector lumped = M * Vector::Ones(M.cols());
  FctDiagnostics diag;
  const Vector C = fct_concentration_step(d, co, run.final_state.C, run.final_state.U, cfg.tau, cfg.T + cfg.tau, {},
                                          1e-10, &diag);
  CHECK(std::abs(lumped.dot(C) - lumped.dot(diag.C_low)) < 1e-10 * lumped.dot(C));

  // Uniform state without sources or velocity is a fixed point.
  Coefficients quiet = quiet_coefficients();
  const Vector uniform = Vector::Constant(d.dofs().num_z(), 0.3);
  const Vector same = fct_concentration_step(d, quiet, uniform, Vector::Zero(d.dofs().num_v()), 1.0, 1.0, {});
  CHECK(max_abs_diff(same, uniform) < 1e-13);

  const Discretization d1(build_cartesian(2, 2, unit_square()), 1);
  CHECK_THROWS_AS(fct_concentration_step(d1, quiet, Vector::Zero(d1.dofs().num_z()),
                                         Vector::Zero(d1.dofs().num_v()), 1.0, 1.0, {}),
                  UnsupportedDegree);
}

TEST_CASE("time loop") {
  const ManufacturedProblem mp = example1_problem();
  const Discretization d(build_cartesian(6, 6, unit_square()), 0);
  const Coefficients co = mp.problem.coefficients(d.mesh());
  SolverConfig cfg;
  cfg.T = 0.01;
  cfg.tau = 0.001;
  cfg.reuse_period = 3;
  cfg.snapshot_every = 2;
  std::ostringstream log;
  cfg.progress = &log;
  const SimulationResult a = run_simulation(d, co, cfg);
  CHECK(a.steps.size() == 11);
  CHECK(a.final_state.step == 10);
  CHECK(a.final_state.t == 0.01);
  CHECK(a.snapshots.size() == 6);
  for (const StepDiagnostics& s : a.steps) CHECK(s.darcy_updated == (s.step % 3 == 0));

  // Progress lines are machine-parseable, one per state.
  std::istringstream lines(log.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    int step = -1;
    double t = -1, r1 = -1, r2 = -1;
    CHECK(std::sscanf(line.c_str(), "step=%d t=%lf residual_c=%lf residual_up=%lf", &step, &t, &r1, &r2) == 4);
    CHECK(step == count);
    ++count;
  }
  CHECK(count == 11);

  cfg.progress = nullptr;
  const SimulationResult b = run_simulation(d, co, cfg);
  CHECK(a.final_state.C == b.final_state.C);
  CHECK(a.final_state.U == b.final_state.U);
  CHECK(a.final_state.P == b.final_state.P);

  // tau that does not divide T is snapped to T / N.
  cfg.tau = 0.0011;
  cfg.snapshot_every = 0;
  const SimulationResult c = run_simulation(d, co, cfg);
  CHECK(c.steps.size() == 10);
  CHECK(c.final_state.t == 0.01);

  SolverConfig bad = cfg;
  bad.tau = -1.0;
  CHECK_THROWS_AS(run_simulation(d, co, bad), ConfigError);
  bad = cfg;
  bad.reuse_period = 0;
  CHECK_THROWS_AS(run_simulation(d, co, bad), ConfigError);
  bad = cfg;
  bad.k = 1;
  CHECK_THROWS_AS(run_simulation(d, co, bad), ConfigError);
  bad = cfg;
  bad.stabilization = {StabilizationVariant::DRecipe, -1.0};
  CHECK_THROWS_AS(run_simulation(d, co, bad), ConfigError);
}

TEST_CASE("solver failures carry the step") {
  const ManufacturedProblem mp = example1_problem();
  const Discretization d(build_cartesian(4, 4, unit_square()), 0);
  Coefficients co = mp.problem.coefficients(d.mesh());
  // Mobility bounds that the concentration leaves after a few steps.
  co.mobility.a = [](double c, const Vec2&) { return 1.0 + 1e6 * c; };
  co.mobility.lower = 0.5;
  co.mobility.upper = 1.0 + 1e-3;
  co.c0 = [](const Vec2&) { return 0.0; };
  SolverConfig cfg;
  cfg.T = 0.01;
  cfg.tau = 0.001;
  try {
    run_simulation(d, co, cfg);
    FAIL("expected a solver failure");
  } catch (const SolverFailure& e) {
    CHECK(e.step() >= 1);
  }
}
