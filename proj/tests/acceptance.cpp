// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dense_oracle.hpp"
#include "support.hpp"
#include "vemflow/io.hpp"
#include "vemflow/log.hpp"

using namespace vemflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double coeff_error(const Vector& got, const Vector& want) { return (got - want).norm() / std::max(1.0, want.norm()); }

Mesh single_cell(const std::vector<Vec2>& poly) {
  std::vector<int> ids(poly.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return Mesh(poly, {ids});
}

// ---------------------------------------------------------------- 1

void projector_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  const double rho0 = 0.05;
  double worst = 0.0;
  int rejected = 0;
  std::vector<std::vector<Vec2>> polys;
  while (polys.size() < 100) {
    auto p = testing_support::random_polygon(rng, polys.size() % 3 != 0);
    const MeshQuality q = check_assumptions(single_cell(p), rho0, 0.0);
    if (q.d1 && q.d2)
      polys.push_back(std::move(p));
    else
      ++rejected;
  }
  for (int k : {0, 1}) {
    for (const auto& poly : polys) {
      const LocalElement el = LocalElement::from_polygon(poly, k);
      const ElementOperators ops = build_element_operators(el);
      const MonomialBasis bk1 = el.basis(k + 1);
      const MonomialBasis bk = el.basis(k);
      const double h = el.diameter();
      for (int a = 0; a < bk1.size(); ++a) {
        const Vector dofs = local_interpolate_scalar(el, [&](const Vec2& x) { return bk1.values(x)(a); });
        Vector e = Vector::Zero(bk1.size());
        e(a) = 1.0;
        worst = std::max({worst, coeff_error(ops.pinabla * dofs, e), coeff_error(ops.pi0 * dofs, e)});
        // Gradient of a scaled monomial, differentiated by hand.
        Vector g = Vector::Zero(2 * bk.size());
        const auto ex = bk1.exponent(a);
        if (ex[0] > 0) g(MonomialBasis::index(ex[0] - 1, ex[1])) = ex[0] / h;
        if (ex[1] > 0) g(bk.size() + MonomialBasis::index(ex[0], ex[1] - 1)) = ex[1] / h;
        worst = std::max(worst, coeff_error(ops.pi0_grad * dofs, g));
      }
      for (int comp = 0; comp < 2; ++comp)
        for (int a = 0; a < bk.size(); ++a) {
          const Vector dv = local_interpolate_velocity(el, [&](const Vec2& x) {
            const double m = bk.values(x)(a);
            return comp == 0 ? Vec2(m, 0.0) : Vec2(0.0, m);
          });
          Vector e = Vector::Zero(2 * bk.size());
          e(comp * bk.size() + a) = 1.0;
          worst = std::max(worst, coeff_error(ops.pi0_vec * dv, e));
        }
    }
  }
  const double secs = seconds_since(t0);
  report(1, "projector consistency", worst <= 1e-10 && secs < 10.0,
         "100 polygons (rho0 0.05, " + std::to_string(rejected) + " draws rejected), k=0,1, max rel err " +
             fmt("%.2e", worst) + " (tol 1e-10), " + fmt("%.1f", secs) + " s (limit 10 s)");
}

// ---------------------------------------------------------------- 2, 3, 5

struct Study {
  ConvergenceReport report;
  double seconds = 0.0;
};

Study run_study(MeshFamily family, StabilizationVariant variant) {
  const ManufacturedProblem mp = example1_problem();
  ConvergenceOptions opt;
  opt.family = family;
  opt.levels = 4;
  opt.base_cells = family == MeshFamily::Cartesian ? 8 : 64;
  opt.tau0 = mp.problem.T / 5;
  opt.solver.k = 0;
  opt.solver.stabilization = {variant, 1e-3};
  const auto t0 = Clock::now();
  Study s{convergence_study(mp.problem, opt), 0.0};
  s.seconds = seconds_since(t0);
  return s;
}

// Last-level rates in [0.8, 1.3], errors strictly decreasing.
bool study_ok(const ConvergenceReport& r, std::string& detail) {
  bool ok = true;
  const auto& last = r.rates.back();
  for (double rate : last) ok = ok && rate >= 0.8 && rate <= 1.3;
  for (std::size_t i = 0; i + 1 < r.levels.size(); ++i) {
    const ErrorReport &a = r.levels[i], &b = r.levels[i + 1];
    ok = ok && b.c < a.c && b.u < a.u && b.p < a.p;
  }
  detail += to_string(r.stabilization) + " rates (" + fmt("%.3f", last[0]) + ", " + fmt("%.3f", last[1]) + ", " +
            fmt("%.3f", last[2]) + ")";
  return ok;
}

void convergence(int id, const std::string& name, const Study& dofi, const Study& drecipe, double limit) {
  std::string detail;
  bool ok = study_ok(dofi.report, detail);
  detail += "; ";
  ok = study_ok(drecipe.report, detail) && ok;
  const double secs = dofi.seconds + drecipe.seconds;
  ok = ok && secs < limit;
  report(id, name, ok,
         detail + " for (c, u, p), window [0.8, 1.3], errors decreasing; " + fmt("%.1f", secs) + " s (limit " +
             fmt("%.0f", limit) + " s)");
}

double max_defect(const ConvergenceReport& r) {
  double m = 0.0;
  for (const ErrorReport& e : r.levels) m = std::max(m, e.divergence_defect);
  return m;
}

// ---------------------------------------------------------------- 6

void reuse_period() {
  const ManufacturedProblem mp = example1_problem();
  const Discretization d(build_cartesian(16, 16, mp.problem.domain), 0);
  const Coefficients co = mp.problem.coefficients(d.mesh());
  double worst = 0.0;
  for (auto variant : {StabilizationVariant::Dofi, StabilizationVariant::DRecipe}) {
    ErrorReport e[2];
    const int periods[2] = {1, 5};
    for (int i = 0; i < 2; ++i) {
      SolverConfig cfg;
      cfg.T = mp.problem.T;
      cfg.tau = mp.problem.T / 10;
      cfg.stabilization = {variant, 1e-3};
      cfg.reuse_period = periods[i];
      e[i] = compute_relative_errors(run_simulation(d, co, cfg).final_state, mp.exact, d);
    }
    worst = std::max({worst, std::abs(e[1].c - e[0].c) / e[0].c, std::abs(e[1].u - e[0].u) / e[0].u,
                      std::abs(e[1].p - e[0].p) / e[0].p});
  }
  report(6, "velocity reuse R=5 vs R=1", worst <= 1e-3,
         "16x16, tau T/10, both stabilizations, max relative error difference " + fmt("%.2e", worst) + " (tol 1e-3)");
}

// ---------------------------------------------------------------- 7

struct BoundsRun {
  double c_min = 0.0, c_max = 0.0;
  bool mass_monotone = true;
  double darcy_defect = 0.0;
  double seconds = 0.0;
  int steps = 0;
};

BoundsRun run_example2(Example2Variant variant, bool fct) {
  const Problem p = example2_problem(variant);
  const Discretization d(build_cartesian(25, 25, p.domain), 0);
  const Coefficients co = p.coefficients(d.mesh());
  SolverConfig cfg;
  cfg.T = p.T;
  cfg.tau = p.default_tau;
  cfg.fct = fct;
  cfg.stabilization = {StabilizationVariant::DRecipe, 1e-3};
  const auto t0 = Clock::now();
  const SimulationResult r = run_simulation(d, co, cfg);
  BoundsRun b;
  b.seconds = seconds_since(t0);
  b.steps = r.final_state.step;
  b.c_min = r.steps.front().c_min;
  b.c_max = r.steps.front().c_max;
  for (std::size_t n = 0; n < r.steps.size(); ++n) {
    const StepDiagnostics& s = r.steps[n];
    b.c_min = std::min(b.c_min, s.c_min);
    b.c_max = std::max(b.c_max, s.c_max);
    if (s.darcy_updated) b.darcy_defect = std::max(b.darcy_defect, s.divergence_defect);
    // Round-off allowance of one part in 1e12 of the current mass.
    if (n > 0) b.mass_monotone = b.mass_monotone && s.lumped_mass >= r.steps[n - 1].lumped_mass * (1 - 1e-12);
  }
  return b;
}

// ---------------------------------------------------------------- 8

double scaled_diff(const Vector& got, const Vector& want, double floor) {
  return (got - want).lpNorm<Eigen::Infinity>() / std::max(floor, want.lpNorm<Eigen::Infinity>());
}

void dense_oracle_check() {
  struct Case {
    Problem problem;
    std::function<double(const Vec2&)> c_start;
    double t0, tau, darcy_floor;
  };
  const ManufacturedProblem mp = example1_problem();
  // On 2x2 the manufactured g has zero mean per cell, so U is round-off and
  // is compared against a unit scale; the five-spot case has a real flow.
  const Case cases[] = {
      {mp.problem, [&](const Vec2& x) { return 1e4 * mp.exact.c(x, 0.006); }, 0.006, 0.002, 1.0},
      {example2_problem(Example2Variant::TestB), [](const Vec2& x) { return x.x() * x.y() / 1e6; }, 0.0, 36.0, 0.0},
  };
  double worst = 0.0;
  for (const Case& cs : cases) {
    const Mesh mesh = build_cartesian(2, 2, cs.problem.domain);
    const Discretization d(mesh, 0);
    const Coefficients co = cs.problem.coefficients(mesh);
    for (auto variant : {StabilizationVariant::Dofi, StabilizationVariant::DRecipe}) {
      const StabilizationRecipe recipe{variant, 1e-3};
      const dense_oracle::Oracle oracle(
          mesh, co, variant == StabilizationVariant::Dofi ? dense_oracle::Recipe::Dofi : dense_oracle::Recipe::DRecipe,
          1e-3);
      const Vector C0 = interpolate_scalar(mesh, d.dofs(), cs.c_start);
      const DarcyResult dr0 = darcy_solve(d, co, C0, cs.t0, recipe);
      const Vector C1 = concentration_step(d, co, C0, dr0.U, cs.tau, cs.t0 + cs.tau, recipe);
      const DarcyResult dr1 = darcy_solve(d, co, C1, cs.t0 + cs.tau, recipe);
      const dense_oracle::StepResult ref = oracle.step(C0, dr0.U, cs.tau, cs.t0 + cs.tau);
      worst = std::max({worst, scaled_diff(C1, ref.C, 0.0), scaled_diff(dr1.U, ref.U, cs.darcy_floor),
                        scaled_diff(dr1.P, ref.P, cs.darcy_floor)});
    }
  }
  report(8, "dense oracle, one step on 2x2", worst <= 1e-10,
         "manufactured and five-spot data, both stabilizations, max DOF difference / field max " + fmt("%.2e", worst) +
             " (tol 1e-10)");
}

// ---------------------------------------------------------------- 9

double asymmetry(const Matrix& m) { return (m - m.transpose()).cwiseAbs().maxCoeff() / m.cwiseAbs().maxCoeff(); }

// Orthonormal basis of ker(projector) = range(I - D Pi).
Matrix slice_basis(const Matrix& projector) {
  Eigen::FullPivLU<Matrix> lu(projector);
  const Matrix k = lu.kernel();
  if (lu.dimensionOfKernel() == 0) return Matrix(projector.cols(), 0);
  Eigen::HouseholderQR<Matrix> qr(k);
  return qr.householderQ() * Matrix::Identity(k.rows(), k.cols());
}

struct DefiniteCheck {
  double worst_negative = 0.0;  // most negative eigenvalue / largest
  double worst_slice = 1.0;     // smallest slice eigenvalue / largest
};

void check_stabilization(const Matrix& s, const Matrix& projector, DefiniteCheck& out) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  const double top = std::max(es.eigenvalues().maxCoeff(), 1e-300);
  out.worst_negative = std::min(out.worst_negative, es.eigenvalues().minCoeff() / top);
  const Matrix q = slice_basis(projector);
  if (q.cols() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> slice(q.transpose() * s * q);
  out.worst_slice = std::min(out.worst_slice, slice.eigenvalues().minCoeff() / top);
}

void structural() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01;
  const ManufacturedProblem mp = example1_problem();
  const double t = 0.004;
  double sym = 0.0, theta = 0.0;
  DefiniteCheck def;
  for (int k : {0, 1}) {
    const Discretization d(build_voronoi(40, unit_square(), 7), k);
    const Coefficients co = mp.problem.coefficients(d.mesh());
    const Vector U = interpolate_velocity(d.mesh(), d.dofs(), [&](const Vec2& x) { return mp.exact.u(x, t); });
    const Vector C = interpolate_scalar(d.mesh(), d.dofs(), [&](const Vec2& x) { return mp.exact.c(x, t); });
    const CellFunction qp = at_time(co.q_plus, t), qm = at_time(co.q_minus, t);
    for (auto variant : {StabilizationVariant::Dofi, StabilizationVariant::DRecipe}) {
      const StabilizationRecipe r{variant, 1e-3};
      sym = std::max(sym, asymmetry(Matrix(assemble_mass_concentration(d, co.porosity, r))));
      sym = std::max(sym, asymmetry(Matrix(assemble_darcy_mass(d, C, co.mobility, r))));
      for (int c = 0; c < d.num_cells(); ++c) {
        const ElementOperators& ops = d.ops(c);
        check_stabilization(local_mass_concentration(d, c, co.porosity, r).stabilization, ops.pi0, def);
        check_stabilization(local_diffusion(d, c, U, co.porosity, co.dispersion, r).stabilization, ops.pinabla, def);
        check_stabilization(local_darcy_mass(d, c, C, co.mobility, r).stabilization, ops.pi0_vec, def);
      }
    }
    const SparseMatrix th = assemble_convection(d, U, qp, qm);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector z = Vector::NullaryExpr(d.dofs().num_z(), [&]() { return n01(rng); });
      double want = 0.0;
      for (int c = 0; c < d.num_cells(); ++c) {
        const Vector coeff = d.ops(c).pi0 * d.local_z(c, z);
        const MonomialBasis b = d.ops(c).element.basis(k + 1);
        for (const QuadraturePoint& p : d.quadrature(c)) {
          const double v = eval_poly(b, coeff, p.x);
          want += 0.5 * p.w * (qp(c, p.x) + qm(c, p.x)) * v * v;
        }
      }
      theta = std::max(theta, std::abs(z.dot(th * z) - want) / std::abs(want));
    }
  }

  // No sources, no gravity.
  Coefficients quiet = mp.problem.coefficients(build_cartesian(1, 1, unit_square()));
  quiet.q_plus = [](int, const Vec2&, double) { return 0.0; };
  quiet.q_minus = quiet.q_plus;
  quiet.gravity = nullptr;
  double zero_norm = 0.0;
  for (int k : {0, 1}) {
    const Discretization d(build_voronoi(30, unit_square(), 3), k);
    const Vector C = Vector::Constant(d.dofs().num_z(), 0.5);
    const DarcyResult z = darcy_solve(d, quiet, C, 0.0, {});
    zero_norm = std::max({zero_norm, z.U.lpNorm<Eigen::Infinity>(), z.P.lpNorm<Eigen::Infinity>()});
  }

  const bool ok = sym <= 1e-12 && theta <= 1e-10 && def.worst_negative >= -1e-12 && def.worst_slice > 1e-12 &&
                  zero_norm == 0.0;
  report(9, "structural invariants", ok,
         "M,A asymmetry " + fmt("%.1e", sym) + " (tol 1e-12); Theta identity rel err " + fmt("%.1e", theta) +
             " (tol 1e-10); stabilization min eig " + fmt("%.1e", def.worst_negative) +
             ", min slice eig " + fmt("%.1e", def.worst_slice) + " (relative, must be > 0); zero-data Darcy max " +
             fmt("%.1e", zero_norm));
}

}  // namespace

int main() {
  set_log_level(LogLevel::Error);
  const auto start = Clock::now();

  projector_suite();

  const Study cart_dofi = run_study(MeshFamily::Cartesian, StabilizationVariant::Dofi);
  const Study cart_drecipe = run_study(MeshFamily::Cartesian, StabilizationVariant::DRecipe);
  convergence(2, "Cartesian convergence", cart_dofi, cart_drecipe, 300.0);

  const Study vor_dofi = run_study(MeshFamily::Voronoi, StabilizationVariant::Dofi);
  const Study vor_drecipe = run_study(MeshFamily::Voronoi, StabilizationVariant::DRecipe);
  convergence(3, "Voronoi convergence", vor_dofi, vor_drecipe, 600.0);

  const BoundsRun a = run_example2(Example2Variant::TestA, false);
  const BoundsRun b_fct = run_example2(Example2Variant::TestB, true);
  const BoundsRun b_plain = run_example2(Example2Variant::TestB, false);
  double defect = std::max({a.darcy_defect, b_fct.darcy_defect, b_plain.darcy_defect});
  for (const Study* s : {&cart_dofi, &cart_drecipe, &vor_dofi, &vor_drecipe})
    defect = std::max(defect, max_defect(s->report));
  report(4, "divergence constraint", defect <= 1e-9,
         "every Darcy solve of the studies and of Example 2 (A, B, B+FCT), max scaled moment defect " +
             fmt("%.2e", defect) + " (tol 1e-9)");

  {
    const auto& dl = cart_dofi.report.levels;
    const auto& rl = cart_drecipe.report.levels;
    const bool ok = rl[0].p <= dl[0].p && rl[1].p <= dl[1].p;
    report(5, "D-recipe pressure pre-asymptotics", ok,
           "pressure error 8x8 " + fmt("%.4g", rl[0].p) + " vs dofi " + fmt("%.4g", dl[0].p) + ", 16x16 " +
               fmt("%.4g", rl[1].p) + " vs dofi " + fmt("%.4g", dl[1].p));
  }

  reuse_period();

  {
    const bool bounded = b_fct.c_min >= -1e-8 && b_fct.c_max <= 1 + 1e-8;
    const bool overshoot = b_plain.c_min < -1e-4 || b_plain.c_max > 1 + 1e-4;
    const double secs = b_fct.seconds + b_plain.seconds;
    report(7, "flux-corrected transport bounds", bounded && overshoot && b_fct.mass_monotone &&
                                                    b_fct.steps == 100 && secs < 120.0,
           "Test B 25x25, " + std::to_string(b_fct.steps) + " steps; FCT C in [" + fmt("%.3g", b_fct.c_min) + ", " +
               fmt("%.6g", b_fct.c_max) + "] (tol 1e-8); plain C in [" + fmt("%.3g", b_plain.c_min) + ", " +
               fmt("%.3g", b_plain.c_max) + "] (must leave [-1e-4, 1+1e-4]); lumped mass " +
               (b_fct.mass_monotone ? "non-decreasing" : "DECREASES") + "; " + fmt("%.1f", secs) +
               " s (limit 120 s)");
  }

  dense_oracle_check();
  structural();

  std::printf("%d of 9 criteria failed, total %.1f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
