#include "vemflow/solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "vemflow/errors.hpp"
#include "vemflow/log.hpp"

namespace vemflow {

int SolverConfig::num_steps() const { return static_cast<int>(std::llround(T / tau)); }

void SolverConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("time step must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("final time must be positive");
  const double ratio = T / tau;
  if (std::llround(ratio) < 1 || std::abs(ratio - std::llround(ratio)) > 0.5)
    throw ConfigError("T / tau must be close to a positive integer");
  if (reuse_period < 1) throw ConfigError("velocity reuse period must be at least 1");
  if (tolerance <= 0.0) throw ConfigError("solver tolerance must be positive");
  if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be non-negative");
  require_supported_degree(k);
  stabilization.validate();
  if (fct && k != 0) throw UnsupportedDegree(k);
}

Vector linear_solve(const SparseMatrix& a, const Vector& b, double tolerance, double* residual,
                    int max_refinements) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidInput("linear_solve: dimension mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    if (residual) *residual = 0.0;
    return Vector::Zero(b.size());
  }
  SparseMatrix ac = a;
  ac.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(ac);
  lu.factorize(ac);
  if (lu.info() != Eigen::Success) throw ConvergenceFailure("sparse LU factorization failed: " + lu.lastErrorMessage(), std::numeric_limits<double>::infinity());
  Vector x = lu.solve(b);
  double res = (b - ac * x).norm() / bnorm;
  for (int it = 0; it < max_refinements && res > tolerance && std::isfinite(res); ++it) {
    x += lu.solve(b - ac * x);
    res = (b - ac * x).norm() / bnorm;
  }
  if (residual) *residual = res;
  if (!(res <= tolerance)) throw ConvergenceFailure("linear solve did not reach the tolerance", res);
  return x;
}

DarcyResult darcy_solve(const Discretization& d, const Coefficients& coeffs, const Vector& C, double t,
                        const StabilizationRecipe& recipe, double tolerance, int max_refinements) {
  const DofMap& dm = d.dofs();
  const SparseMatrix a = assemble_darcy_mass(d, C, coeffs.mobility, recipe);
  const SparseMatrix b = assemble_divergence(d);
  const Vector g_gamma = rhs_gravity(d, coeffs.gravity, C);
  const Vector gq = rhs_mass(d, [&](int c, const Vec2& x) { return coeffs.G(c, x, t); });

  std::vector<int> vmap(dm.num_v(), -1);
  int nf = 0;
  for (int v = 0; v < dm.num_v(); ++v)
    if (!dm.v_on_boundary(v)) vmap[v] = nf++;
  const int nq = dm.num_q();
  const int n = nf + nq;

  // The zero-mean constraint row m has m_j = |E| on the constant basis
  // function of each cell; `kernel` holds the DOFs of the constant pressure 1,
  // which spans the null space of the unconstrained saddle-point matrix.
  Vector m = Vector::Zero(nq);
  Vector kernel = Vector::Zero(nq);
  for (int c = 0; c < d.num_cells(); ++c) {
    const LocalElement& el = d.ops(c).element;
    const std::vector<int>& qd = dm.q_dofs(c);
    m(qd[0]) = el.area();
    const MonomialBasis basis = el.basis(d.k());
    for (int j = 0; j < static_cast<int>(qd.size()); ++j) {
      const auto& e = basis.exponent(j);
      kernel(qd[j]) = el.monomial_integral(e[0], e[1]) / el.area();
    }
  }

  std::vector<Triplet> t3;
  t3.reserve(a.nonZeros() + 2 * b.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      if (vmap[it.row()] >= 0 && vmap[it.col()] >= 0) t3.emplace_back(vmap[it.row()], vmap[it.col()], it.value());
  for (int k = 0; k < b.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(b, k); it; ++it) {
      const int v = vmap[it.col()];
      if (v < 0) continue;
      t3.emplace_back(nf + it.row(), v, it.value());
      t3.emplace_back(v, nf + it.row(), it.value());
    }
  SparseMatrix sys(n, n);
  sys.setFromTriplets(t3.begin(), t3.end());
  Vector rhs = Vector::Zero(n);
  for (int v = 0; v < dm.num_v(); ++v)
    if (vmap[v] >= 0) rhs(vmap[v]) = g_gamma(v);
  rhs.segment(nf, nq) = -gq;

  // Bordered solve: the multiplier makes the right-hand side orthogonal to
  // the null space, one pressure DOF is pinned, and the constant is then
  // fixed by the zero-mean row.
  DarcyResult out;
  out.multiplier = kernel.dot(rhs.segment(nf, nq)) / kernel.dot(m);
  Vector shifted = rhs;
  shifted.segment(nf, nq) -= out.multiplier * m;
  const int pin = nf + dm.q_dofs(0)[0];
  SparseMatrix pinned = sys;
  pinned.prune([pin](Eigen::Index i, Eigen::Index j, double) { return i != pin && j != pin; });
  pinned.coeffRef(pin, pin) = 1.0;
  shifted(pin) = 0.0;
  Vector x = linear_solve(pinned, shifted, tolerance, nullptr, max_refinements);
  x.segment(nf, nq) -= (m.dot(x.segment(nf, nq)) / m.dot(kernel)) * kernel;

  Vector r = rhs - sys * x;
  r.segment(nf, nq) -= out.multiplier * m;
  const double rnorm = std::sqrt(r.squaredNorm() + std::pow(m.dot(x.segment(nf, nq)), 2));
  const double bnorm = rhs.norm();
  out.residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
  if (!(out.residual <= tolerance)) throw ConvergenceFailure("Darcy system residual above tolerance", out.residual);

  out.U = Vector::Zero(dm.num_v());
  for (int v = 0; v < dm.num_v(); ++v)
    if (vmap[v] >= 0) out.U(v) = x(vmap[v]);
  out.P = x.segment(nf, nq);
  const Vector defect = b * out.U + gq;
  const double scale = gq.lpNorm<Eigen::Infinity>();
  out.divergence_defect = defect.lpNorm<Eigen::Infinity>() / (scale > 0.0 ? scale : 1.0);
  return out;
}

namespace {

struct Transport {
  SparseMatrix K;  // Theta + D
  Vector F;        // (q+ c_hat + f, Pi0 z)
};

Transport build_transport(const Discretization& d, const Coefficients& coeffs, const Vector& U, double t,
                          const StabilizationRecipe& recipe) {
  const CellFunction qp = at_time(coeffs.q_plus, t);
  const CellFunction qm = at_time(coeffs.q_minus, t);
  Transport tr;
  tr.K = assemble_convection(d, U, qp, qm) + assemble_diffusion(d, U, coeffs.porosity, coeffs.dispersion, recipe);
  tr.F = rhs_concentration(d, qp, at_time(coeffs.c_hat, t));
  if (coeffs.source) tr.F += rhs_load(d, at_time(coeffs.source, t));
  return tr;
}

Vector implicit_step(const SparseMatrix& M, const Transport& tr, const Vector& C_prev, double tau, double tol,
                     int max_it, double* residual) {
  const SparseMatrix sys = M + tau * tr.K;
  const Vector rhs = tau * tr.F + M * C_prev;
  return linear_solve(sys, rhs, tol, residual, max_it);
}

Vector fct_step(const SparseMatrix& M, const Transport& tr, const Vector& C_prev, double tau, double tol, int max_it,
                FctDiagnostics* diag) {
  const int n = static_cast<int>(M.rows());
  Vector m = Vector::Zero(n);
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) m(it.row()) += it.value();
  for (int i = 0; i < n; ++i)
    if (!(m(i) > 0.0)) throw SolverFailure(0, "non-positive lumped mass entry");

  // The transport operator sits on the left-hand side, so off-diagonal
  // entries must be made non-positive: d_ij = max(0, k_ij, k_ji).
  const SparseMatrix& K = tr.K;
  const SparseMatrix Kt = K.transpose();
  std::vector<Triplet> dt;
  for (int k = 0; k < K.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(K, k); it; ++it) {
      const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
      if (i == j) continue;
      const double dij = std::max({0.0, it.value(), Kt.coeff(i, j)});
      if (dij > 0.0) {
        dt.emplace_back(i, j, dij);
        dt.emplace_back(i, i, -dij);
      }
    }
  SparseMatrix Dart(n, n);
  Dart.setFromTriplets(dt.begin(), dt.end());
  const SparseMatrix L = K - Dart;

  SparseMatrix ML(n, n);
  ML.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int i = 0; i < n; ++i) ML.insert(i, i) = m(i);
  double residual = 0.0;
  const Vector CL = linear_solve(SparseMatrix(ML + tau * L), m.cwiseProduct(C_prev) + tau * tr.F, tol, &residual, max_it);
  const Vector rate = (CL - C_prev) / tau;

  // Raw antidiffusive fluxes on the mass-matrix graph, with prelimiting.
  struct Flux {
    int i, j;
    double f;
  };
  std::vector<Flux> fluxes;
  Vector pplus = Vector::Zero(n), pminus = Vector::Zero(n);
  Vector cmax = CL, cmin = CL;
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
      if (i == j) continue;
      cmax(i) = std::max(cmax(i), CL(j));
      cmin(i) = std::min(cmin(i), CL(j));
      double f = it.value() * (rate(i) - rate(j)) + Dart.coeff(i, j) * (CL(i) - CL(j));
      if (f * (CL(j) - CL(i)) > 0.0) f = 0.0;
      fluxes.push_back({i, j, f});
      if (f > 0.0) pplus(i) += f;
      else pminus(i) += f;
    }
  Vector rplus = Vector::Ones(n), rminus = Vector::Ones(n);
  for (int i = 0; i < n; ++i) {
    const double qplus = m(i) / tau * (cmax(i) - CL(i));
    const double qminus = m(i) / tau * (cmin(i) - CL(i));
    if (pplus(i) > 0.0) rplus(i) = std::clamp(qplus / pplus(i), 0.0, 1.0);
    if (pminus(i) < 0.0) rminus(i) = std::clamp(qminus / pminus(i), 0.0, 1.0);
  }
  Vector correction = Vector::Zero(n);
  double amin = 1.0, amax = 0.0, fsum = 0.0;
  for (const Flux& fl : fluxes) {
    const double alpha = fl.f > 0.0 ? std::min(rplus(fl.i), rminus(fl.j)) : std::min(rminus(fl.i), rplus(fl.j));
    amin = std::min(amin, alpha);
    amax = std::max(amax, alpha);
    correction(fl.i) += alpha * fl.f;
    fsum += alpha * fl.f;
  }
  const Vector C = CL + tau * correction.cwiseQuotient(m);
  if (diag) {
    diag->C_low = CL;
    diag->alpha_min = fluxes.empty() ? 1.0 : amin;
    diag->alpha_max = fluxes.empty() ? 0.0 : amax;
    diag->flux_sum = fsum;
    diag->residual = residual;
  }
  return C;
}

}  // namespace

Vector concentration_step(const Discretization& d, const Coefficients& coeffs, const Vector& C_prev,
                          const Vector& U_prev, double tau, double t_n, const StabilizationRecipe& recipe,
                          double tolerance, double* residual) {
  const SparseMatrix M = assemble_mass_concentration(d, coeffs.porosity, recipe);
  return implicit_step(M, build_transport(d, coeffs, U_prev, t_n, recipe), C_prev, tau, tolerance, 10, residual);
}

Vector fct_concentration_step(const Discretization& d, const Coefficients& coeffs, const Vector& C_prev,
                              const Vector& U_prev, double tau, double t_n, const StabilizationRecipe& recipe,
                              double tolerance, FctDiagnostics* diag) {
  if (d.k() != 0) throw UnsupportedDegree(d.k());
  const SparseMatrix M = assemble_mass_concentration(d, coeffs.porosity, recipe);
  return fct_step(M, build_transport(d, coeffs, U_prev, t_n, recipe), C_prev, tau, tolerance, 10, diag);
}

namespace {

void fill_concentration_stats(const Discretization& d, const Vector& lumped, const Vector& C, StepDiagnostics& s) {
  const int nodal = d.mesh().num_vertices() + d.k() * d.mesh().num_edges();
  s.c_min = C.head(nodal).minCoeff();
  s.c_max = C.head(nodal).maxCoeff();
  s.lumped_mass = lumped.dot(C);
}

}  // namespace

SimulationResult run_simulation(const Discretization& d, const Coefficients& coeffs, const SolverConfig& config) {
  config.validate();
  if (config.k != d.k()) throw ConfigError("configured degree differs from the discretization degree");
  coeffs.validate();
  const int N = config.num_steps();
  const double tau = config.T / N;
  if (std::abs(tau - config.tau) > 1e-12 * config.tau) {
    std::ostringstream msg;
    msg << "time step adjusted from " << config.tau << " to T/N = " << tau;
    log_warning(msg.str());
  }
  const StabilizationRecipe& recipe = config.stabilization;
  const double tol = config.tolerance;

  const SparseMatrix M = assemble_mass_concentration(d, coeffs.porosity, recipe);
  Vector lumped = Vector::Zero(M.rows());
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) lumped(it.row()) += it.value();

  auto progress = [&](const StepDiagnostics& s) {
    if (!config.progress) return;
    std::ostringstream line;
    line.imbue(std::locale::classic());
    line << std::setprecision(17) << "step=" << s.step << " t=" << s.t << " residual_c=" << s.residual_c
         << " residual_up=" << s.residual_up << '\n';
    *config.progress << line.str() << std::flush;
  };

  SimulationResult result;
  State state;
  state.step = 0;
  state.t = 0.0;
  state.C = interpolate_scalar(d.mesh(), d.dofs(), coeffs.c0);
  StepDiagnostics s0;
  try {
    const DarcyResult dr = darcy_solve(d, coeffs, state.C, 0.0, recipe, tol, config.max_iterations);
    state.U = dr.U;
    state.P = dr.P;
    s0.residual_up = dr.residual;
    s0.divergence_defect = dr.divergence_defect;
    s0.darcy_updated = true;
  } catch (const Error& e) {
    throw SolverFailure(0, e.what());
  }
  fill_concentration_stats(d, lumped, state.C, s0);
  result.steps.push_back(s0);
  progress(s0);
  if (config.snapshot_every > 0) result.snapshots.push_back(state);

  for (int n = 1; n <= N; ++n) {
    const double t_n = n == N ? config.T : n * tau;
    StepDiagnostics s;
    s.step = n;
    s.t = t_n;
    try {
      const Transport tr = build_transport(d, coeffs, state.U, t_n, recipe);
      if (config.fct) {
        FctDiagnostics fd;
        state.C = fct_step(M, tr, state.C, tau, tol, config.max_iterations, &fd);
        s.residual_c = fd.residual;
        s.alpha_min = fd.alpha_min;
        s.alpha_max = fd.alpha_max;
        s.flux_sum = fd.flux_sum;
      } else {
        state.C = implicit_step(M, tr, state.C, tau, tol, config.max_iterations, &s.residual_c);
      }
      if (n % config.reuse_period == 0) {
        const DarcyResult dr = darcy_solve(d, coeffs, state.C, t_n, recipe, tol, config.max_iterations);
        state.U = dr.U;
        state.P = dr.P;
        s.residual_up = dr.residual;
        s.divergence_defect = dr.divergence_defect;
        s.darcy_updated = true;
      }
    } catch (const SolverFailure&) {
      throw;
    } catch (const Error& e) {
      throw SolverFailure(n, e.what());
    }
    state.step = n;
    state.t = t_n;
    fill_concentration_stats(d, lumped, state.C, s);
    result.steps.push_back(s);
    progress(s);
    if (config.snapshot_every > 0 && n % config.snapshot_every == 0) result.snapshots.push_back(state);
  }
  result.final_state = state;
  return result;
}

}  // namespace vemflow
