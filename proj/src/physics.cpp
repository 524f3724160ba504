#include "vemflow/physics.hpp"

#include <algorithm>
#include <cmath>

#include "vemflow/errors.hpp"
#include "vemflow/log.hpp"

namespace vemflow {

Mat2 diffusion_tensor(const Vec2& u, double phi, double d_m, double d_l, double d_t) {
  const double norm = u.norm();
  Mat2 d = d_m * Mat2::Identity();
  if (norm > 0.0) {
    const Mat2 e = u * u.transpose() / (norm * norm);
    d += norm * (d_l * e + d_t * (Mat2::Identity() - e));
  }
  return phi * d;
}

namespace {
double mobility_factor(double c, double M) {
  const double cc = std::clamp(c, 0.0, 1.0);
  const double b = 1.0 + (std::pow(M, 0.25) - 1.0) * cc;
  const double b2 = b * b;
  return b2 * b2;
}
}  // namespace

double viscosity(double c, double mu0, double M) {
  if (!(M > 0.0)) throw InvalidCoefficient("mobility ratio must be positive");
  return mu0 / mobility_factor(c, M);
}

double mobility(double c, double kappa_over_mu0, double M) {
  if (!(M > 0.0)) throw InvalidCoefficient("mobility ratio must be positive");
  return kappa_over_mu0 * mobility_factor(c, M);
}

void Coefficients::validate() const {
  const Dispersion& d = dispersion;
  if (!porosity || !mobility.a || !q_plus || !q_minus || !c_hat || !c0)
    throw InvalidCoefficient("coefficient set is incomplete");
  if (!(porosity_lower > 0.0)) throw InvalidCoefficient("porosity lower bound must be positive");
  if (d.d_m < 0.0 || d.d_l < 0.0 || d.d_t < 0.0) throw InvalidCoefficient("negative dispersion coefficient");
  if (!(mobility.lower > 0.0) || !(mobility.upper >= mobility.lower))
    throw InvalidCoefficient("mobility bounds must satisfy 0 < lower <= upper");
  if (d.d_m == 0.0) {
    if (!allow_degenerate_dispersion)
      throw InvalidCoefficient("d_m = 0 makes the diffusion degenerate; enable it explicitly");
    log_warning("d_m = 0: degenerate diffusion outside the coercive setting");
  } else if (!(d.d_m <= d.d_t && d.d_t <= d.d_l)) {
    log_info("dispersion constants do not satisfy d_m <= d_t <= d_l");
  }
}

double WellSet::total_injection() const {
  double s = 0.0;
  for (const Well& w : wells)
    if (w.kind == WellKind::Injection) s += w.rate;
  return s;
}

double WellSet::total_production() const {
  double s = 0.0;
  for (const Well& w : wells)
    if (w.kind == WellKind::Production) s += w.rate;
  return s;
}

void WellSet::validate(double tol) const {
  for (const Well& w : wells)
    if (!(w.rate >= 0.0)) throw InvalidInput("well rates must be non-negative");
  const double in = total_injection();
  const double out = total_production();
  if (std::abs(in - out) > tol * std::max({1.0, in, out}))
    throw InvalidInput("injection and production rates do not balance");
}

namespace {
CellField cellwise(std::vector<double> values) {
  return [v = std::move(values)](int cell, const Vec2&, double) { return v[cell]; };
}
}  // namespace

CellField CellDensities::q_plus_field() const { return cellwise(q_plus); }
CellField CellDensities::q_minus_field() const { return cellwise(q_minus); }
CellField CellDensities::c_hat_field() const { return cellwise(c_hat); }

CellDensities wells_to_density(const WellSet& wells, const Mesh& mesh) {
  const int n = mesh.num_cells();
  CellDensities out;
  out.q_plus.assign(n, 0.0);
  out.q_minus.assign(n, 0.0);
  out.c_hat.assign(n, 0.0);
  std::vector<double> injected(n, 0.0);
  for (const Well& w : wells.wells) {
    const int c = mesh.locate(w.location);
    if (c < 0) throw InvalidInput("well outside the domain");
    const double density = w.rate / mesh.geometry(c).area;
    if (w.kind == WellKind::Injection) {
      out.q_plus[c] += density;
      injected[c] += density * w.concentration;
    } else {
      out.q_minus[c] += density;
    }
  }
  for (int c = 0; c < n; ++c)
    if (out.q_plus[c] > 0.0) out.c_hat[c] = injected[c] / out.q_plus[c];
  return out;
}

ManufacturedProblem example1_problem() {
  ManufacturedProblem mp;
  mp.phi = 1.0;
  mp.dispersion = {0.02, 1.0, 1.0};
  const double phi = mp.phi;
  const double d_m = mp.dispersion.d_m;
  // The closed form of f below uses d_l = d_t, for which D(u) = phi (d_m + |u|) I.
  const double d_disp = mp.dispersion.d_l;

  auto X = [](double x) { return x * x * (x - 1) * (x - 1); };
  auto dX = [](double x) { return 2 * x * (x - 1) * (2 * x - 1); };
  auto ddX = [](double x) { return 2 * (6 * x * x - 6 * x + 1); };

  ExactSolution ex;
  ex.c = [=](const Vec2& x, double t) { return t * t * (X(x.x()) + X(x.y())); };
  ex.grad_c = [=](const Vec2& x, double t) { return Vec2(t * t * dX(x.x()), t * t * dX(x.y())); };
  ex.u = ex.grad_c;
  ex.p = [=](const Vec2& x, double t) {
    const double c = t * t * (X(x.x()) + X(x.y()));
    return -0.5 * c * c - 2.0 * c + 17.0 / 6300.0 * std::pow(t, 4) + 2.0 / 15.0 * t * t;
  };
  mp.exact = ex;
  mp.g = [=](const Vec2& x, double t) { return t * t * (ddX(x.x()) + ddX(x.y())); };
  mp.f = [=](const Vec2& x, double t) {
    const double c_t = 2 * t * (X(x.x()) + X(x.y()));
    const double u1 = t * t * dX(x.x()), u2 = t * t * dX(x.y());
    const double u1p = t * t * ddX(x.x()), u2p = t * t * ddX(x.y());
    const double un = std::hypot(u1, u2);
    const double g = u1p + u2p;
    // div(phi (d_m + d|u|) u) = phi [d_m g + d (|u| g + u . grad|u|)]
    double div_flux = d_m * g;
    if (un > 0.0) div_flux += d_disp * (un * g + (u1 * u1 * u1p + u2 * u2 * u2p) / un);
    return phi * c_t + un * un - phi * div_flux;
  };

  Problem& p = mp.problem;
  p.name = "example1";
  p.domain = unit_square();
  p.T = 0.01;
  p.default_tau = 0.002;
  p.default_mesh_n = 8;
  p.exact = ex;
  const auto g = mp.g;
  const auto f = mp.f;
  const auto c_exact = ex.c;
  const Dispersion disp = mp.dispersion;
  p.coefficients = [=](const Mesh&) {
    Coefficients k;
    k.porosity = [phi](const Vec2&) { return phi; };
    k.porosity_lower = phi;
    k.dispersion = disp;
    k.mobility.a = [](double c, const Vec2&) { return 1.0 / (std::clamp(c, 0.0, 1.0) + 2.0); };
    k.mobility.lower = 0.2;
    k.mobility.upper = 1.0;
    k.q_plus = [g](int, const Vec2& x, double t) { return std::max(g(x, t), 0.0); };
    k.q_minus = [g](int, const Vec2& x, double t) { return std::max(-g(x, t), 0.0); };
    k.c_hat = [c_exact](int, const Vec2& x, double t) { return c_exact(x, t); };
    k.source = [f](int, const Vec2& x, double t) { return f(x, t); };
    k.c0 = [](const Vec2&) { return 0.0; };
    return k;
  };
  return mp;
}

Problem example2_problem(Example2Variant variant) {
  const bool b = variant == Example2Variant::TestB;
  const double d_m = b ? 0.0 : 10.0;
  const double M = b ? 41.0 : 1.0;
  Problem p;
  p.name = b ? "example2b" : "example2a";
  p.domain = {0.0, 0.0, 1000.0, 1000.0};
  p.T = 3600.0;
  p.default_tau = 36.0;
  p.default_mesh_n = 25;
  WellSet wells;
  wells.wells.push_back({Vec2(1000.0, 1000.0), 30.0, WellKind::Injection, 1.0});
  wells.wells.push_back({Vec2(0.0, 0.0), 30.0, WellKind::Production, 0.0});
  p.wells = wells;
  p.coefficients = [=](const Mesh& mesh) {
    const CellDensities dens = wells_to_density(wells, mesh);
    Coefficients k;
    k.porosity = [](const Vec2&) { return 0.1; };
    k.porosity_lower = 0.1;
    k.dispersion = {d_m, 50.0, 5.0};
    k.mobility.a = [M](double c, const Vec2&) { return mobility(c, 80.0, M); };
    // Endpoint values of the law itself, so rounding in M^(1/4) cannot push
    // a(1) past the declared bound.
    k.mobility.lower = mobility(0.0, 80.0, M);
    k.mobility.upper = mobility(1.0, 80.0, M);
    k.q_plus = dens.q_plus_field();
    k.q_minus = dens.q_minus_field();
    k.c_hat = dens.c_hat_field();
    k.c0 = [](const Vec2&) { return 0.0; };
    k.allow_degenerate_dispersion = b;
    return k;
  };
  return p;
}

Problem problem_by_name(const std::string& name) {
  if (name == "example1") return example1_problem().problem;
  if (name == "example2a") return example2_problem(Example2Variant::TestA);
  if (name == "example2b") return example2_problem(Example2Variant::TestB);
  throw InvalidInput("unknown problem '" + name + "' (expected example1, example2a or example2b)");
}

}  // namespace vemflow
